#include <doctest.h>

#include <random>
#include <stdexcept>

#include "dingo/baselines.hpp"
#include "dingo/error.hpp"
#include "dingo/semi_autoregressive.hpp"
#include "fixtures.hpp"
#include "random_instance.hpp"

using namespace dingo;

TEST_CASE("two one-token blocks of (ab)(ab)") {
    const auto c = fixture::compile("(ab)(ab)", {"ab", "x"});
    BlockSource source = [&](std::size_t, std::span<const TokenId>) {
        ProbabilityBlock b(1, c.vocab.size());
        b.set_one_hot(0, c.id("ab"));
        return b;
    };
    const GenerationResult r = run_blocks(source, c.ta, GenerationConfig{1, 1, 2});
    REQUIRE(r.success);
    CHECK(r.tokens == std::vector<TokenId>{c.id("ab"), c.id("ab")});
    CHECK(c.ta.accepting().contains(r.end_state));
    CHECK(r.state.block_index == 2);
}

TEST_CASE("a single block is plain block decoding") {
    std::mt19937_64 rng(41);
    for (int i = 0; i < 200; ++i) {
        const auto inst = gen::random_instance(rng);
        BlockSource source = [&](std::size_t, std::span<const TokenId>) { return inst.block; };
        GenerationState state;
        state.current_state = inst.start;
        state.config = {inst.block.length(), 1, 1};
        const GenerationResult r = run_blocks(source, inst.ta, state);
        const auto dp = decode_block(inst.ta, inst.block, inst.start);
        REQUIRE(r.success == dp.has_value());
        if (!dp) continue;
        CHECK(r.raw_tokens == dp->tokens);
        CHECK(r.end_state == dp->end_state);
        CHECK(r.log_prob == dp->log_prob);
        CHECK(r.tokens == realize_masks(inst.ta, dp.optimal()));
    }
}

TEST_CASE("dead end in the second block keeps the first") {
    const auto c = fixture::compile("ab", {"a", "b"});
    BlockSource source = [&](std::size_t i, std::span<const TokenId>) {
        ProbabilityBlock b(1, c.vocab.size());
        b.set_one_hot(0, c.id("a"));  // second "a" is dead
        (void)i;
        return b;
    };
    const GenerationResult r = run_blocks(source, c.ta, GenerationConfig{1, 1, 2});
    CHECK_FALSE(r.success);
    CHECK(r.failed_block == 1);
    CHECK(r.tokens == std::vector<TokenId>{c.id("a")});
}

TEST_CASE("the source sees the committed prefix") {
    const auto c = fixture::compile("a*", {"a"});
    std::vector<std::size_t> seen;
    BlockSource source = [&](std::size_t, std::span<const TokenId> committed) {
        seen.push_back(committed.size());
        ProbabilityBlock b(2, c.vocab.size());
        b.set_masked(0, c.mask());
        b.set_one_hot(1, c.id("a"));
        return b;
    };
    const GenerationResult r = run_blocks(source, c.ta, GenerationConfig{2, 1, 3});
    REQUIRE(r.success);
    CHECK(seen == std::vector<std::size_t>{0, 2, 4});
    // Masks are realized before they are handed on.
    for (TokenId t : r.tokens) CHECK(t == c.id("a"));
    CHECK(r.raw_tokens[0] == c.mask());
}

TEST_CASE("source failures become BlockSourceError") {
    const auto c = fixture::compile("a*", {"a"});
    BlockSource source = [](std::size_t, std::span<const TokenId>) -> ProbabilityBlock {
        throw std::runtime_error("model crashed");
    };
    CHECK_THROWS_AS(run_blocks(source, c.ta, GenerationConfig{1, 1, 1}), BlockSourceError);

    BlockSource short_block = [&](std::size_t, std::span<const TokenId>) { return ProbabilityBlock(1, 2); };
    CHECK_THROWS_AS(run_blocks(short_block, c.ta, GenerationConfig{2, 1, 1}), DimensionMismatch);
}

TEST_CASE("concatenated output stays a valid prefix") {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 200; ++i) {
        auto inst = gen::random_instance(rng);
        gen::InstanceLimits limits;
        BlockSource source = [&](std::size_t, std::span<const TokenId>) {
            return gen::random_block(rng, 3, inst.vocab.size(), inst.vocab.mask_id(), limits);
        };
        const GenerationResult r = run_blocks(source, inst.ta, GenerationConfig{3, 1, 4});
        if (r.tokens.empty()) continue;
        CHECK(is_valid_prefix(inst.ta, r.tokens, inst.ta.start()));
        CHECK(resume_state(r.tokens, inst.ta) == r.end_state);
    }
}

TEST_CASE("resume state") {
    const auto c = fixture::compile("a*b", {"a", "b"});
    CHECK(resume_state(std::vector<TokenId>{c.id("a"), c.id("a")}, c.ta) == 0);
    CHECK(resume_state(std::vector<TokenId>{}, c.ta) == c.ta.start());
    CHECK_THROWS_AS(resume_state(std::vector<TokenId>{c.id("b"), c.id("a")}, c.ta), DeadPrefix);
    CHECK_THROWS_AS(resume_state(std::vector<TokenId>{c.mask()}, c.ta), InvalidToken);
}
