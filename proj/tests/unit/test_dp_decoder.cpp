#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "dingo/baselines.hpp"
#include "dingo/dp_decoder.hpp"
#include "dingo/error.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "random_instance.hpp"

using namespace dingo;
using doctest::Approx;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool close_log(double a, double b) { return std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(b)); }

} // namespace

TEST_CASE("cost tables for a*b") {
    const auto c = fixture::compile("a*b", {"a", "b"});
    const auto tables = build_cost_tables(c.ta, fixture::rows({{0.6f, 0.4f, 0.0f}}));
    CHECK(tables.cost(0, 0, 0).first == Approx(0.6));
    CHECK(tables.cost(0, 0, 0).second == c.id("a"));
    CHECK(tables.cost(0, 0, 1).first == Approx(0.4));
    CHECK(tables.cost(0, 0, 1).second == c.id("b"));
    CHECK(tables.cost(0, 1, 0) == std::pair<double, TokenId>{0.0, kNoToken});
    CHECK(tables.cost(0, 0, 2).first == 0.0);
}

TEST_CASE("cost tables for a masked row") {
    const auto c = fixture::compile("a*b", {"a", "b"});
    ProbabilityBlock block(1, c.vocab.size());
    block.set_masked(0, c.mask());
    const auto tables = build_cost_tables(c.ta, block);
    CHECK(tables.cost(0, 0, 0) == std::pair<double, TokenId>{1.0, c.mask()});
    CHECK(tables.cost(0, 0, 1) == std::pair<double, TokenId>{1.0, c.mask()});
}

TEST_CASE("cost tables pick the best of parallel edges") {
    const auto c = fixture::compile("a*b", {"a", "b", "ab"});
    const auto tables = build_cost_tables(c.ta, fixture::rows({{0.2f, 0.1f, 0.5f, 0.0f}}));
    CHECK(tables.cost(0, 0, 1).first == Approx(0.5));
    CHECK(tables.cost(0, 0, 1).second == c.id("ab"));
}

TEST_CASE("cost tables reject mismatched rows") {
    const auto c = fixture::compile("a*b", {"a", "b"});
    CHECK_THROWS_AS(build_cost_tables(c.ta, fixture::rows({{0.5f, 0.5f}})), DimensionMismatch);
    CHECK_THROWS_AS(build_cost_tables(c.ta, fixture::rows({{0.5f, -0.5f, 1.0f}})), InvalidArgument);
}

TEST_CASE("forward pass over two unmasked positions") {
    const auto c = fixture::compile("a*b", {"a", "b"});
    const auto block = fixture::rows({{0.6f, 0.4f, 0.0f}, {0.7f, 0.3f, 0.0f}});
    const DpTable table = dp_forward(build_cost_tables(c.ta, block), 0);
    CHECK(table.score(0, 0) == 0.0);
    CHECK(table.score(0, 1) == kNegInf);
    CHECK(table.score(2, 0) == Approx(std::log(0.6f * 0.7f)));
    CHECK(table.score(2, 1) == Approx(std::log(0.6f * 0.3f)));

    const auto out = reconstruct_path(table, c.ta.live());
    REQUIRE(out);
    CHECK(out->tokens == std::vector<TokenId>{c.id("a"), c.id("a")});
    CHECK(out->end_state == 0);
    CHECK(std::exp(out->log_prob) == Approx(0.42).epsilon(1e-6));
}

TEST_CASE("forward pass with a masked first position") {
    const auto c = fixture::compile("a*b", {"a", "b"});
    ProbabilityBlock block(2, 3);
    block.set_masked(0, c.mask());
    block.row(1)[0] = 0.7f;
    block.row(1)[1] = 0.3f;
    const DpTable table = dp_forward(build_cost_tables(c.ta, block), 0);
    CHECK(table.score(2, 0) == Approx(std::log(0.7f)));
    CHECK(table.score(2, 1) == Approx(std::log(0.3f)));
    const auto out = reconstruct_path(table, c.ta.live());
    REQUIRE(out);
    CHECK(out->tokens == std::vector<TokenId>{c.mask(), c.id("a")});
    CHECK(out->end_state == 0);
    CHECK(out->log_prob == Approx(std::log(0.7f)));
}

TEST_CASE("start state without outgoing edges") {
    const auto c = fixture::compile("a*b", {"a", "b"});
    const auto block = fixture::rows({{0.5f, 0.5f, 0.0f}, {0.5f, 0.5f, 0.0f}});
    const DpTable table = dp_forward(build_cost_tables(c.ta, block), 1);
    for (std::size_t i = 1; i <= 2; ++i)
        for (StateId q = 0; q < 3; ++q) CHECK(table.score(i, q) == kNegInf);
    CHECK_FALSE(reconstruct_path(table, c.ta.live()));
    CHECK_THROWS_AS(dp_forward(build_cost_tables(c.ta, block), 7), InvalidArgument);
}

TEST_CASE("empty live set gives no valid prefix") {
    const auto c = fixture::compile("a*b", {"a", "b"});
    const DpTable table = dp_forward(build_cost_tables(c.ta, fixture::rows({{0.5f, 0.5f, 0.0f}})), 0);
    CHECK_FALSE(reconstruct_path(table, StateSet(3)));
}

TEST_CASE("optimal decoding beats the greedy choice") {
    const auto c = fixture::compile("(aa)|(bc)", {"a", "b", "c"});
    const auto block = fixture::rows({{0.6f, 0.4f, 0.0f, 0.0f}, {0.1f, 0.0f, 0.9f, 0.0f}});
    const auto out = decode_block(c.ta, block, c.ta.start());
    REQUIRE(out);
    CHECK(c.vocab.render(out->tokens, "?") == "bc");
    CHECK(std::exp(out->log_prob) == Approx(0.36).epsilon(1e-6));
}

TEST_CASE("dot-star decoding is the row argmax") {
    const auto c = fixture::compile(".*", {"x", "y", "z"});
    const auto block = fixture::rows({{0.2f, 0.5f, 0.3f, 0.0f}, {0.6f, 0.1f, 0.3f, 0.0f}, {0.1f, 0.1f, 0.8f, 0.0f}});
    const auto out = decode_block(c.ta, block, c.ta.start());
    REQUIRE(out);
    CHECK(out->tokens == unconstrained_decode(block));
}

TEST_CASE("mass only on invalid tokens gives no valid prefix") {
    const auto c = fixture::compile("a", {"a", "b"});
    const auto block = fixture::rows({{0.0f, 1.0f, 0.0f}, {0.0f, 1.0f, 0.0f}});
    const auto out = decode_block(c.ta, block, c.ta.start());
    REQUIRE_FALSE(out);
    CHECK(out.failure().witness_state < c.ta.num_states());
}

TEST_CASE("committed rows that contradict the constraint are not overridden") {
    const auto c = fixture::compile("ab", {"a", "b"});
    ProbabilityBlock block(2, 3);
    block.set_one_hot(0, c.id("b"));
    block.set_one_hot(1, c.id("b"));
    CHECK_FALSE(decode_block(c.ta, block, c.ta.start()));
}

TEST_CASE("ties resolve to smaller states and tokens") {
    // Both tokens lead to accepting states with equal probability.
    const auto c = fixture::compile("x|y", {"y", "x"});
    const auto out = decode_block(c.ta, fixture::rows({{0.5f, 0.5f, 0.0f}}), c.ta.start());
    REQUIRE(out);
    CHECK(out->tokens == std::vector<TokenId>{0});
}

TEST_CASE("parents reproduce the scores") {
    std::mt19937_64 rng(21);
    for (int i = 0; i < 300; ++i) {
        const auto inst = gen::random_instance(rng);
        const auto tables = build_cost_tables(inst.ta, inst.block);
        const DpTable table = dp_forward(tables, inst.start);
        for (std::size_t pos = 1; pos <= inst.block.length(); ++pos) {
            for (StateId q = 0; q < inst.ta.num_states(); ++q) {
                if (table.score(pos, q) == kNegInf) continue;
                const auto& p = table.parent(pos, q);
                const auto [prob, token] = tables.cost(pos - 1, p.prev, q);
                CHECK(token == p.token);
                CHECK(std::abs(table.score(pos - 1, p.prev) + std::log(prob) - table.score(pos, q)) <= 1e-12);
            }
        }
    }
}

TEST_CASE("decoder matches exhaustive search") {
    std::mt19937_64 rng(22);
    int optimal = 0, none = 0;
    for (int i = 0; i < 500; ++i) {
        const auto inst = gen::random_instance(rng);
        const auto out = decode_block(inst.ta, inst.block, inst.start);
        const auto best = oracle::exhaustive_best(inst.dfa, inst.vocab, inst.block, inst.start);
        REQUIRE(out.has_value() == best.has_value());
        if (!out) {
            ++none;
            continue;
        }
        ++optimal;
        CHECK(close_log(out->log_prob, std::log(best->probability)));
    }
    CHECK(optimal > 100);
    CHECK(none > 20);
}

TEST_CASE("outputs replay to live states and masks can be realized") {
    std::mt19937_64 rng(23);
    for (int i = 0; i < 500; ++i) {
        const auto inst = gen::random_instance(rng);
        const auto out = decode_block(inst.ta, inst.block, inst.start);
        if (!out) continue;
        CHECK(inst.ta.is_live(out->end_state));
        CHECK(replay(inst.ta, out->tokens, inst.start).contains(out->end_state));
        const auto live = oracle::token_live(inst.dfa, inst.vocab);
        CHECK(oracle::valid_prefix(inst.dfa, inst.vocab, live, out->tokens, inst.start));

        const auto realized = realize_masks(inst.ta, out.optimal());
        StateId q = inst.start;
        for (TokenId t : realized) {
            REQUIRE(t != inst.vocab.mask_id());
            const auto next = inst.ta.token_transition(q, t);
            REQUIRE(next.has_value());
            q = *next;
        }
        CHECK(q == out->end_state);
    }
}

TEST_CASE("raising a row to the mask never loses validity") {
    std::mt19937_64 rng(24);
    for (int i = 0; i < 300; ++i) {
        const auto inst = gen::random_instance(rng);
        if (!decode_block(inst.ta, inst.block, inst.start)) continue;
        for (std::size_t pos = 0; pos < inst.block.length(); ++pos) {
            ProbabilityBlock masked = inst.block;
            masked.row(pos)[inst.vocab.mask_id()] = 1.0f;
            CHECK(decode_block(inst.ta, masked, inst.start).has_value());
        }
    }
}

TEST_CASE("scaling rows leaves the argmax unchanged") {
    std::mt19937_64 rng(25);
    for (int i = 0; i < 300; ++i) {
        const auto inst = gen::random_instance(rng);
        const auto out = decode_block(inst.ta, inst.block, inst.start);
        for (float k : {0.5f, 4.0f}) {
            std::vector<float> data = inst.block.data();
            for (auto& v : data) v *= k;
            const ProbabilityBlock scaled(inst.block.length(), inst.block.vocab_size(), data);
            const auto again = decode_block(inst.ta, scaled, inst.start);
            REQUIRE(again.has_value() == out.has_value());
            if (out) CHECK(again->tokens == out->tokens);
        }
    }
}

TEST_CASE("results do not depend on the thread count") {
    std::mt19937_64 rng(26);
    DecodeOptions many;
    many.threads = 4;
    for (int i = 0; i < 200; ++i) {
        const auto inst = gen::random_instance(rng);
        const auto a = decode_block(inst.ta, inst.block, inst.start);
        const auto b = decode_block(inst.ta, inst.block, inst.start, many);
        REQUIRE(a.has_value() == b.has_value());
        if (!a) continue;
        CHECK(a->tokens == b->tokens);
        CHECK(a->states == b->states);
        CHECK(a->log_prob == b->log_prob);
    }
}
