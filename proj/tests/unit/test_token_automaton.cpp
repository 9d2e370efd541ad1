#include <doctest.h>

#include <random>
#include <set>

#include "dingo/error.hpp"
#include "dingo/io.hpp"
#include "dingo/token_automaton.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "random_instance.hpp"

using namespace dingo;

TEST_CASE("a*b lifted over a small vocabulary") {
    const auto c = fixture::compile("a*b", {"a", "b", "ab", "aab"});
    const TokenAutomaton& ta = c.ta;
    REQUIRE(ta.num_states() == 3);
    CHECK(ta.token_transition(0, c.id("ab")) == StateId{1});
    CHECK(ta.token_transition(0, c.id("aab")) == StateId{1});
    CHECK(ta.token_transition(0, c.id("a")) == StateId{0});
    CHECK(ta.token_transition(0, c.id("b")) == StateId{1});
    CHECK(ta.edges_from(1).empty());
    CHECK(ta.edges_from(2).empty());

    auto closure = ta.mask_closure(0);
    CHECK(std::vector<StateId>(closure.begin(), closure.end()) == std::vector<StateId>{0, 1});
    CHECK(ta.mask_closure(1).empty());

    CHECK(ta.combined_transition(0, c.id("a")) == std::vector<StateId>{0});
    CHECK(ta.combined_transition(0, c.mask()) == std::vector<StateId>{0, 1});
    CHECK(ta.combined_transition(1, c.id("a")).empty());
    CHECK_THROWS_AS(ta.combined_transition(0, 99), InvalidToken);
    CHECK(ta.live().to_vector() == std::vector<StateId>{0, 1});
}

TEST_CASE("tokens that never survive contribute nothing") {
    const auto c = fixture::compile("a*b", {"z"});
    for (StateId q = 0; q < c.ta.num_states(); ++q) {
        CHECK(c.ta.edges_from(q).empty());
        CHECK(c.ta.mask_closure(q).empty());
    }
    CHECK(c.ta.num_token_edges() == 0);
    CHECK(c.ta.live().to_vector() == std::vector<StateId>{1});
}

TEST_CASE("dot-star collapses to a self loop") {
    const auto c = fixture::compile(".*", {"x", "yz", "\n"});
    auto closure = c.ta.mask_closure(c.ta.start());
    CHECK(std::vector<StateId>(closure.begin(), closure.end()) == std::vector<StateId>{c.ta.start()});
    CHECK_FALSE(c.ta.token_transition(c.ta.start(), c.id("\n")).has_value());
}

TEST_CASE("token-level liveness can be stricter than character liveness") {
    // "ab" needs a 'b' after 'a', but no token starts with 'b'.
    const auto c = fixture::compile("ab|c", {"a", "c"});
    const StateId after_a = *c.ta.token_transition(c.ta.start(), c.id("a"));
    CHECK(compute_live_states(c.dfa).contains(after_a));
    CHECK_FALSE(c.ta.is_live(after_a));
    CHECK(c.ta.is_live(c.ta.start()));
}

TEST_CASE("lifting matches character-level runs exhaustively") {
    std::mt19937_64 rng(11);
    gen::InstanceLimits limits;
    limits.max_vocab = 50;
    for (int i = 0; i < 200; ++i) {
        const auto inst = gen::random_instance(rng, limits);
        const auto char_live = compute_live_states(inst.dfa);
        for (StateId q = 0; q < inst.ta.num_states(); ++q) {
            for (TokenId t = 0; t < inst.vocab.size(); ++t) {
                if (inst.vocab.is_mask(t)) continue;
                const auto got = inst.ta.token_transition(q, t);
                const StateId want = extended_transition(inst.dfa, std::string_view(inst.vocab.token(t)), q);
                // Edges out of or through non-live characters states are dropped.
                bool survives = char_live.contains(q);
                StateId s = q;
                for (char ch : inst.vocab.token(t)) {
                    s = inst.dfa.step(s, static_cast<char32_t>(ch));
                    survives = survives && char_live.contains(s);
                }
                if (survives) {
                    REQUIRE(got.has_value());
                    CHECK(*got == want);
                } else {
                    CHECK_FALSE(got.has_value());
                }
            }
        }
    }
}

TEST_CASE("mask closure equals the set of token targets") {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 300; ++i) {
        const auto inst = gen::random_instance(rng);
        for (StateId q = 0; q < inst.ta.num_states(); ++q) {
            std::set<StateId> want;
            for (TokenId t = 0; t < inst.vocab.size(); ++t)
                if (auto s = inst.ta.token_transition(q, t)) want.insert(*s);
            auto got = inst.ta.mask_closure(q);
            CHECK(std::vector<StateId>(got.begin(), got.end()) == std::vector<StateId>(want.begin(), want.end()));
        }
    }
}

TEST_CASE("token-level live set agrees with bounded search") {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 300; ++i) {
        const auto inst = gen::random_instance(rng);
        const std::size_t n = inst.ta.num_states();
        for (StateId q = 0; q < n; ++q) {
            // Breadth-first over token edges, depth <= |Q|.
            std::set<StateId> frontier{q}, seen{q};
            bool found = inst.ta.accepting().contains(q);
            for (std::size_t depth = 0; depth < n && !found; ++depth) {
                std::set<StateId> next;
                for (StateId s : frontier)
                    for (const auto& e : inst.ta.edges_from(s))
                        if (seen.insert(e.target).second) next.insert(e.target);
                for (StateId s : next) found = found || inst.ta.accepting().contains(s);
                frontier = std::move(next);
            }
            CHECK(inst.ta.is_live(q) == found);
        }
        const auto oracle_live = oracle::token_live(inst.dfa, inst.vocab);
        for (StateId q = 0; q < n; ++q) CHECK(inst.ta.is_live(q) == oracle_live[q]);
    }
}

TEST_CASE("token classes group identical transition columns") {
    std::mt19937_64 rng(14);
    gen::InstanceLimits limits;
    limits.max_vocab = 40;
    for (int i = 0; i < 100; ++i) {
        const auto inst = gen::random_instance(rng, limits);
        const auto classes = inst.ta.token_classes();
        const std::size_t n = inst.ta.num_states();
        auto column = [&](TokenId t) {
            std::vector<std::optional<StateId>> col;
            for (StateId q = 0; q < n; ++q) col.push_back(inst.ta.token_transition(q, t));
            return col;
        };
        for (TokenId a = 0; a < inst.vocab.size(); ++a) {
            if (inst.vocab.is_mask(a)) {
                CHECK(classes[a] == TokenAutomaton::kNoClass);
                continue;
            }
            for (TokenId b = a + 1; b < inst.vocab.size(); ++b) {
                if (inst.vocab.is_mask(b) || classes[a] == TokenAutomaton::kNoClass) continue;
                CHECK((classes[a] == classes[b]) == (column(a) == column(b)));
            }
        }
        for (StateId q = 0; q < n; ++q) {
            for (const auto& e : inst.ta.class_edges_from(q)) {
                for (TokenId t = 0; t < inst.vocab.size(); ++t)
                    if (classes[t] == e.token_class) CHECK(inst.ta.token_transition(q, t) == e.target);
            }
        }
    }
}

TEST_CASE("realizing token is the smallest id on the edge") {
    const auto c = fixture::compile("a*b", {"aab", "b", "ab", "a"});
    CHECK(c.ta.realizing_token(0, 1) == c.id("aab"));
    CHECK(c.ta.realizing_token(0, 0) == c.id("a"));
    CHECK(c.ta.realizing_token(1, 0) == kNoToken);
}

TEST_CASE("special tokens take no part") {
    TokenVocabulary vocab({"a", "b", "<pad>", "<m>"}, 3, {2});
    const CharDfa dfa = compile_regex("[ab<>padm]*");
    const auto ta = TokenAutomaton::build(dfa, compute_live_states(dfa), vocab);
    CHECK_FALSE(ta.token_transition(0, 2).has_value());
    CHECK(ta.token_classes()[2] == TokenAutomaton::kNoClass);
}

TEST_CASE("serialization round trip") {
    const auto c = fixture::compile("a*b", {"a", "b", "ab", "aab"});
    const auto bytes = c.ta.serialize();
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "DGTA");
    const TokenAutomaton back = TokenAutomaton::deserialize(bytes, c.vocab);
    CHECK(back == c.ta);
    CHECK(back.serialize() == bytes);
    CHECK(back.token_classes().size() == c.ta.token_classes().size());
}

TEST_CASE("serialization errors") {
    const auto c = fixture::compile("a*b", {"a", "b", "ab", "aab"});
    const auto bytes = c.ta.serialize();

    for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
        CAPTURE(cut);
        CHECK_THROWS_AS(TokenAutomaton::deserialize(std::span(bytes.data(), cut), c.vocab), FormatError);
    }
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(TokenAutomaton::deserialize(bad_magic, c.vocab), FormatError);

    auto bad_version = bytes;
    bad_version[4] = 99;
    CHECK_THROWS_AS(TokenAutomaton::deserialize(bad_version, c.vocab), VersionMismatch);

    auto trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS_AS(TokenAutomaton::deserialize(trailing, c.vocab), FormatError);

    const TokenVocabulary other = make_vocabulary({"a", "b", "ab", "aac"}, "<m>");
    CHECK_THROWS_AS(TokenAutomaton::deserialize(bytes, other), VocabularyMismatch);
}

TEST_CASE("builds are deterministic and thread-count independent") {
    const CharDfa dfa = compile_regex(fixture::read_regex("gsm_symbolic.regex"));
    std::vector<std::string> tokens;
    for (const std::string s : {"<<", ">>", " ", "a", "b", "12", "3", "+", " -", "//", "(", ")", "text", "\n", "%"})
        tokens.push_back(s);
    const TokenVocabulary vocab = make_vocabulary(tokens, "<m>");
    const auto live = compute_live_states(dfa);
    const auto one = TokenAutomaton::build(dfa, live, vocab);
    TokenBuildOptions four;
    four.threads = 4;
    const auto many = TokenAutomaton::build(dfa, live, vocab, four);
    CHECK(one.serialize() == TokenAutomaton::build(dfa, live, vocab).serialize());
    CHECK(one.serialize() == many.serialize());
}

TEST_CASE("lifting soundness on the large vocabulary, sampled") {
    const TokenVocabulary vocab = io::load_tiktoken(fixture::data_path("qwen.tiktoken"), "<|mask|>");
    const CharDfa dfa = compile_regex(fixture::read_regex("gsm_symbolic.regex"));
    const auto char_live = compute_live_states(dfa);
    const auto ta = TokenAutomaton::build(dfa, char_live, vocab);
    std::mt19937_64 rng(15);
    std::uniform_int_distribution<TokenId> token(0, static_cast<TokenId>(vocab.size() - 2));
    std::uniform_int_distribution<StateId> state(0, static_cast<StateId>(ta.num_states() - 1));
    std::size_t with_edge = 0;
    for (int i = 0; i < 10000; ++i) {
        const TokenId t = token(rng);
        const StateId q = state(rng);
        const StateId want = extended_transition(dfa, std::string_view(vocab.token(t)), q);
        const auto got = ta.token_transition(q, t);
        if (char_live.contains(want) && char_live.contains(q)) {
            REQUIRE(got.has_value());
            CHECK(*got == want);
            ++with_edge;
        } else {
            CHECK_FALSE(got.has_value());
        }
    }
    CHECK(with_edge > 0);
}
