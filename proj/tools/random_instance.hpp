#pragma once

// Small random decoding instances: a character DFA over a few letters, a
// vocabulary of short strings over the same letters, and one probability
// block. Used by `dingo oracle --random` and by the test suites.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dingo/probability_block.hpp"
#include "dingo/regex_automaton.hpp"
#include "dingo/token_automaton.hpp"
#include "dingo/vocabulary.hpp"

namespace dingo::gen {

struct InstanceLimits {
    std::size_t max_states = 8;   // including the dead sink
    std::size_t max_vocab = 10;   // including the mask
    std::size_t max_length = 6;
    std::size_t letters = 3;
    double masked_row = 0.25;     // chance a row is one-hot on the mask
    double committed_row = 0.1;   // chance a row is one-hot on a token
};

struct Instance {
    CharDfa dfa;
    TokenVocabulary vocab;
    TokenAutomaton ta;
    ProbabilityBlock block;
    StateId start;
};

inline CharDfa random_dfa(std::mt19937_64& rng, std::size_t num_states, std::size_t letters) {
    // Classes: [0,'a'), one per letter, then everything above.
    std::vector<char32_t> starts{0};
    for (std::size_t i = 0; i <= letters; ++i) starts.push_back(U'a' + static_cast<char32_t>(i));
    const std::size_t classes = starts.size();
    const StateId sink = static_cast<StateId>(num_states - 1);
    std::vector<StateId> trans(num_states * classes, sink);
    std::uniform_int_distribution<StateId> any(0, sink);
    std::bernoulli_distribution to_sink(0.1);
    for (StateId q = 0; q + 1 < num_states; ++q)
        for (std::size_t c = 1; c <= letters; ++c) trans[q * classes + c] = to_sink(rng) ? sink : any(rng);
    StateSet accepting(num_states);
    std::bernoulli_distribution accept(0.5);
    for (StateId q = 0; q + 1 < num_states; ++q)
        if (accept(rng)) accepting.insert(q);
    if (num_states > 1 && accepting.empty())
        accepting.insert(std::uniform_int_distribution<StateId>(0, static_cast<StateId>(num_states - 2))(rng));
    return CharDfa(std::move(starts), num_states, 0, std::move(accepting), std::move(trans));
}

inline TokenVocabulary random_vocabulary(std::mt19937_64& rng, std::size_t size, std::size_t letters) {
    std::vector<std::string> tokens;
    std::discrete_distribution<int> len({0.0, 0.6, 0.3, 0.1});
    std::uniform_int_distribution<int> letter(0, static_cast<int>(letters) - 1);
    while (tokens.size() + 1 < size) {
        std::string t;
        for (int i = len(rng); i > 0; --i) t.push_back(static_cast<char>('a' + letter(rng)));
        bool fresh = true;
        for (const auto& s : tokens) fresh = fresh && s != t;
        // Small alphabets run out of distinct short strings; allow repeats then.
        if (fresh || tokens.size() >= letters * 4) tokens.push_back(std::move(t));
    }
    return make_vocabulary(std::move(tokens), "<mask>");
}

inline ProbabilityBlock random_block(std::mt19937_64& rng, std::size_t length, std::size_t vocab_size, TokenId mask,
                                     const InstanceLimits& limits) {
    ProbabilityBlock block(length, vocab_size);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<TokenId> token(0, static_cast<TokenId>(vocab_size - 1));
    for (std::size_t i = 0; i < length; ++i) {
        const double r = unit(rng);
        if (r < limits.masked_row) {
            block.set_masked(i, mask);
            continue;
        }
        if (r < limits.masked_row + limits.committed_row) {
            block.set_one_hot(i, token(rng));
            continue;
        }
        // Coarse weights produce ties; some zeros exercise pruning.
        const bool coarse = unit(rng) < 0.3;
        std::vector<double> w(vocab_size);
        double sum = 0.0;
        for (auto& x : w) {
            x = unit(rng) < 0.2 ? 0.0 : unit(rng);
            if (coarse) x = std::floor(x * 4.0) / 4.0;
            sum += x;
        }
        if (sum == 0.0) {
            w[token(rng)] = 1.0;
            sum = 1.0;
        }
        auto row = block.row(i);
        for (std::size_t t = 0; t < vocab_size; ++t) row[t] = static_cast<float>(w[t] / sum);
    }
    return block;
}

inline Instance random_instance(std::mt19937_64& rng, const InstanceLimits& limits = {}) {
    std::uniform_int_distribution<std::size_t> states(2, limits.max_states);
    std::uniform_int_distribution<std::size_t> vocab(2, limits.max_vocab);
    std::uniform_int_distribution<std::size_t> length(1, limits.max_length);
    CharDfa dfa = random_dfa(rng, states(rng), limits.letters);
    TokenVocabulary v = random_vocabulary(rng, vocab(rng), limits.letters);
    TokenAutomaton ta = TokenAutomaton::build(dfa, compute_live_states(dfa), v);
    ProbabilityBlock block = random_block(rng, length(rng), v.size(), v.mask_id(), limits);
    StateId start = ta.start();
    if (std::bernoulli_distribution(0.25)(rng))
        start = std::uniform_int_distribution<StateId>(0, static_cast<StateId>(ta.num_states() - 1))(rng);
    return Instance{std::move(dfa), std::move(v), std::move(ta), std::move(block), start};
}

} // namespace dingo::gen
