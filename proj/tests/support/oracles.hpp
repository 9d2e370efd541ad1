#pragma once

// Reference implementations used only by tests. None of them go through the
// token automaton or the decoder: they work from the character DFA, from
// std::regex, or by plain enumeration.

#include <optional>
#include <string>
#include <vector>

#include "dingo/probability_block.hpp"
#include "dingo/regex_automaton.hpp"
#include "dingo/vocabulary.hpp"

namespace oracle {

using dingo::CharDfa;
using dingo::StateId;
using dingo::TokenId;

// Full-match membership with std::regex (ECMAScript). Only meaningful for
// ASCII patterns whose syntax means the same thing in both dialects.
bool regex_full_match(const std::string& pattern, const std::string& text);

// Number of Myhill-Nerode classes among all states, by the naive
// table-filling algorithm.
std::size_t table_filling_classes(const CharDfa& dfa);

// States reachable from the start state.
std::vector<bool> reachable_states(const CharDfa& dfa);

// Runs `text` character by character from `q`.
StateId run_chars(const CharDfa& dfa, const std::string& text, StateId q);

// q is token-live iff some sequence of vocabulary tokens (mask and specials
// excluded) leads from q to an accepting state. Fixed point over the chars.
std::vector<bool> token_live(const CharDfa& dfa, const dingo::TokenVocabulary& vocab);

// True when some mask substitution of `tokens`, run from `start`, ends in a
// token-live state without passing through the dead sink.
bool valid_prefix(const CharDfa& dfa, const dingo::TokenVocabulary& vocab, const std::vector<bool>& live,
                  const std::vector<TokenId>& tokens, StateId start);

struct Best {
    std::vector<TokenId> tokens;
    double probability;
};

// Exhaustive maximum of prod v_i[t_i] over valid sequences; ties keep the
// lexicographically smallest sequence. Sequences with probability 0 are
// ignored.
std::optional<Best> exhaustive_best(const CharDfa& dfa, const dingo::TokenVocabulary& vocab,
                                    const dingo::ProbabilityBlock& block, StateId start);

// All strings over `alphabet` of length <= max_len, shortest first.
std::vector<std::string> all_strings(const std::string& alphabet, std::size_t max_len);

} // namespace oracle
