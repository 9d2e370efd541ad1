#pragma once

#include <fstream>
#include <initializer_list>
#include <iterator>
#include <string>
#include <vector>

#include "dingo/probability_block.hpp"
#include "dingo/regex_automaton.hpp"
#include "dingo/token_automaton.hpp"
#include "dingo/vocabulary.hpp"

namespace fixture {

// A regex compiled against a small vocabulary; the mask is appended last.
struct Compiled {
    dingo::CharDfa dfa;
    dingo::TokenVocabulary vocab;
    dingo::TokenAutomaton ta;

    dingo::TokenId id(const std::string& token) const { return *vocab.find(token); }
    dingo::TokenId mask() const { return vocab.mask_id(); }
};

inline Compiled compile(const std::string& regex, std::vector<std::string> tokens, const std::string& mask = "<m>") {
    dingo::CharDfa dfa = dingo::compile_regex(regex);
    dingo::TokenVocabulary vocab = dingo::make_vocabulary(std::move(tokens), mask);
    dingo::TokenAutomaton ta = dingo::TokenAutomaton::build(dfa, dingo::compute_live_states(dfa), vocab);
    return Compiled{std::move(dfa), std::move(vocab), std::move(ta)};
}

// Rows given as full probability vectors.
inline dingo::ProbabilityBlock rows(std::initializer_list<std::vector<float>> r) {
    const std::size_t m = r.begin()->size();
    std::vector<float> data;
    for (const auto& row : r) data.insert(data.end(), row.begin(), row.end());
    return dingo::ProbabilityBlock(r.size(), m, std::move(data));
}

inline std::string data_path(const std::string& name) { return std::string(DINGO_TEST_DATA_DIR) + "/" + name; }

// A one-line regex file without its trailing newline.
inline std::string read_regex(const std::string& name) {
    std::ifstream in(data_path(name), std::ios::binary);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    return text;
}

} // namespace fixture
