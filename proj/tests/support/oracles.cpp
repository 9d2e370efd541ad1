#include "oracles.hpp"

#include <map>
#include <regex>
#include <set>

namespace oracle {

bool regex_full_match(const std::string& pattern, const std::string& text) {
    static std::map<std::string, std::regex> cache;
    auto it = cache.find(pattern);
    if (it == cache.end()) it = cache.emplace(pattern, std::regex(pattern, std::regex::ECMAScript)).first;
    return std::regex_match(text, it->second);
}

std::size_t table_filling_classes(const CharDfa& dfa) {
    const std::size_t n = dfa.num_states();
    const std::size_t k = dfa.num_classes();
    std::vector<std::vector<bool>> marked(n, std::vector<bool>(n, false));
    for (StateId p = 0; p < n; ++p)
        for (StateId q = 0; q < n; ++q)
            if (dfa.is_accepting(p) != dfa.is_accepting(q)) marked[p][q] = true;
    bool changed = true;
    while (changed) {
        changed = false;
        for (StateId p = 0; p < n; ++p) {
            for (StateId q = 0; q < n; ++q) {
                if (marked[p][q]) continue;
                for (std::size_t c = 0; c < k; ++c) {
                    if (marked[dfa.next(p, c)][dfa.next(q, c)]) {
                        marked[p][q] = marked[q][p] = true;
                        changed = true;
                        break;
                    }
                }
            }
        }
    }
    std::size_t classes = 0;
    std::vector<bool> assigned(n, false);
    for (StateId p = 0; p < n; ++p) {
        if (assigned[p]) continue;
        ++classes;
        for (StateId q = p; q < n; ++q)
            if (!marked[p][q]) assigned[q] = true;
    }
    return classes;
}

std::vector<bool> reachable_states(const CharDfa& dfa) {
    std::vector<bool> seen(dfa.num_states(), false);
    std::vector<StateId> stack{dfa.start()};
    seen[dfa.start()] = true;
    while (!stack.empty()) {
        const StateId q = stack.back();
        stack.pop_back();
        for (std::size_t c = 0; c < dfa.num_classes(); ++c) {
            const StateId s = dfa.next(q, c);
            if (!seen[s]) {
                seen[s] = true;
                stack.push_back(s);
            }
        }
    }
    return seen;
}

StateId run_chars(const CharDfa& dfa, const std::string& text, StateId q) {
    for (unsigned char ch : text) q = dfa.step(q, static_cast<char32_t>(ch));
    return q;
}

namespace {

std::vector<TokenId> real_tokens(const dingo::TokenVocabulary& vocab) {
    std::vector<TokenId> out;
    for (TokenId t = 0; t < vocab.size(); ++t)
        if (!vocab.is_mask(t) && !vocab.is_special(t)) out.push_back(t);
    return out;
}

} // namespace

std::vector<bool> token_live(const CharDfa& dfa, const dingo::TokenVocabulary& vocab) {
    const std::size_t n = dfa.num_states();
    std::vector<bool> live(n, false);
    for (StateId q = 0; q < n; ++q) live[q] = dfa.is_accepting(q);
    const auto tokens = real_tokens(vocab);
    bool changed = true;
    while (changed) {
        changed = false;
        for (StateId q = 0; q < n; ++q) {
            if (live[q] || q == dfa.dead_state()) continue;
            for (TokenId t : tokens) {
                if (live[run_chars(dfa, vocab.token(t), q)]) {
                    live[q] = true;
                    changed = true;
                    break;
                }
            }
        }
    }
    return live;
}

namespace {

std::set<StateId> step(const CharDfa& dfa, const dingo::TokenVocabulary& vocab, const std::set<StateId>& from,
                       TokenId t) {
    std::set<StateId> out;
    for (StateId q : from) {
        if (vocab.is_mask(t)) {
            for (TokenId u : real_tokens(vocab)) {
                const StateId s = run_chars(dfa, vocab.token(u), q);
                if (s != dfa.dead_state()) out.insert(s);
            }
        } else if (!vocab.is_special(t)) {
            const StateId s = run_chars(dfa, vocab.token(t), q);
            if (s != dfa.dead_state()) out.insert(s);
        }
    }
    return out;
}

struct Search {
    const CharDfa& dfa;
    const dingo::TokenVocabulary& vocab;
    const dingo::ProbabilityBlock& block;
    std::vector<bool> live;
    std::vector<TokenId> current;
    std::optional<Best> best;

    void run(std::size_t i, const std::set<StateId>& states, double prob) {
        if (i == block.length()) {
            bool ok = false;
            for (StateId q : states) ok = ok || live[q];
            if (ok && (!best || prob > best->probability)) best = Best{current, prob};
            return;
        }
        for (TokenId t = 0; t < block.vocab_size(); ++t) {
            const double p = block.at(i, t);
            if (p <= 0.0) continue;
            const auto next = step(dfa, vocab, states, t);
            if (next.empty()) continue;
            current[i] = t;
            run(i + 1, next, prob * p);
        }
    }
};

} // namespace

bool valid_prefix(const CharDfa& dfa, const dingo::TokenVocabulary& vocab, const std::vector<bool>& live,
                  const std::vector<TokenId>& tokens, StateId start) {
    std::set<StateId> states{start};
    for (TokenId t : tokens) states = step(dfa, vocab, states, t);
    for (StateId q : states)
        if (live[q]) return true;
    return false;
}

std::optional<Best> exhaustive_best(const CharDfa& dfa, const dingo::TokenVocabulary& vocab,
                                    const dingo::ProbabilityBlock& block, StateId start) {
    Search s{dfa, vocab, block, token_live(dfa, vocab), std::vector<TokenId>(block.length()), std::nullopt};
    s.run(0, {start}, 1.0);
    return s.best;
}

std::vector<std::string> all_strings(const std::string& alphabet, std::size_t max_len) {
    std::vector<std::string> out{""};
    std::size_t begin = 0;
    for (std::size_t len = 1; len <= max_len; ++len) {
        const std::size_t end = out.size();
        for (std::size_t i = begin; i < end; ++i)
            for (char c : alphabet) out.push_back(out[i] + c);
        begin = end;
    }
    return out;
}

} // namespace oracle
