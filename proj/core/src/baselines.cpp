#include "dingo/baselines.hpp"

#include <cmath>
#include <limits>

#include "dingo/error.hpp"

namespace dingo {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_block(const TokenAutomaton& ta, const ProbabilityBlock& block) {
    if (block.vocab_size() != ta.vocab_size())
        throw DimensionMismatch("block rows have " + std::to_string(block.vocab_size()) + " entries, vocabulary has " +
                                std::to_string(ta.vocab_size()));
    block.check_non_negative();
}

StateSet step_set(const TokenAutomaton& ta, const StateSet& from, TokenId t) {
    StateSet out(ta.num_states());
    for (StateId q : from.to_vector())
        for (StateId s : ta.combined_transition(q, t)) out.insert(s);
    return out;
}

} // namespace

std::vector<TokenId> unconstrained_decode(const ProbabilityBlock& block) {
    std::vector<TokenId> out(block.length(), 0);
    for (std::size_t i = 0; i < block.length(); ++i) {
        auto row = block.row(i);
        TokenId best = 0;
        for (TokenId t = 1; t < row.size(); ++t)
            if (row[t] > row[best]) best = t;
        out[i] = best;
    }
    return out;
}

double sequence_log_prob(const ProbabilityBlock& block, std::span<const TokenId> tokens) {
    if (tokens.size() != block.length()) throw DimensionMismatch("sequence length differs from block length");
    double sum = 0.0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const double p = block.at(i, tokens[i]);
        if (p <= 0.0) return kNegInf;
        sum += std::log(p);
    }
    return sum;
}

StateSet replay(const TokenAutomaton& ta, std::span<const TokenId> tokens, StateId start) {
    StateSet cur(ta.num_states());
    cur.insert(start);
    for (TokenId t : tokens) cur = step_set(ta, cur, t);
    return cur;
}

bool is_valid_prefix(const TokenAutomaton& ta, std::span<const TokenId> tokens, StateId start) {
    return replay(ta, tokens, start).intersects(ta.live());
}

GreedyResult greedy_constrained_decode(const TokenAutomaton& ta, const ProbabilityBlock& block, StateId start,
                                       std::span<const std::size_t> order) {
    check_block(ta, block);
    const std::size_t d = block.length();
    const std::size_t n = ta.num_states();
    if (order.size() != d) throw InvalidOrder("order must list every block position exactly once");
    std::vector<char> seen(d, 0);
    for (std::size_t p : order) {
        if (p >= d || seen[p]) throw InvalidOrder("order must be a permutation of the block positions");
        seen[p] = 1;
    }

    const TokenId mask = ta.mask_id();
    std::vector<TokenId> committed(d, mask);
    GreedyResult result;

    for (std::size_t p : order) {
        // forward[j]: states after j tokens; backward[j]: states at j that can
        // still end live after the block.
        std::vector<StateSet> forward(d + 1, StateSet(n));
        forward[0].insert(start);
        for (std::size_t j = 0; j < p; ++j) forward[j + 1] = step_set(ta, forward[j], committed[j]);
        std::vector<StateSet> backward(d + 1, StateSet(n));
        backward[d] = ta.live();
        for (std::size_t j = d; j > p + 1; --j) {
            for (StateId q = 0; q < n; ++q) {
                for (StateId s : ta.combined_transition(q, committed[j - 1])) {
                    if (backward[j].contains(s)) {
                        backward[j - 1].insert(q);
                        break;
                    }
                }
            }
        }

        const StateSet& from = forward[p];
        const StateSet& to = backward[p + 1];
        std::vector<char> class_ok(ta.num_token_classes(), 0);
        bool mask_ok = false;
        for (StateId q : from.to_vector()) {
            for (const auto& e : ta.class_edges_from(q))
                if (to.contains(e.target)) class_ok[e.token_class] = 1;
            for (StateId s : ta.mask_closure(q))
                if (to.contains(s)) mask_ok = true;
        }

        auto row = block.row(p);
        const auto classes = ta.token_classes();
        TokenId best = kNoToken;
        for (TokenId t = 0; t < row.size(); ++t) {
            const bool ok = t == mask ? mask_ok : (classes[t] != TokenAutomaton::kNoClass && class_ok[classes[t]]);
            if (ok && (best == kNoToken || row[t] > row[best])) best = t;
        }
        if (best == kNoToken) {
            result.failed = true;
            result.failed_position = p;
            result.tokens = committed;
            result.log_prob = kNegInf;
            return result;
        }
        if (row[best] <= 0.0f) result.zero_probability = true;
        committed[p] = best;
    }
    result.tokens = committed;
    result.log_prob = sequence_log_prob(block, committed);
    return result;
}

GreedyResult greedy_constrained_decode(const TokenAutomaton& ta, const ProbabilityBlock& block, StateId start) {
    std::vector<std::size_t> order(block.length());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    return greedy_constrained_decode(ta, block, start, order);
}

namespace {

class Enumerator {
public:
    Enumerator(const TokenAutomaton& ta, const ProbabilityBlock& block) : ta_(ta), block_(block) {}

    OracleResult run(StateId start) {
        current_.resize(block_.length());
        StateSet init(ta_.num_states());
        init.insert(start);
        visit(0, init, 1.0);
        return std::move(result_);
    }

private:
    void visit(std::size_t i, const StateSet& states, double prob) {
        if (i == block_.length()) {
            ++result_.enumerated;
            if (!states.intersects(ta_.live())) return;
            if (!result_.best || prob > result_.best->probability) result_.best = OracleResult::Best{current_, prob};
            return;
        }
        for (TokenId t = 0; t < block_.vocab_size(); ++t) {
            const double p = block_.at(i, t);
            if (p <= 0.0) continue;
            StateSet next = step_set(ta_, states, t);
            if (next.empty()) continue;
            current_[i] = t;
            visit(i + 1, next, prob * p);
        }
    }

    const TokenAutomaton& ta_;
    const ProbabilityBlock& block_;
    std::vector<TokenId> current_;
    OracleResult result_;
};

} // namespace

OracleResult brute_force_oracle(const TokenAutomaton& ta, const ProbabilityBlock& block, StateId start,
                                std::uint64_t limit) {
    check_block(ta, block);
    if (start >= ta.num_states()) throw InvalidArgument("start state out of range");
    double space = 1.0;
    for (std::size_t i = 0; i < block.length(); ++i) {
        space *= static_cast<double>(block.vocab_size());
        if (space > static_cast<double>(limit))
            throw TooLarge("search space |V|^d exceeds " + std::to_string(limit));
    }
    return Enumerator(ta, block).run(start);
}

} // namespace dingo
