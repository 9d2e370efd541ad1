#pragma once

#include <span>
#include <variant>
#include <vector>

#include "dingo/probability_block.hpp"
#include "dingo/token_automaton.hpp"
#include "dingo/types.hpp"

namespace dingo {

// Best single-token transition between two states at one position.
struct CostEdge {
    StateId from;
    StateId to;
    double prob;      // max v_i[t] over tokens realizing from -> to
    double log_prob;  // log(prob)
    TokenId token;    // argmax token, smallest id on ties
};

/// Per-position transition costs. Only edges with positive probability are
/// stored; every other state pair has cost 0.
class CostTables {
public:
    CostTables(std::size_t num_states, std::vector<std::vector<CostEdge>> positions)
        : num_states_(num_states), positions_(std::move(positions)) {}

    std::size_t length() const { return positions_.size(); }
    std::size_t num_states() const { return num_states_; }
    // Sorted by (from, to).
    std::span<const CostEdge> edges(std::size_t position) const { return positions_[position]; }

    // Cost and argmax token of from -> to at `position`; {0, kNoToken} if absent.
    std::pair<double, TokenId> cost(std::size_t position, StateId from, StateId to) const;

private:
    std::size_t num_states_;
    std::vector<std::vector<CostEdge>> positions_;
};

struct DecodeOptions {
    // Worker threads for the per-position cost tables; results do not depend on it.
    unsigned threads = 1;
};

/// Best log-probability of reaching each state after i tokens, with parent
/// edges for backtracking. Position 0 is the initialization row.
class DpTable {
public:
    struct Parent {
        StateId prev = kNoState;
        TokenId token = kNoToken;
    };

    DpTable(std::size_t length, std::size_t num_states);

    std::size_t length() const { return length_; }
    std::size_t num_states() const { return num_states_; }
    double& score(std::size_t i, StateId q) { return scores_[i * num_states_ + q]; }
    double score(std::size_t i, StateId q) const { return scores_[i * num_states_ + q]; }
    Parent& parent(std::size_t i, StateId q) { return parents_[i * num_states_ + q]; }
    const Parent& parent(std::size_t i, StateId q) const { return parents_[i * num_states_ + q]; }

private:
    std::size_t length_;
    std::size_t num_states_;
    std::vector<double> scores_;
    std::vector<Parent> parents_;
};

struct OptimalDecode {
    std::vector<TokenId> tokens;  // may contain the mask id
    std::vector<StateId> states;  // tokens.size() + 1 states along the chosen path
    StateId end_state = kNoState;
    double log_prob = 0.0;
};

struct NoValidPrefix {
    StateId witness_state = kNoState;
};

class DecodeOutcome {
public:
    DecodeOutcome(OptimalDecode optimal) : result_(std::move(optimal)) {}
    DecodeOutcome(NoValidPrefix none) : result_(none) {}

    bool has_value() const { return std::holds_alternative<OptimalDecode>(result_); }
    explicit operator bool() const { return has_value(); }
    const OptimalDecode& optimal() const { return std::get<OptimalDecode>(result_); }
    const OptimalDecode* operator->() const { return &optimal(); }
    const NoValidPrefix& failure() const { return std::get<NoValidPrefix>(result_); }

private:
    std::variant<OptimalDecode, NoValidPrefix> result_;
};

CostTables build_cost_tables(const TokenAutomaton& ta, const ProbabilityBlock& block, const DecodeOptions& options = {});

DpTable dp_forward(const CostTables& tables, StateId start_state);

DecodeOutcome reconstruct_path(const DpTable& table, const StateSet& live);

/// Maximum-probability token sequence for the block whose mask substitutions
/// can reach a live state from `start_state`.
DecodeOutcome decode_block(const TokenAutomaton& ta, const ProbabilityBlock& block, StateId start_state,
                           const DecodeOptions& options = {});

/// Replaces each mask token in `decode` by the smallest token realizing the
/// corresponding step of the recorded state path.
std::vector<TokenId> realize_masks(const TokenAutomaton& ta, const OptimalDecode& decode);

} // namespace dingo
