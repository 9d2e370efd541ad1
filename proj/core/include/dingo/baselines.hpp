#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dingo/probability_block.hpp"
#include "dingo/token_automaton.hpp"

namespace dingo {

/// Position-wise argmax, smallest token id on ties.
std::vector<TokenId> unconstrained_decode(const ProbabilityBlock& block);

/// Sum of log v_i[t_i]; -inf when any factor is zero.
double sequence_log_prob(const ProbabilityBlock& block, std::span<const TokenId> tokens);

/// States reachable from `start` after feeding `tokens` through the combined
/// (mask-aware) transition.
StateSet replay(const TokenAutomaton& ta, std::span<const TokenId> tokens, StateId start);

/// True when some mask substitution of `tokens` reaches a live state.
bool is_valid_prefix(const TokenAutomaton& ta, std::span<const TokenId> tokens, StateId start);

struct GreedyResult {
    bool failed = false;
    std::size_t failed_position = 0;  // first position with no valid token
    std::vector<TokenId> tokens;      // committed tokens, in block order
    double log_prob = 0.0;
    // Some committed token had probability zero (the mask excluded every
    // positive-probability token at that position).
    bool zero_probability = false;
};

/// Commits one position at a time in `order` (0-based positions). A token is
/// valid when, treating every uncommitted position as the mask, some path
/// consistent with all commitments ends in a live state after the block.
GreedyResult greedy_constrained_decode(const TokenAutomaton& ta, const ProbabilityBlock& block, StateId start,
                                       std::span<const std::size_t> order);

/// Left-to-right order.
GreedyResult greedy_constrained_decode(const TokenAutomaton& ta, const ProbabilityBlock& block, StateId start);

struct OracleResult {
    struct Best {
        std::vector<TokenId> tokens;
        double probability;
    };
    std::optional<Best> best;
    std::uint64_t enumerated = 0;  // complete sequences examined
};

/// Exhaustive search over V^d for the most probable sequence with a valid
/// mask substitution. Zero-probability prefixes are pruned. Ties keep the
/// lexicographically smallest sequence. Throws TooLarge when |V|^d > limit.
OracleResult brute_force_oracle(const TokenAutomaton& ta, const ProbabilityBlock& block, StateId start,
                                std::uint64_t limit = 10'000'000);

} // namespace dingo
