#pragma once

#include <functional>
#include <span>
#include <vector>

#include "dingo/dp_decoder.hpp"
#include "dingo/probability_block.hpp"
#include "dingo/token_automaton.hpp"

namespace dingo {

struct GenerationConfig {
    std::size_t block_length = 1;  // d
    std::size_t steps = 1;         // T, diffusion steps per block
    std::size_t blocks = 1;        // k
};

/// Produces the distribution for block `block_index` given every token
/// committed so far.
using BlockSource = std::function<ProbabilityBlock(std::size_t block_index, std::span<const TokenId> committed)>;

struct GenerationState {
    std::vector<TokenId> committed;  // realized tokens, no mask ids
    StateId current_state = kNoState;
    std::size_t block_index = 0;
    GenerationConfig config;
};

struct GenerationResult {
    bool success = false;
    std::vector<TokenId> tokens;      // realized output (partial on failure)
    std::vector<TokenId> raw_tokens;  // decoder output, may contain the mask id
    StateId end_state = kNoState;
    double log_prob = 0.0;
    std::size_t failed_block = 0;     // meaningful when !success
    GenerationState state;
};

/// Decodes `config.blocks` blocks in order, carrying the automaton state
/// across block boundaries. Stops at the first block without a valid prefix.
GenerationResult run_blocks(const BlockSource& source, const TokenAutomaton& ta, const GenerationConfig& config,
                            const DecodeOptions& options = {});

/// Same, starting from an existing state.
GenerationResult run_blocks(const BlockSource& source, const TokenAutomaton& ta, GenerationState state,
                            const DecodeOptions& options = {});

/// State reached by `committed` from the start state. Throws DeadPrefix when
/// the replay dies or ends in a non-live state, InvalidToken for mask ids.
StateId resume_state(std::span<const TokenId> committed, const TokenAutomaton& ta);

} // namespace dingo
