#include "dingo/semi_autoregressive.hpp"

#include <exception>
#include <string>

#include "dingo/error.hpp"

namespace dingo {

GenerationResult run_blocks(const BlockSource& source, const TokenAutomaton& ta, const GenerationConfig& config,
                            const DecodeOptions& options) {
    GenerationState state;
    state.current_state = ta.start();
    state.config = config;
    return run_blocks(source, ta, std::move(state), options);
}

GenerationResult run_blocks(const BlockSource& source, const TokenAutomaton& ta, GenerationState state,
                            const DecodeOptions& options) {
    const GenerationConfig& config = state.config;
    if (config.block_length == 0) throw InvalidArgument("block length must be positive");
    if (state.current_state >= ta.num_states()) throw InvalidArgument("start state out of range");

    GenerationResult result;
    result.tokens = state.committed;
    result.raw_tokens = state.committed;
    result.end_state = state.current_state;
    if (!ta.is_live(state.current_state)) {
        result.failed_block = state.block_index;
        result.state = std::move(state);
        return result;
    }

    for (; state.block_index < config.blocks; ++state.block_index) {
        ProbabilityBlock block;
        try {
            block = source(state.block_index, state.committed);
        } catch (const std::exception& e) {
            throw BlockSourceError("block " + std::to_string(state.block_index) + ": " + e.what());
        } catch (...) {
            throw BlockSourceError("block " + std::to_string(state.block_index) + ": unknown failure");
        }
        if (block.length() != config.block_length)
            throw DimensionMismatch("block " + std::to_string(state.block_index) + " has " +
                                    std::to_string(block.length()) + " rows, expected " +
                                    std::to_string(config.block_length));

        const DecodeOutcome outcome = decode_block(ta, block, state.current_state, options);
        if (!outcome || !ta.is_live(outcome->end_state)) {
            result.failed_block = state.block_index;
            result.state = std::move(state);
            return result;
        }
        const std::vector<TokenId> realized = realize_masks(ta, outcome.optimal());
        state.committed.insert(state.committed.end(), realized.begin(), realized.end());
        result.tokens.insert(result.tokens.end(), realized.begin(), realized.end());
        result.raw_tokens.insert(result.raw_tokens.end(), outcome->tokens.begin(), outcome->tokens.end());
        result.log_prob += outcome->log_prob;
        state.current_state = outcome->end_state;
        result.end_state = state.current_state;
    }
    result.success = true;
    result.state = std::move(state);
    return result;
}

StateId resume_state(std::span<const TokenId> committed, const TokenAutomaton& ta) {
    StateId q = ta.start();
    for (std::size_t i = 0; i < committed.size(); ++i) {
        if (committed[i] == ta.mask_id()) throw InvalidToken("mask token at position " + std::to_string(i));
        const auto next = ta.token_transition(q, committed[i]);
        if (!next) throw DeadPrefix("prefix dies at position " + std::to_string(i));
        q = *next;
    }
    if (!ta.is_live(q)) throw DeadPrefix("prefix ends in a non-live state");
    return q;
}

} // namespace dingo
