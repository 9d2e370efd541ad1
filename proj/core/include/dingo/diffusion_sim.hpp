#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dingo/probability_block.hpp"
#include "dingo/semi_autoregressive.hpp"
#include "dingo/token_automaton.hpp"
#include "dingo/vocabulary.hpp"

namespace dingo {

enum class RemaskKind { Random, TopTokenProbability, Entropy };

struct RemaskStrategy {
    RemaskKind kind = RemaskKind::TopTokenProbability;
    std::uint64_t seed = 0;  // Random only
};

/// Number of masked positions after each diffusion step.
struct Schedule {
    std::size_t block_length;  // d
    std::size_t steps;         // T

    // floor(d * (T - step) / T) for 0 <= step <= T.
    std::size_t masked_count(std::size_t step) const;
};

/// Seeded stand-in for the model: every uncommitted row is a softmax of
/// independent normal logits divided by `temperature`; the mask token gets
/// zero probability. Rows are a pure function of (seed, block, step, position).
class SyntheticDistribution {
public:
    SyntheticDistribution(std::uint64_t seed, std::size_t vocab_size, TokenId mask_id, double temperature = 1.0);

    // `current` holds the block's tokens so far, the mask id where uncommitted.
    // Committed positions come back as one-hot rows.
    ProbabilityBlock operator()(std::size_t block, std::size_t step, std::span<const TokenId> current) const;

    void fill_row(std::span<float> row, std::size_t block, std::size_t step, std::size_t position) const;

private:
    std::uint64_t seed_;
    std::size_t vocab_size_;
    TokenId mask_id_;
    double temperature_;
};

/// Positions to mask after `step` of `steps`, ascending. Exactly
/// Schedule{d, steps}.masked_count(step) positions are returned. Positions not
/// flagged in `committed` are taken first; within each group the order is the
/// strategy's (smallest row max, largest entropy, or seeded shuffle), ties to
/// the smaller index. An empty `committed` means nothing is committed.
std::vector<std::size_t> remask_positions(const ProbabilityBlock& block, std::size_t step, std::size_t steps,
                                          const RemaskStrategy& strategy,
                                          std::span<const std::uint8_t> committed = {});

enum class DecodeMode { Dingo, Greedy, Unconstrained };

enum class GreedyOrder {
    LeftToRight,
    Confidence,  // largest row max first
};

struct SimulationConfig {
    GenerationConfig generation;
    RemaskStrategy strategy;
    DecodeMode mode = DecodeMode::Dingo;
    GreedyOrder greedy_order = GreedyOrder::LeftToRight;
    std::uint64_t seed = 0;
    double temperature = 1.0;
    unsigned threads = 1;
};

/// Distribution for (block, step) given the tokens of earlier blocks and the
/// current block contents. Rows of committed positions are overwritten with
/// one-hot rows by the simulator.
using DistributionSource = std::function<ProbabilityBlock(std::size_t block, std::size_t step,
                                                          std::span<const TokenId> prefix,
                                                          std::span<const TokenId> current)>;

struct StepRecord {
    std::size_t block = 0;
    std::size_t step = 0;
    std::vector<std::size_t> masked;
    std::vector<TokenId> decoded;  // block contents after the step
    std::optional<double> log_prob;  // none when the decoder failed or the string has probability 0
};

struct Transcript {
    DecodeMode mode = DecodeMode::Dingo;
    std::vector<StepRecord> steps;
    std::vector<TokenId> tokens;  // final output of all finished blocks
    bool completed = false;       // every block ran to its last step
    bool valid = false;           // tokens replay to a live state
    StateId end_state = kNoState;
    std::optional<double> log_prob;
    std::optional<std::size_t> failed_block;
};

Transcript simulate_generation(const TokenAutomaton& ta, const SimulationConfig& config,
                               const DistributionSource& source = {});

Transcript simulate_generation(std::string_view regex, const TokenVocabulary& vocab, const SimulationConfig& config);

/// One JSON object per step followed by a summary line.
std::string transcript_to_jsonl(const Transcript& transcript, const TokenVocabulary* vocab = nullptr,
                                std::string_view mask_placeholder = "\xE2\x90\xA0M");

std::string_view to_string(RemaskKind kind);
std::string_view to_string(DecodeMode mode);

} // namespace dingo
