#include "dingo/diffusion_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "dingo/baselines.hpp"
#include "dingo/dp_decoder.hpp"
#include "dingo/error.hpp"
#include "dingo/regex_automaton.hpp"

namespace dingo {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = splitmix(seed);
    for (std::uint64_t p : parts) h = splitmix(h ^ p);
    return h;
}

float row_max(std::span<const float> row) { return *std::max_element(row.begin(), row.end()); }

double row_entropy(std::span<const float> row) {
    double h = 0.0;
    for (float v : row)
        if (v > 0.0f) h -= static_cast<double>(v) * std::log(static_cast<double>(v));
    return h;
}

} // namespace

std::size_t Schedule::masked_count(std::size_t step) const {
    if (steps == 0) throw InvalidArgument("schedule needs at least one step");
    if (step > steps) throw InvalidArgument("step exceeds the number of steps");
    return block_length * (steps - step) / steps;
}

SyntheticDistribution::SyntheticDistribution(std::uint64_t seed, std::size_t vocab_size, TokenId mask_id,
                                             double temperature)
    : seed_(seed), vocab_size_(vocab_size), mask_id_(mask_id), temperature_(temperature) {
    if (vocab_size < 2) throw InvalidArgument("vocabulary needs a token besides the mask");
    if (mask_id >= vocab_size) throw InvalidToken("mask id out of range");
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw InvalidArgument("temperature must be positive");
}

void SyntheticDistribution::fill_row(std::span<float> row, std::size_t block, std::size_t step,
                                     std::size_t position) const {
    std::mt19937_64 rng(derive(seed_, {block, step, position}));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> logits(vocab_size_, 0.0);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < vocab_size_; ++t) {
        if (t == mask_id_) continue;
        logits[t] = normal(rng) / temperature_;
        top = std::max(top, logits[t]);
    }
    double sum = 0.0;
    for (std::size_t t = 0; t < vocab_size_; ++t) {
        if (t == mask_id_) continue;
        logits[t] = std::exp(logits[t] - top);
        sum += logits[t];
    }
    for (std::size_t t = 0; t < vocab_size_; ++t) row[t] = t == mask_id_ ? 0.0f : static_cast<float>(logits[t] / sum);
}

ProbabilityBlock SyntheticDistribution::operator()(std::size_t block, std::size_t step,
                                                   std::span<const TokenId> current) const {
    ProbabilityBlock out(current.size(), vocab_size_);
    for (std::size_t i = 0; i < current.size(); ++i) {
        if (current[i] != mask_id_) {
            out.set_one_hot(i, current[i]);
        } else {
            fill_row(out.row(i), block, step, i);
        }
    }
    return out;
}

std::vector<std::size_t> remask_positions(const ProbabilityBlock& block, std::size_t step, std::size_t steps,
                                          const RemaskStrategy& strategy, std::span<const std::uint8_t> committed) {
    const std::size_t d = block.length();
    if (step == 0) throw InvalidArgument("steps are numbered from 1");
    if (!committed.empty() && committed.size() != d) throw DimensionMismatch("committed flags differ from block length");
    const std::size_t count = Schedule{d, steps}.masked_count(step);

    auto is_committed = [&](std::size_t i) { return !committed.empty() && committed[i]; };
    std::vector<std::size_t> fresh, old;
    for (std::size_t i = 0; i < d; ++i) (is_committed(i) ? old : fresh).push_back(i);

    // Lower key = masked first.
    std::vector<double> key(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        switch (strategy.kind) {
        case RemaskKind::TopTokenProbability:
        case RemaskKind::Random:
            key[i] = row_max(block.row(i));
            break;
        case RemaskKind::Entropy:
            key[i] = -row_entropy(block.row(i));
            break;
        }
    }
    auto by_key = [&](std::size_t a, std::size_t b) { return key[a] < key[b] || (key[a] == key[b] && a < b); };

    if (strategy.kind == RemaskKind::Random) {
        std::mt19937_64 rng(derive(strategy.seed, {step}));
        for (std::size_t i = fresh.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng() % i);
            std::swap(fresh[i - 1], fresh[j]);
        }
    } else {
        std::sort(fresh.begin(), fresh.end(), by_key);
    }
    std::sort(old.begin(), old.end(), by_key);

    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fresh.size() && out.size() < count; ++i) out.push_back(fresh[i]);
    for (std::size_t i = 0; i < old.size() && out.size() < count; ++i) out.push_back(old[i]);
    std::sort(out.begin(), out.end());
    return out;
}

Transcript simulate_generation(const TokenAutomaton& ta, const SimulationConfig& config,
                               const DistributionSource& source) {
    const GenerationConfig& gen = config.generation;
    const std::size_t d = gen.block_length;
    const std::size_t T = gen.steps;
    if (d == 0 || T == 0) throw InvalidArgument("block length and steps must be positive");
    if (T > d) throw InvalidArgument("steps must not exceed the block length");
    const TokenId mask = ta.mask_id();

    const SyntheticDistribution synthetic(config.seed, ta.vocab_size(), mask, config.temperature);
    DecodeOptions decode_options;
    decode_options.threads = config.threads;

    Transcript transcript;
    transcript.mode = config.mode;
    StateId q_curr = ta.start();
    bool alive = ta.is_live(q_curr);
    double total = 0.0;
    bool total_known = true;

    for (std::size_t b = 0; b < gen.blocks; ++b) {
        std::vector<TokenId> current(d, mask);
        std::vector<std::uint8_t> committed_flags(d, 0);
        RemaskStrategy strategy = config.strategy;
        strategy.seed = derive(config.strategy.seed, {b});
        std::optional<double> block_log_prob;
        const DecodeOutcome* last_outcome = nullptr;
        std::optional<DecodeOutcome> outcome;

        for (std::size_t step = 1; step <= T; ++step) {
            ProbabilityBlock block = source ? source(b, step, transcript.tokens, current) : synthetic(b, step, current);
            if (block.length() != d || block.vocab_size() != ta.vocab_size())
                throw DimensionMismatch("distribution source returned a block of the wrong shape");
            for (std::size_t i = 0; i < d; ++i)
                if (committed_flags[i]) block.set_one_hot(i, current[i]);

            const std::vector<std::size_t> masked = remask_positions(block, step, T, strategy, committed_flags);
            for (std::size_t p : masked) block.set_masked(p, mask);

            StepRecord record;
            record.block = b;
            record.step = step;
            record.masked = masked;
            bool failed = false;

            switch (config.mode) {
            case DecodeMode::Dingo: {
                outcome = decode_block(ta, block, q_curr, decode_options);
                if (*outcome) {
                    record.decoded = (*outcome)->tokens;
                    record.log_prob = (*outcome)->log_prob;
                } else {
                    failed = true;
                }
                break;
            }
            case DecodeMode::Greedy: {
                if (!alive) {
                    failed = true;
                    break;
                }
                std::vector<std::size_t> order(d);
                std::iota(order.begin(), order.end(), std::size_t{0});
                if (config.greedy_order == GreedyOrder::Confidence) {
                    std::vector<float> top(d);
                    for (std::size_t i = 0; i < d; ++i) top[i] = row_max(block.row(i));
                    std::stable_sort(order.begin(), order.end(),
                                     [&](std::size_t x, std::size_t y) { return top[x] > top[y]; });
                }
                GreedyResult g = greedy_constrained_decode(ta, block, q_curr, order);
                if (g.failed) {
                    failed = true;
                } else {
                    record.decoded = g.tokens;
                    if (std::isfinite(g.log_prob)) record.log_prob = g.log_prob;
                }
                break;
            }
            case DecodeMode::Unconstrained: {
                record.decoded = unconstrained_decode(block);
                const double lp = sequence_log_prob(block, record.decoded);
                if (std::isfinite(lp)) record.log_prob = lp;
                break;
            }
            }

            if (failed) {
                record.decoded = current;
                transcript.steps.push_back(std::move(record));
                transcript.failed_block = b;
                transcript.log_prob.reset();
                return transcript;
            }
            current = record.decoded;
            for (std::size_t i = 0; i < d; ++i) committed_flags[i] = current[i] != mask ? 1 : 0;
            block_log_prob = record.log_prob;
            transcript.steps.push_back(std::move(record));
        }

        if (config.mode == DecodeMode::Dingo) {
            last_outcome = &*outcome;
            current = realize_masks(ta, last_outcome->optimal());
            q_curr = last_outcome->optimal().end_state;
        } else if (alive) {
            for (TokenId t : current) {
                const auto next = t == mask ? std::nullopt : ta.token_transition(q_curr, t);
                if (!next) {
                    alive = false;
                    break;
                }
                q_curr = *next;
            }
            alive = alive && ta.is_live(q_curr);
        }
        transcript.tokens.insert(transcript.tokens.end(), current.begin(), current.end());
        if (block_log_prob) {
            total += *block_log_prob;
        } else {
            total_known = false;
        }
    }

    transcript.completed = true;
    if (total_known) transcript.log_prob = total;
    const bool unmasked = std::find(transcript.tokens.begin(), transcript.tokens.end(), mask) == transcript.tokens.end();
    transcript.valid = unmasked && is_valid_prefix(ta, transcript.tokens, ta.start());
    if (transcript.valid) transcript.end_state = resume_state(transcript.tokens, ta);
    return transcript;
}

Transcript simulate_generation(std::string_view regex, const TokenVocabulary& vocab, const SimulationConfig& config) {
    const CharDfa dfa = compile_regex(regex);
    const TokenAutomaton ta = TokenAutomaton::build(dfa, compute_live_states(dfa), vocab);
    return simulate_generation(ta, config);
}

std::string transcript_to_jsonl(const Transcript& transcript, const TokenVocabulary* vocab,
                                std::string_view mask_placeholder) {
    using nlohmann::json;
    auto number_or_null = [](const auto& opt) { return opt ? json(*opt) : json(nullptr); };
    std::string out;
    for (const auto& s : transcript.steps) {
        json rec = {{"block", s.block},
                    {"step", s.step},
                    {"masked", s.masked},
                    {"decoded", s.decoded},
                    {"log_prob", number_or_null(s.log_prob)}};
        out += rec.dump();
        out += '\n';
    }
    json summary = {{"summary", true},
                    {"mode", to_string(transcript.mode)},
                    {"completed", transcript.completed},
                    {"valid", transcript.valid},
                    {"tokens", transcript.tokens},
                    {"end_state", transcript.end_state == kNoState ? json(nullptr) : json(transcript.end_state)},
                    {"log_prob", number_or_null(transcript.log_prob)},
                    {"failed_block", number_or_null(transcript.failed_block)}};
    if (vocab) summary["text"] = vocab->render(transcript.tokens, mask_placeholder);
    out += summary.dump();
    out += '\n';
    return out;
}

std::string_view to_string(RemaskKind kind) {
    switch (kind) {
    case RemaskKind::Random: return "random";
    case RemaskKind::TopTokenProbability: return "topprob";
    case RemaskKind::Entropy: return "entropy";
    }
    return "?";
}

std::string_view to_string(DecodeMode mode) {
    switch (mode) {
    case DecodeMode::Dingo: return "dingo";
    case DecodeMode::Greedy: return "greedy";
    case DecodeMode::Unconstrained: return "unconstrained";
    }
    return "?";
}

} // namespace dingo
