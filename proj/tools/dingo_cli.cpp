// dingo: compile regexes to token automata and run constrained block decoding.
//
// Exit codes: 0 success, 2 input error, 3 no valid prefix.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "dingo/baselines.hpp"
#include "dingo/diffusion_sim.hpp"
#include "dingo/dp_decoder.hpp"
#include "dingo/error.hpp"
#include "dingo/io.hpp"
#include "dingo/regex_automaton.hpp"
#include "dingo/semi_autoregressive.hpp"
#include "dingo/token_automaton.hpp"
#include "random_instance.hpp"

namespace {

using nlohmann::json;
using namespace dingo;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNoValidPrefix = 3;

struct Options {
    std::string regex;
    std::string regex_file;
    std::string automaton;
    std::string vocab;
    std::string mask_token = "<|mask|>";
    std::string probs;
    std::string out;
    std::string format = "binary";
    std::string mask_placeholder = "\xE2\x90\xA0M";
    std::optional<StateId> start_state;
    std::size_t blocks = 1;
    std::size_t steps = 1;
    std::size_t block_length = 32;
    std::string strategy = "topprob";
    std::string mode = "dingo";
    std::string greedy_order = "ltr";
    std::uint64_t seed = 0;
    double temperature = 1.0;
    unsigned threads = 1;
    std::string order;
    std::size_t random = 0;
    std::vector<std::size_t> lengths{16, 32, 64, 128};
    std::size_t repeat = 5;
};

json json_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string load_regex(const Options& o) {
    if (!o.regex_file.empty()) {
        std::string text = io::read_text(o.regex_file);
        if (!text.empty() && text.back() == '\n') text.pop_back();
        if (!text.empty() && text.back() == '\r') text.pop_back();
        return text;
    }
    return o.regex;
}

struct Loaded {
    std::unique_ptr<TokenVocabulary> vocab;
    std::optional<CharDfa> dfa;
    std::optional<TokenAutomaton> ta;
    double compile_seconds = 0.0;
};

Loaded load_automaton(const Options& o) {
    Loaded out;
    if (o.vocab.empty()) throw InvalidArgument("--vocab is required");
    out.vocab = std::make_unique<TokenVocabulary>(io::load_vocabulary(o.vocab, o.mask_token));
    spdlog::info("vocabulary: {} tokens, mask id {}", out.vocab->size(), out.vocab->mask_id());
    if (!o.automaton.empty()) {
        out.ta = TokenAutomaton::deserialize(io::read_bytes(o.automaton), *out.vocab);
        return out;
    }
    const auto t0 = std::chrono::steady_clock::now();
    out.dfa = compile_regex(load_regex(o));
    spdlog::info("character automaton: {} states, {} classes", out.dfa->num_states(), out.dfa->num_classes());
    TokenBuildOptions build;
    build.threads = o.threads;
    out.ta = TokenAutomaton::build(*out.dfa, compute_live_states(*out.dfa), *out.vocab, build);
    out.compile_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    spdlog::info("token automaton built in {:.3f}s", out.ta->build_seconds());
    return out;
}

void emit(const Options& o, const std::string& payload) {
    if (o.out.empty()) {
        std::cout << payload;
        if (payload.empty() || payload.back() != '\n') std::cout << '\n';
    } else {
        io::write_text(o.out, payload);
    }
}

json decode_json(const TokenVocabulary& vocab, const std::vector<TokenId>& raw, const std::vector<TokenId>& realized,
                 StateId end_state, double log_prob, const std::string& placeholder) {
    return json{{"tokens", raw},
                {"realized", realized},
                {"text", vocab.render(raw, placeholder)},
                {"end_state", end_state},
                {"log_prob", json_or_null(log_prob)}};
}

int cmd_compile(const Options& o) {
    Loaded l = load_automaton(o);
    const TokenAutomaton& ta = *l.ta;
    json stats = {{"states", ta.num_states()},
                  {"live_states", ta.live().count()},
                  {"token_edges", ta.num_token_edges()},
                  {"mask_edges", ta.num_mask_edges()},
                  {"token_classes", ta.num_token_classes()},
                  {"vocab_size", ta.vocab_size()},
                  {"build_seconds", ta.build_seconds()},
                  {"total_seconds", l.compile_seconds}};
    std::ostringstream fp;
    fp << std::hex << ta.vocab_hash();
    stats["vocab_fingerprint"] = fp.str();
    if (!o.out.empty()) {
        if (o.format == "json") {
            if (!l.dfa) throw InvalidArgument("--format json needs --regex or --regex-file");
            io::write_text(o.out, io::dfa_to_json(*l.dfa));
        } else {
            io::write_bytes(o.out, ta.serialize());
        }
        stats["out"] = o.out;
    }
    std::cout << stats.dump() << '\n';
    return kExitOk;
}

int cmd_decode(const Options& o) {
    Loaded l = load_automaton(o);
    const TokenAutomaton& ta = *l.ta;
    const ProbabilityBlock all = io::load_block(o.probs);
    if (o.blocks == 0 || all.length() % o.blocks != 0)
        throw DimensionMismatch("block rows (" + std::to_string(all.length()) + ") are not divisible by --blocks");
    const std::size_t d = all.length() / o.blocks;

    GenerationState state;
    state.config = {d, 1, o.blocks};
    state.current_state = o.start_state.value_or(ta.start());
    if (state.current_state >= ta.num_states()) throw InvalidArgument("--start-state out of range");
    BlockSource source = [&](std::size_t i, std::span<const TokenId>) { return all.slice(i * d, d); };
    DecodeOptions opts;
    opts.threads = o.threads;
    const GenerationResult r = run_blocks(source, ta, std::move(state), opts);
    if (!r.success) {
        json err = {{"error", "no_valid_prefix"},
                    {"failed_block", r.failed_block},
                    {"witness_state", r.end_state},
                    {"partial", r.tokens},
                    {"text", l.vocab->render(r.tokens, o.mask_placeholder)}};
        emit(o, err.dump());
        return kExitNoValidPrefix;
    }
    emit(o, decode_json(*l.vocab, r.raw_tokens, r.tokens, r.end_state, r.log_prob, o.mask_placeholder).dump());
    return kExitOk;
}

RemaskKind parse_strategy(const std::string& s) {
    if (s == "random") return RemaskKind::Random;
    if (s == "entropy") return RemaskKind::Entropy;
    return RemaskKind::TopTokenProbability;
}

DecodeMode parse_mode(const std::string& s) {
    if (s == "greedy") return DecodeMode::Greedy;
    if (s == "unconstrained") return DecodeMode::Unconstrained;
    return DecodeMode::Dingo;
}

int cmd_simulate(const Options& o) {
    Loaded l = load_automaton(o);
    SimulationConfig config;
    config.generation = {o.block_length, o.steps, o.blocks};
    config.strategy = {parse_strategy(o.strategy), o.seed};
    config.mode = parse_mode(o.mode);
    config.greedy_order = o.greedy_order == "confidence" ? GreedyOrder::Confidence : GreedyOrder::LeftToRight;
    config.seed = o.seed;
    config.temperature = o.temperature;
    config.threads = o.threads;
    const Transcript t = simulate_generation(*l.ta, config);
    spdlog::info("simulation finished: completed={} valid={}", t.completed, t.valid);
    emit(o, transcript_to_jsonl(t, l.vocab.get(), o.mask_placeholder));
    return config.mode == DecodeMode::Dingo && !t.completed ? kExitNoValidPrefix : kExitOk;
}

json oracle_compare(const TokenAutomaton& ta, const ProbabilityBlock& block, StateId start, bool& agree) {
    const OracleResult oracle = brute_force_oracle(ta, block, start);
    const DecodeOutcome dp = decode_block(ta, block, start);
    json out;
    out["enumerated"] = oracle.enumerated;
    if (oracle.best) {
        out["oracle"] = {{"tokens", oracle.best->tokens}, {"probability", oracle.best->probability}};
    } else {
        out["oracle"] = nullptr;
    }
    if (dp) {
        out["dingo"] = {{"tokens", dp->tokens}, {"log_prob", dp->log_prob}, {"end_state", dp->end_state}};
    } else {
        out["dingo"] = nullptr;
    }
    agree = oracle.best.has_value() == dp.has_value();
    if (agree && dp) {
        const double ref = std::log(oracle.best->probability);
        agree = std::abs(dp->log_prob - ref) <= 1e-10 * std::max(1.0, std::abs(ref));
    }
    out["agree"] = agree;
    return out;
}

int cmd_oracle(const Options& o) {
    if (o.random > 0) {
        std::mt19937_64 rng(o.seed);
        std::size_t disagreements = 0;
        std::size_t none = 0;
        for (std::size_t i = 0; i < o.random; ++i) {
            gen::Instance inst = gen::random_instance(rng);
            bool agree = false;
            const json rec = oracle_compare(inst.ta, inst.block, inst.start, agree);
            if (!agree) {
                ++disagreements;
                spdlog::error("instance {} disagrees: {}", i, rec.dump());
            }
            if (rec["dingo"].is_null()) ++none;
        }
        emit(o, json{{"instances", o.random}, {"disagreements", disagreements}, {"no_valid_prefix", none}}.dump());
        return disagreements == 0 ? kExitOk : 1;
    }
    Loaded l = load_automaton(o);
    const ProbabilityBlock block = io::load_block(o.probs);
    bool agree = false;
    emit(o, oracle_compare(*l.ta, block, o.start_state.value_or(l.ta->start()), agree).dump());
    return kExitOk;
}

int cmd_baseline(const Options& o) {
    Loaded l = load_automaton(o);
    const TokenAutomaton& ta = *l.ta;
    const ProbabilityBlock block = io::load_block(o.probs);
    const StateId start = o.start_state.value_or(ta.start());

    std::vector<std::size_t> order;
    if (o.order.empty()) {
        for (std::size_t i = 0; i < block.length(); ++i) order.push_back(i);
    } else {
        std::stringstream ss(o.order);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                order.push_back(std::stoul(item));
            } catch (const std::exception&) {
                throw InvalidOrder("bad position '" + item + "' in --order");
            }
        }
    }

    json out;
    const auto plain = unconstrained_decode(block);
    out["unconstrained"] = {{"tokens", plain},
                            {"text", l.vocab->render(plain, o.mask_placeholder)},
                            {"log_prob", json_or_null(sequence_log_prob(block, plain))},
                            {"valid", is_valid_prefix(ta, plain, start)}};
    const GreedyResult g = greedy_constrained_decode(ta, block, start, order);
    out["greedy"] = {{"failed", g.failed},
                     {"tokens", g.tokens},
                     {"text", l.vocab->render(g.tokens, o.mask_placeholder)},
                     {"log_prob", json_or_null(g.log_prob)},
                     {"zero_probability", g.zero_probability}};
    if (g.failed) out["greedy"]["failed_position"] = g.failed_position;
    const DecodeOutcome dp = decode_block(ta, block, start);
    if (dp) {
        out["dingo"] = decode_json(*l.vocab, dp->tokens, realize_masks(ta, dp.optimal()), dp->end_state,
                                   dp->log_prob, o.mask_placeholder);
    } else {
        out["dingo"] = {{"error", "no_valid_prefix"}, {"witness_state", dp.failure().witness_state}};
    }
    emit(o, out.dump());
    return kExitOk;
}

int cmd_bench(const Options& o) {
    Loaded l = load_automaton(o);
    const TokenAutomaton& ta = *l.ta;
    const SyntheticDistribution dist(o.seed, ta.vocab_size(), ta.mask_id(), o.temperature);
    DecodeOptions opts;
    opts.threads = o.threads;
    std::ostringstream csv;
    json rows = json::array();
    csv << "d,states,vocab,seconds\n";
    for (std::size_t d : o.lengths) {
        const ProbabilityBlock block = dist(0, 0, std::vector<TokenId>(d, ta.mask_id()));
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < std::max<std::size_t>(1, o.repeat); ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            const DecodeOutcome out = decode_block(ta, block, ta.start(), opts);
            best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
            if (!out) spdlog::warn("d={} has no valid prefix", d);
        }
        csv << d << ',' << ta.num_states() << ',' << ta.vocab_size() << ',' << best << '\n';
        rows.push_back({{"d", d}, {"states", ta.num_states()}, {"vocab", ta.vocab_size()}, {"seconds", best}});
    }
    emit(o, o.format == "json" ? rows.dump() : csv.str());
    return kExitOk;
}

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("dingo");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("DINGO_LOG")) {
        const std::string level = env;
        if (level == "error") spdlog::set_level(spdlog::level::err);
        else if (level == "info") spdlog::set_level(spdlog::level::info);
        else if (level == "debug") spdlog::set_level(spdlog::level::debug);
    }
}

void add_automaton_options(CLI::App* cmd, Options& o) {
    auto* group = cmd->add_option_group("automaton source");
    group->add_option("--regex", o.regex, "Regular expression");
    group->add_option("--regex-file", o.regex_file, "File holding the regular expression")->check(CLI::ExistingFile);
    group->add_option("--automaton", o.automaton, "Serialized token automaton")->check(CLI::ExistingFile);
    group->require_option(1);
    cmd->add_option("--vocab", o.vocab, "Vocabulary: JSON or tiktoken rank file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--mask-token", o.mask_token, "Mask string appended to tiktoken vocabularies");
    cmd->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--mask-placeholder", o.mask_placeholder, "Rendering of the mask in text output");
}

} // namespace

int main(int argc, char** argv) {
    setup_logging();
    Options o;
    CLI::App app{"Regular-expression constrained decoding for diffusion language models"};
    app.require_subcommand(1);

    auto* compile = app.add_subcommand("compile", "Build a token automaton and print its statistics");
    add_automaton_options(compile, o);
    compile->add_option("--out", o.out, "Write the automaton here");
    compile->add_option("--format", o.format, "binary automaton or json character-DFA export")
        ->check(CLI::IsMember({"json", "binary"}));

    auto* decode = app.add_subcommand("decode", "Optimal constrained decoding of one or more blocks");
    add_automaton_options(decode, o);
    decode->add_option("--probs", o.probs, "Probability block (JSON or DGPB)")->required()->check(CLI::ExistingFile);
    decode->add_option("--start-state", o.start_state, "Automaton state to start from");
    decode->add_option("--blocks", o.blocks, "Split the rows into this many consecutive blocks");
    decode->add_option("--out", o.out, "Write the result here instead of stdout");

    auto* simulate = app.add_subcommand("simulate", "Run the diffusion simulator");
    add_automaton_options(simulate, o);
    simulate->add_option("--block-length", o.block_length, "Block length d")->check(CLI::PositiveNumber);
    simulate->add_option("--steps", o.steps, "Diffusion steps per block")->check(CLI::PositiveNumber);
    simulate->add_option("--blocks", o.blocks, "Number of blocks");
    simulate->add_option("--strategy", o.strategy, "Remask strategy")
        ->check(CLI::IsMember({"random", "topprob", "entropy"}));
    simulate->add_option("--mode", o.mode, "Decoder")->check(CLI::IsMember({"dingo", "greedy", "unconstrained"}));
    simulate->add_option("--greedy-order", o.greedy_order, "Greedy commit order")
        ->check(CLI::IsMember({"ltr", "confidence"}));
    simulate->add_option("--seed", o.seed, "Random seed");
    simulate->add_option("--temperature", o.temperature, "Synthetic logit temperature")->check(CLI::PositiveNumber);
    simulate->add_option("--out", o.out, "Write the JSON-lines transcript here");

    auto* oracle = app.add_subcommand("oracle", "Compare the decoder with exhaustive search");
    auto* oracle_src = oracle->add_option_group("automaton source");
    oracle_src->add_option("--regex", o.regex, "Regular expression");
    oracle_src->add_option("--regex-file", o.regex_file, "File holding the regular expression")
        ->check(CLI::ExistingFile);
    oracle_src->add_option("--automaton", o.automaton, "Serialized token automaton")->check(CLI::ExistingFile);
    oracle->add_option("--vocab", o.vocab, "Vocabulary")->check(CLI::ExistingFile);
    oracle->add_option("--mask-token", o.mask_token, "Mask string appended to tiktoken vocabularies");
    oracle->add_option("--probs", o.probs, "Probability block")->check(CLI::ExistingFile);
    oracle->add_option("--start-state", o.start_state, "Automaton state to start from");
    oracle->add_option("--random", o.random, "Check this many random small instances instead");
    oracle->add_option("--seed", o.seed, "Seed for --random");
    oracle->add_option("--out", o.out, "Write the result here");

    auto* baseline = app.add_subcommand("baseline", "Unconstrained, greedy-constrained and optimal decoding side by side");
    add_automaton_options(baseline, o);
    baseline->add_option("--probs", o.probs, "Probability block")->required()->check(CLI::ExistingFile);
    baseline->add_option("--start-state", o.start_state, "Automaton state to start from");
    baseline->add_option("--order", o.order, "Greedy commit order, comma-separated 0-based positions");
    baseline->add_option("--out", o.out, "Write the result here");

    auto* bench = app.add_subcommand("bench", "Time decode_block over a sweep of block lengths");
    add_automaton_options(bench, o);
    bench->add_option("--lengths", o.lengths, "Block lengths")->delimiter(',');
    bench->add_option("--repeat", o.repeat, "Repetitions per length (best time is reported)");
    bench->add_option("--seed", o.seed, "Seed of the synthetic distribution");
    bench->add_option("--temperature", o.temperature, "Synthetic logit temperature");
    bench->add_option("--format", o.format, "csv (default) or json")->check(CLI::IsMember({"csv", "json", "binary"}));
    bench->add_option("--out", o.out, "Write the rows here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (oracle->parsed() && o.random == 0 && (o.vocab.empty() || o.probs.empty()))
            throw InvalidArgument("oracle needs --vocab and --probs, or --random");
        if (oracle->parsed() && o.random == 0 && o.regex.empty() && o.regex_file.empty() && o.automaton.empty())
            throw InvalidArgument("oracle needs --regex, --regex-file or --automaton");
        if (*compile) return cmd_compile(o);
        if (*decode) return cmd_decode(o);
        if (*simulate) return cmd_simulate(o);
        if (*oracle) return cmd_oracle(o);
        if (*baseline) return cmd_baseline(o);
        if (*bench) return cmd_bench(o);
    } catch (const SyntaxError& e) {
        spdlog::error("SyntaxError: {}", e.what());
        return kExitInput;
    } catch (const UnsupportedFeature& e) {
        spdlog::error("UnsupportedFeature: {}", e.what());
        return kExitInput;
    } catch (const dingo::Error& e) {
        spdlog::error("{}", e.what());
        return kExitInput;
    } catch (const nlohmann::json::exception& e) {
        spdlog::error("malformed JSON: {}", e.what());
        return kExitInput;
    } catch (const std::exception& e) {
        spdlog::error("internal error: {}", e.what());
        return 1;
    }
    return kExitInput;
}
