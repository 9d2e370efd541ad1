#include <benchmark/benchmark.h>

#include <fstream>
#include <memory>
#include <random>
#include <string>

#include "dingo/diffusion_sim.hpp"
#include "dingo/dp_decoder.hpp"
#include "dingo/io.hpp"
#include "dingo/regex_automaton.hpp"
#include "dingo/token_automaton.hpp"
#include "random_instance.hpp"

using namespace dingo;

namespace {

std::string data(const std::string& name) { return std::string(DINGO_BENCH_DATA_DIR) + "/" + name; }

std::string regex_file(const std::string& name) {
    std::string text = io::read_text(data(name));
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    return text;
}

// Qwen ranks, 23 specials and the mask: 151,667 ids.
const TokenVocabulary& qwen() {
    static const TokenVocabulary vocab = [] {
        std::vector<std::string> specials{"<|endoftext|>", "<|im_start|>", "<|im_end|>"};
        for (int i = 0; i < 20; ++i) specials.push_back("<|extra_" + std::to_string(i) + "|>");
        return io::load_tiktoken(data("qwen.tiktoken"), "<|mask|>", specials);
    }();
    return vocab;
}

const TokenAutomaton& gsm() {
    static const TokenAutomaton ta = [] {
        const CharDfa dfa = compile_regex(regex_file("gsm_depth4.regex"));
        return TokenAutomaton::build(dfa, compute_live_states(dfa), qwen());
    }();
    return ta;
}

void BM_DecodeGsm(benchmark::State& state) {
    const TokenAutomaton& ta = gsm();
    const std::size_t d = static_cast<std::size_t>(state.range(0));
    DecodeOptions opts;
    opts.threads = static_cast<unsigned>(state.range(1));
    const SyntheticDistribution dist(1, ta.vocab_size(), ta.mask_id());
    const ProbabilityBlock block = dist(0, 1, std::vector<TokenId>(d, ta.mask_id()));
    for (auto _ : state) benchmark::DoNotOptimize(decode_block(ta, block, ta.start(), opts));
    state.counters["states"] = static_cast<double>(ta.num_states());
    state.counters["vocab"] = static_cast<double>(ta.vocab_size());
}
BENCHMARK(BM_DecodeGsm)->ArgsProduct({{16, 32, 64, 128, 256}, {1}})->Unit(benchmark::kMillisecond);

void BM_BuildGsm(benchmark::State& state) {
    const CharDfa dfa = compile_regex(regex_file("gsm_symbolic.regex"));
    const StateSet live = compute_live_states(dfa);
    TokenBuildOptions opts;
    opts.threads = static_cast<unsigned>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(TokenAutomaton::build(dfa, live, qwen(), opts));
}
BENCHMARK(BM_BuildGsm)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_CompileGsmRegex(benchmark::State& state) {
    const std::string pattern = regex_file("gsm_symbolic.regex");
    for (auto _ : state) benchmark::DoNotOptimize(compile_regex(pattern));
}
BENCHMARK(BM_CompileGsmRegex)->Unit(benchmark::kMillisecond);

void BM_DecodeSmall(benchmark::State& state) {
    std::mt19937_64 rng(5);
    gen::InstanceLimits limits;
    limits.max_length = static_cast<std::size_t>(state.range(0));
    std::vector<gen::Instance> corpus;
    for (int i = 0; i < 64; ++i) corpus.push_back(gen::random_instance(rng, limits));
    std::size_t k = 0;
    for (auto _ : state) {
        const auto& inst = corpus[k++ % corpus.size()];
        benchmark::DoNotOptimize(decode_block(inst.ta, inst.block, inst.start));
    }
}
BENCHMARK(BM_DecodeSmall)->Arg(6)->Arg(64);

} // namespace

BENCHMARK_MAIN();
