#include "dingo/dp_decoder.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "dingo/error.hpp"

namespace dingo {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool better(double value, TokenId token, double best_value, TokenId best_token) {
    return value > best_value || (value == best_value && token < best_token);
}

// Validates the row in the same pass that picks the best token per class.
std::vector<CostEdge> position_costs(const TokenAutomaton& ta, std::span<const float> row, std::size_t position) {
    const std::size_t n = ta.num_states();
    const auto classes = ta.token_classes();

    // Best token per transition class.
    std::vector<float> class_best(ta.num_token_classes(), -1.0f);
    std::vector<TokenId> class_arg(ta.num_token_classes(), kNoToken);
    for (TokenId t = 0; t < row.size(); ++t) {
        if (!std::isfinite(row[t]) || row[t] < 0.0f)
            throw InvalidArgument("probability at row " + std::to_string(position) + " is negative or not finite");
        const std::uint32_t c = classes[t];
        if (c == TokenAutomaton::kNoClass) continue;
        if (row[t] > class_best[c]) {
            class_best[c] = row[t];
            class_arg[c] = t;
        }
    }

    const double mask_prob = row[ta.mask_id()];
    std::vector<double> best(n, 0.0);
    std::vector<TokenId> arg(n, kNoToken);
    std::vector<StateId> touched;
    std::vector<CostEdge> out;
    for (StateId from = 0; from < n; ++from) {
        touched.clear();
        auto offer = [&](StateId to, double value, TokenId token) {
            if (arg[to] == kNoToken) touched.push_back(to);
            if (arg[to] == kNoToken || better(value, token, best[to], arg[to])) {
                best[to] = value;
                arg[to] = token;
            }
        };
        for (const auto& e : ta.class_edges_from(from)) {
            offer(e.target, class_best[e.token_class], class_arg[e.token_class]);
        }
        for (StateId to : ta.mask_closure(from)) offer(to, mask_prob, ta.mask_id());

        std::sort(touched.begin(), touched.end());
        for (StateId to : touched) {
            if (best[to] > 0.0) out.push_back({from, to, best[to], std::log(best[to]), arg[to]});
            best[to] = 0.0;
            arg[to] = kNoToken;
        }
    }
    return out;
}

} // namespace

std::pair<double, TokenId> CostTables::cost(std::size_t position, StateId from, StateId to) const {
    auto edges = this->edges(position);
    auto it = std::lower_bound(edges.begin(), edges.end(), std::pair{from, to}, [](const CostEdge& e, const auto& key) {
        return std::pair{e.from, e.to} < key;
    });
    if (it != edges.end() && it->from == from && it->to == to) return {it->prob, it->token};
    return {0.0, kNoToken};
}

CostTables build_cost_tables(const TokenAutomaton& ta, const ProbabilityBlock& block, const DecodeOptions& options) {
    if (block.vocab_size() != ta.vocab_size())
        throw DimensionMismatch("block rows have " + std::to_string(block.vocab_size()) + " entries, vocabulary has " +
                                std::to_string(ta.vocab_size()));
    const std::size_t d = block.length();
    std::vector<std::vector<CostEdge>> positions(d);
    const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(d)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < d; ++i) positions[i] = position_costs(ta, block.row(i), i);
    } else {
        std::vector<std::exception_ptr> errors(threads);
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < d; i += threads) positions[i] = position_costs(ta, block.row(i), i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (const auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    return CostTables(ta.num_states(), std::move(positions));
}

DpTable::DpTable(std::size_t length, std::size_t num_states)
    : length_(length),
      num_states_(num_states),
      scores_((length + 1) * num_states, kNegInf),
      parents_((length + 1) * num_states) {}

DpTable dp_forward(const CostTables& tables, StateId start_state) {
    const std::size_t n = tables.num_states();
    if (start_state >= n) throw InvalidArgument("start state out of range");
    const std::size_t d = tables.length();
    DpTable table(d, n);
    table.score(0, start_state) = 0.0;
    for (std::size_t i = 1; i <= d; ++i) {
        // Edges are sorted by source, so strict improvement keeps the
        // smallest predecessor on ties.
        for (const auto& e : tables.edges(i - 1)) {
            const double prev = table.score(i - 1, e.from);
            if (prev == kNegInf) continue;
            const double cand = prev + e.log_prob;
            if (cand > table.score(i, e.to)) {
                table.score(i, e.to) = cand;
                table.parent(i, e.to) = {e.from, e.token};
            }
        }
    }
    return table;
}

DecodeOutcome reconstruct_path(const DpTable& table, const StateSet& live) {
    const std::size_t d = table.length();
    StateId best = kNoState;
    for (StateId q : live.to_vector()) {
        if (q >= table.num_states()) break;
        if (best == kNoState || table.score(d, q) > table.score(d, best)) best = q;
    }
    if (best == kNoState || table.score(d, best) == kNegInf) {
        return NoValidPrefix{best == kNoState ? static_cast<StateId>(table.num_states() - 1) : best};
    }
    OptimalDecode out;
    out.end_state = best;
    out.log_prob = table.score(d, best);
    out.tokens.resize(d);
    out.states.resize(d + 1);
    StateId cur = best;
    for (std::size_t i = d; i >= 1; --i) {
        out.states[i] = cur;
        const auto& p = table.parent(i, cur);
        out.tokens[i - 1] = p.token;
        cur = p.prev;
    }
    out.states[0] = cur;
    return out;
}

DecodeOutcome decode_block(const TokenAutomaton& ta, const ProbabilityBlock& block, StateId start_state,
                           const DecodeOptions& options) {
    if (start_state >= ta.num_states()) throw InvalidArgument("start state out of range");
    const CostTables tables = build_cost_tables(ta, block, options);
    const DpTable table = dp_forward(tables, start_state);
    return reconstruct_path(table, ta.live());
}

std::vector<TokenId> realize_masks(const TokenAutomaton& ta, const OptimalDecode& decode) {
    std::vector<TokenId> out = decode.tokens;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] != ta.mask_id()) continue;
        out[i] = ta.realizing_token(decode.states[i], decode.states[i + 1]);
        if (out[i] == kNoToken) throw InvalidArgument("mask step has no realizing token");
    }
    return out;
}

} // namespace dingo
