#include "dingo/regex_automaton.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <unordered_map>

#include "dingo/error.hpp"
#include "dingo/utf8.hpp"
#include "regex_parser.hpp"

namespace dingo {

CharDfa::CharDfa(std::vector<char32_t> class_starts, std::size_t num_states, StateId start, StateSet accepting,
                 std::vector<StateId> transitions)
    : class_starts_(std::move(class_starts)),
      num_states_(num_states),
      start_(start),
      accepting_(std::move(accepting)),
      transitions_(std::move(transitions)) {
    if (class_starts_.empty() || class_starts_.front() != 0) throw InvalidArgument("class partition must start at 0");
    if (num_states_ == 0 || start_ >= num_states_) throw InvalidArgument("bad state count or start state");
    if (transitions_.size() != num_states_ * class_starts_.size()) throw InvalidArgument("transition table size");
    for (char32_t c = 0; c < 128; ++c) {
        auto it = std::upper_bound(class_starts_.begin(), class_starts_.end(), c);
        ascii_class_[c] = static_cast<std::uint32_t>(it - class_starts_.begin() - 1);
    }
}

std::size_t CharDfa::class_of(char32_t c) const {
    if (c < 128) return ascii_class_[c];
    auto it = std::upper_bound(class_starts_.begin(), class_starts_.end(), c);
    return static_cast<std::size_t>(it - class_starts_.begin() - 1);
}

CodeRange CharDfa::class_range(std::size_t cls) const {
    const char32_t lo = class_starts_[cls];
    const char32_t hi = cls + 1 < class_starts_.size() ? class_starts_[cls + 1] - 1 : utf8::kMaxCodePoint;
    return {lo, hi};
}

namespace {

using detail::RegexNode;

void collect_boundaries(const RegexNode& node, std::vector<char32_t>& starts) {
    for (const auto& r : node.ranges) {
        starts.push_back(r.lo);
        if (r.hi < utf8::kMaxCodePoint) starts.push_back(r.hi + 1);
    }
    for (const auto& child : node.children) collect_boundaries(child, starts);
}

// Thompson NFA whose labelled edges cover contiguous spans of class ids.
class Nfa {
public:
    struct Edge {
        std::uint32_t first_class;
        std::uint32_t last_class;
        std::uint32_t to;
    };

    explicit Nfa(const std::vector<char32_t>& class_starts) : class_starts_(class_starts) {}

    std::uint32_t add_state() {
        eps_.emplace_back();
        edges_.emplace_back();
        return static_cast<std::uint32_t>(eps_.size() - 1);
    }

    std::uint32_t build(const RegexNode& node, std::uint32_t from) {
        switch (node.kind) {
        case RegexNode::Kind::Empty:
            return from;
        case RegexNode::Kind::Chars: {
            const std::uint32_t to = add_state();
            for (const auto& r : node.ranges) {
                edges_[from].push_back({class_index(r.lo), class_index(r.hi), to});
            }
            return to;
        }
        case RegexNode::Kind::Concat: {
            std::uint32_t cur = from;
            for (const auto& child : node.children) cur = build(child, cur);
            return cur;
        }
        case RegexNode::Kind::Alternate: {
            const std::uint32_t end = add_state();
            for (const auto& child : node.children) {
                const std::uint32_t s = add_state();
                eps_[from].push_back(s);
                eps_[build(child, s)].push_back(end);
            }
            return end;
        }
        case RegexNode::Kind::Repeat: {
            const RegexNode& child = node.children.front();
            std::uint32_t cur = from;
            for (std::size_t i = 0; i < node.min; ++i) cur = build(child, cur);
            if (node.unbounded) {
                const std::uint32_t loop = add_state();
                eps_[cur].push_back(loop);
                eps_[build(child, loop)].push_back(loop);
                return loop;
            }
            for (std::size_t i = node.min; i < node.max; ++i) {
                const std::uint32_t next = add_state();
                eps_[cur].push_back(next);
                eps_[build(child, cur)].push_back(next);
                cur = next;
            }
            return cur;
        }
        }
        return from;
    }

    std::size_t size() const { return eps_.size(); }
    const std::vector<std::uint32_t>& eps(std::uint32_t s) const { return eps_[s]; }
    const std::vector<Edge>& edges(std::uint32_t s) const { return edges_[s]; }

private:
    std::uint32_t class_index(char32_t c) const {
        auto it = std::upper_bound(class_starts_.begin(), class_starts_.end(), c);
        return static_cast<std::uint32_t>(it - class_starts_.begin() - 1);
    }

    const std::vector<char32_t>& class_starts_;
    std::vector<std::vector<std::uint32_t>> eps_;
    std::vector<std::vector<Edge>> edges_;
};

struct RawDfa {
    std::size_t num_states = 0;
    std::size_t num_classes = 0;
    std::size_t start = 0;
    std::vector<StateId> table;
    std::vector<bool> accepting;
    std::optional<std::size_t> empty_state;  // subset {} when materialized
};

void closure(const Nfa& nfa, std::vector<std::uint32_t>& set, std::vector<char>& seen) {
    std::vector<std::uint32_t> stack(set.begin(), set.end());
    for (auto s : set) seen[s] = 1;
    while (!stack.empty()) {
        const std::uint32_t s = stack.back();
        stack.pop_back();
        for (auto t : nfa.eps(s)) {
            if (!seen[t]) {
                seen[t] = 1;
                set.push_back(t);
                stack.push_back(t);
            }
        }
    }
    for (auto s : set) seen[s] = 0;
    std::sort(set.begin(), set.end());
}

RawDfa determinize(const Nfa& nfa, std::uint32_t nfa_start, std::uint32_t nfa_accept, std::size_t num_classes,
                   std::size_t max_states) {
    RawDfa dfa;
    dfa.num_classes = num_classes;
    std::map<std::vector<std::uint32_t>, StateId> index;
    std::vector<std::vector<std::uint32_t>> subsets;
    std::vector<char> seen(nfa.size(), 0);

    auto intern = [&](std::vector<std::uint32_t>&& set) -> StateId {
        auto [it, inserted] = index.try_emplace(set, static_cast<StateId>(subsets.size()));
        if (inserted) {
            if (subsets.size() >= max_states) throw TooLarge("regex determinization exceeds state limit");
            subsets.push_back(std::move(set));
        }
        return it->second;
    };

    std::vector<std::uint32_t> init{nfa_start};
    closure(nfa, init, seen);
    dfa.start = intern(std::move(init));

    std::vector<std::vector<std::uint32_t>> buckets(num_classes);
    for (std::size_t d = 0; d < subsets.size(); ++d) {
        for (auto& b : buckets) b.clear();
        for (auto s : subsets[d]) {
            for (const auto& e : nfa.edges(s)) {
                for (std::uint32_t c = e.first_class; c <= e.last_class; ++c) buckets[c].push_back(e.to);
            }
        }
        for (std::size_t c = 0; c < num_classes; ++c) {
            std::vector<std::uint32_t> target = buckets[c];
            std::sort(target.begin(), target.end());
            target.erase(std::unique(target.begin(), target.end()), target.end());
            closure(nfa, target, seen);
            const StateId t = intern(std::move(target));
            dfa.table.push_back(t);
        }
    }
    dfa.num_states = subsets.size();
    dfa.accepting.resize(dfa.num_states);
    for (std::size_t d = 0; d < subsets.size(); ++d) {
        dfa.accepting[d] = std::binary_search(subsets[d].begin(), subsets[d].end(), nfa_accept);
        if (subsets[d].empty()) dfa.empty_state = d;
    }
    return dfa;
}

std::vector<bool> raw_live(const RawDfa& dfa) {
    std::vector<std::vector<std::size_t>> reverse(dfa.num_states);
    for (std::size_t q = 0; q < dfa.num_states; ++q)
        for (std::size_t c = 0; c < dfa.num_classes; ++c) reverse[dfa.table[q * dfa.num_classes + c]].push_back(q);
    std::vector<bool> live(dfa.num_states, false);
    std::deque<std::size_t> queue;
    for (std::size_t q = 0; q < dfa.num_states; ++q) {
        if (dfa.accepting[q]) {
            live[q] = true;
            queue.push_back(q);
        }
    }
    while (!queue.empty()) {
        const std::size_t q = queue.front();
        queue.pop_front();
        for (auto p : reverse[q]) {
            if (!live[p]) {
                live[p] = true;
                queue.push_back(p);
            }
        }
    }
    return live;
}

// Moore partition refinement; returns block id per state.
std::vector<std::uint32_t> refine(const RawDfa& dfa, std::size_t& num_blocks) {
    std::vector<std::uint32_t> block(dfa.num_states);
    for (std::size_t q = 0; q < dfa.num_states; ++q) block[q] = dfa.accepting[q] ? 1 : 0;
    num_blocks = 0;
    std::vector<std::uint32_t> signature(dfa.num_classes + 1);
    for (;;) {
        std::map<std::vector<std::uint32_t>, std::uint32_t> ids;
        std::vector<std::uint32_t> next(dfa.num_states);
        for (std::size_t q = 0; q < dfa.num_states; ++q) {
            signature[0] = block[q];
            for (std::size_t c = 0; c < dfa.num_classes; ++c)
                signature[c + 1] = block[dfa.table[q * dfa.num_classes + c]];
            auto [it, inserted] = ids.try_emplace(signature, static_cast<std::uint32_t>(ids.size()));
            next[q] = it->second;
        }
        const std::size_t count = ids.size();
        block.swap(next);
        if (count == num_blocks) break;
        num_blocks = count;
    }
    return block;
}

// Renumbers breadth-first from the start state, excluding `dead`, which is
// appended last (materialized if absent).
CharDfa canonicalize(const RawDfa& dfa, std::optional<std::size_t> dead, std::vector<char32_t> class_starts) {
    const std::size_t k = dfa.num_classes;
    std::vector<StateId> order(dfa.num_states, kNoState);
    std::vector<std::size_t> by_new;
    std::deque<std::size_t> queue;
    if (!dead || *dead != dfa.start) {
        order[dfa.start] = 0;
        by_new.push_back(dfa.start);
        queue.push_back(dfa.start);
    }
    while (!queue.empty()) {
        const std::size_t q = queue.front();
        queue.pop_front();
        for (std::size_t c = 0; c < k; ++c) {
            const std::size_t t = dfa.table[q * k + c];
            if ((dead && t == *dead) || order[t] != kNoState) continue;
            order[t] = static_cast<StateId>(by_new.size());
            by_new.push_back(t);
            queue.push_back(t);
        }
    }
    const StateId dead_id = static_cast<StateId>(by_new.size());
    const std::size_t n = by_new.size() + 1;
    if (dead) order[*dead] = dead_id;

    std::vector<StateId> table(n * k, dead_id);
    StateSet accepting(n);
    for (std::size_t i = 0; i < by_new.size(); ++i) {
        const std::size_t q = by_new[i];
        if (dfa.accepting[q]) accepting.insert(static_cast<StateId>(i));
        for (std::size_t c = 0; c < k; ++c) table[i * k + c] = order[dfa.table[q * k + c]];
    }
    const StateId start = (dead && *dead == dfa.start) ? dead_id : 0;
    return CharDfa(std::move(class_starts), n, start, std::move(accepting), std::move(table));
}

} // namespace

CharDfa compile_regex(std::string_view pattern, const CompileOptions& options) {
    std::u32string text;
    try {
        text = utf8::decode_strict(pattern);
    } catch (const FormatError& e) {
        throw SyntaxError(std::string("pattern is not valid UTF-8: ") + e.what(), 0);
    }
    const RegexNode ast = detail::parse_regex(text, options.max_repeat);

    std::vector<char32_t> starts{0};
    collect_boundaries(ast, starts);
    std::sort(starts.begin(), starts.end());
    starts.erase(std::unique(starts.begin(), starts.end()), starts.end());

    Nfa nfa(starts);
    const std::uint32_t nfa_start = nfa.add_state();
    const std::uint32_t nfa_accept = nfa.build(ast, nfa_start);
    RawDfa raw = determinize(nfa, nfa_start, nfa_accept, starts.size(), options.max_states);

    if (!options.minimize) return canonicalize(raw, raw.empty_state, std::move(starts));

    std::size_t num_blocks = 0;
    const std::vector<std::uint32_t> block = refine(raw, num_blocks);
    RawDfa min;
    min.num_states = num_blocks;
    min.num_classes = raw.num_classes;
    min.start = block[raw.start];
    min.table.assign(num_blocks * raw.num_classes, 0);
    min.accepting.assign(num_blocks, false);
    for (std::size_t q = 0; q < raw.num_states; ++q) {
        const std::size_t b = block[q];
        min.accepting[b] = raw.accepting[q];
        for (std::size_t c = 0; c < raw.num_classes; ++c)
            min.table[b * raw.num_classes + c] = block[raw.table[q * raw.num_classes + c]];
    }
    const std::vector<bool> live = raw_live(min);
    std::optional<std::size_t> dead;
    for (std::size_t b = 0; b < num_blocks; ++b) {
        if (!live[b]) dead = b;
    }
    return canonicalize(min, dead, std::move(starts));
}

StateSet compute_live_states(const CharDfa& dfa) {
    const std::size_t n = dfa.num_states();
    const std::size_t k = dfa.num_classes();
    std::vector<std::vector<StateId>> reverse(n);
    for (StateId q = 0; q < n; ++q) {
        for (std::size_t c = 0; c < k; ++c) reverse[dfa.next(q, c)].push_back(q);
    }
    StateSet live(n);
    std::deque<StateId> queue;
    for (StateId q : dfa.accepting().to_vector()) {
        live.insert(q);
        queue.push_back(q);
    }
    while (!queue.empty()) {
        const StateId q = queue.front();
        queue.pop_front();
        for (StateId p : reverse[q]) {
            if (!live.contains(p)) {
                live.insert(p);
                queue.push_back(p);
            }
        }
    }
    return live;
}

StateId extended_transition(const CharDfa& dfa, std::u32string_view text, StateId q) {
    for (char32_t c : text) q = dfa.step(q, c);
    return q;
}

StateId extended_transition(const CharDfa& dfa, std::string_view text, StateId q) {
    std::size_t pos = 0;
    while (pos < text.size()) q = dfa.step(q, utf8::next(text, pos).value_or(utf8::kReplacement));
    return q;
}

bool full_match(const CharDfa& dfa, std::string_view text) {
    return dfa.is_accepting(extended_transition(dfa, text, dfa.start()));
}

} // namespace dingo
