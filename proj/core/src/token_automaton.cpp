#include "dingo/token_automaton.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <thread>

#include "dingo/error.hpp"
#include "dingo/utf8.hpp"

namespace dingo {

TokenAutomaton TokenAutomaton::build(const CharDfa& dfa, const StateSet& char_live, const TokenVocabulary& vocab,
                                     const TokenBuildOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    TokenAutomaton ta;
    ta.num_states_ = dfa.num_states();
    ta.start_ = dfa.start();
    ta.dead_ = dfa.dead_state();
    ta.vocab_size_ = vocab.size();
    ta.mask_id_ = vocab.mask_id();
    ta.vocab_hash_ = vocab.fingerprint();
    ta.accepting_ = dfa.accepting();

    // Tokens as character-class sequences; mask and special tokens get none.
    const std::size_t V = vocab.size();
    std::vector<std::uint64_t> seq_offsets(V + 1, 0);
    std::vector<std::uint32_t> seq;
    std::vector<char> decodable(V, 0);
    for (TokenId t = 0; t < V; ++t) {
        if (!vocab.is_mask(t) && !vocab.is_special(t)) {
            decodable[t] = 1;
            const std::string& text = vocab.token(t);
            std::size_t pos = 0;
            while (pos < text.size())
                seq.push_back(static_cast<std::uint32_t>(
                    dfa.class_of(utf8::next(text, pos).value_or(utf8::kReplacement))));
        }
        seq_offsets[t + 1] = seq.size();
    }

    // Non-live character states behave like the dead sink.
    const std::size_t n = ta.num_states_;
    std::vector<std::vector<TokenEdge>> per_state(n);
    auto run_state = [&](StateId q) {
        auto& out = per_state[q];
        if (!char_live.contains(q)) return;
        for (TokenId t = 0; t < V; ++t) {
            if (!decodable[t]) continue;
            StateId s = q;
            bool alive = true;
            for (std::uint64_t i = seq_offsets[t]; i < seq_offsets[t + 1]; ++i) {
                s = dfa.next(s, seq[i]);
                if (!char_live.contains(s)) {
                    alive = false;
                    break;
                }
            }
            if (alive) out.push_back({t, s});
        }
    };

    const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(n)));
    if (threads == 1) {
        for (StateId q = 0; q < n; ++q) run_state(q);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                for (StateId q = w; q < n; q += threads) run_state(q);
            });
        }
        for (auto& th : pool) th.join();
    }

    ta.edge_offsets_.assign(n + 1, 0);
    for (StateId q = 0; q < n; ++q) {
        ta.edge_offsets_[q + 1] = ta.edge_offsets_[q] + per_state[q].size();
        ta.edges_.insert(ta.edges_.end(), per_state[q].begin(), per_state[q].end());
        std::vector<TokenEdge>().swap(per_state[q]);
    }

    ta.mask_offsets_.assign(n + 1, 0);
    for (StateId q = 0; q < n; ++q) {
        std::vector<StateId> targets;
        for (const auto& e : ta.edges_from(q)) targets.push_back(e.target);
        std::sort(targets.begin(), targets.end());
        targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
        ta.mask_targets_.insert(ta.mask_targets_.end(), targets.begin(), targets.end());
        ta.mask_offsets_[q + 1] = ta.mask_targets_.size();
    }

    ta.finalize();
    ta.build_seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return ta;
}

void TokenAutomaton::finalize() {
    const std::size_t n = num_states_;
    const std::size_t V = vocab_size_;

    // Token-level live states: reverse search over delta_t edges.
    std::vector<std::vector<StateId>> reverse(n);
    for (StateId q = 0; q < n; ++q) {
        for (StateId t : mask_closure(q)) reverse[t].push_back(q);
    }
    live_ = StateSet(n);
    std::deque<StateId> queue;
    for (StateId q : accepting_.to_vector()) {
        live_.insert(q);
        queue.push_back(q);
    }
    while (!queue.empty()) {
        const StateId q = queue.front();
        queue.pop_front();
        for (StateId p : reverse[q]) {
            if (!live_.contains(p)) {
                live_.insert(p);
                queue.push_back(p);
            }
        }
    }

    // Partition tokens by transition column, one state at a time.
    std::vector<std::uint32_t> cls(V, 0);
    std::vector<char> has_edge(V, 0);
    for (const auto& e : edges_) has_edge[e.token] = 1;
    std::size_t num_cls = 1;
    std::vector<StateId> row(V);
    for (StateId q = 0; q < n; ++q) {
        std::fill(row.begin(), row.end(), kNoState);
        for (const auto& e : edges_from(q)) row[e.token] = e.target;
        std::vector<std::vector<std::pair<StateId, std::uint32_t>>> split(num_cls);
        std::uint32_t next_id = 0;
        for (TokenId t = 0; t < V; ++t) {
            auto& options = split[cls[t]];
            std::uint32_t id = kNoClass;
            for (const auto& [target, new_id] : options) {
                if (target == row[t]) {
                    id = new_id;
                    break;
                }
            }
            if (id == kNoClass) {
                id = next_id++;
                options.emplace_back(row[t], id);
            }
            cls[t] = id;
        }
        num_cls = next_id;
    }

    std::vector<std::uint32_t> remap(num_cls, kNoClass);
    num_classes_ = 0;
    token_class_.assign(V, kNoClass);
    for (TokenId t = 0; t < V; ++t) {
        if (t == mask_id_ || !has_edge[t]) continue;
        if (remap[cls[t]] == kNoClass) remap[cls[t]] = static_cast<std::uint32_t>(num_classes_++);
        token_class_[t] = remap[cls[t]];
    }

    class_edge_offsets_.assign(n + 1, 0);
    class_edges_.clear();
    std::vector<StateId> stamp(num_classes_, kNoState);
    for (StateId q = 0; q < n; ++q) {
        const std::size_t begin = class_edges_.size();
        for (const auto& e : edges_from(q)) {
            const std::uint32_t c = token_class_[e.token];
            if (stamp[c] == q) continue;
            stamp[c] = q;
            class_edges_.push_back({c, e.target});
        }
        std::sort(class_edges_.begin() + static_cast<std::ptrdiff_t>(begin), class_edges_.end(),
                  [](const ClassEdge& a, const ClassEdge& b) { return a.token_class < b.token_class; });
        class_edge_offsets_[q + 1] = class_edges_.size();
    }
}

std::span<const TokenEdge> TokenAutomaton::edges_from(StateId q) const {
    return {edges_.data() + edge_offsets_[q], edges_.data() + edge_offsets_[q + 1]};
}

std::span<const StateId> TokenAutomaton::mask_closure(StateId q) const {
    if (q >= num_states_) throw InvalidArgument("state id out of range");
    return {mask_targets_.data() + mask_offsets_[q], mask_targets_.data() + mask_offsets_[q + 1]};
}

std::span<const ClassEdge> TokenAutomaton::class_edges_from(StateId q) const {
    return {class_edges_.data() + class_edge_offsets_[q], class_edges_.data() + class_edge_offsets_[q + 1]};
}

std::optional<StateId> TokenAutomaton::token_transition(StateId q, TokenId t) const {
    if (q >= num_states_) throw InvalidArgument("state id out of range");
    if (t >= vocab_size_) throw InvalidToken("token id " + std::to_string(t) + " out of range");
    auto edges = edges_from(q);
    auto it = std::lower_bound(edges.begin(), edges.end(), t,
                               [](const TokenEdge& e, TokenId id) { return e.token < id; });
    if (it != edges.end() && it->token == t) return it->target;
    return std::nullopt;
}

std::vector<StateId> TokenAutomaton::combined_transition(StateId q, TokenId t) const {
    if (t >= vocab_size_) throw InvalidToken("token id " + std::to_string(t) + " out of range");
    if (t == mask_id_) {
        auto closure = mask_closure(q);
        return {closure.begin(), closure.end()};
    }
    if (auto s = token_transition(q, t)) return {*s};
    return {};
}

TokenId TokenAutomaton::realizing_token(StateId from, StateId to) const {
    for (const auto& e : edges_from(from)) {
        if (e.target == to) return e.token;
    }
    return kNoToken;
}

bool TokenAutomaton::operator==(const TokenAutomaton& o) const {
    return num_states_ == o.num_states_ && start_ == o.start_ && dead_ == o.dead_ && vocab_size_ == o.vocab_size_ &&
           mask_id_ == o.mask_id_ && vocab_hash_ == o.vocab_hash_ && accepting_ == o.accepting_ &&
           live_ == o.live_ && edge_offsets_ == o.edge_offsets_ && edges_ == o.edges_ &&
           mask_offsets_ == o.mask_offsets_ && mask_targets_ == o.mask_targets_ && token_class_ == o.token_class_;
}

// Binary layout (little-endian):
//   "DGTA" u32 version u64 vocab_hash
//   u32 num_states u32 start u32 dead u32 vocab_size u32 mask_id
//   accepting bitset, ceil(num_states / 8) bytes
//   delta_t CSR:     u64 offsets[num_states + 1], {u32 token, u32 target}[offsets.back()]
//   delta_mask CSR:  u64 offsets[num_states + 1], u32 target[offsets.back()]
namespace {

constexpr std::uint32_t kFormatVersion = 1;

class Writer {
public:
    void raw(const char* s, std::size_t n) { out_.insert(out_.end(), s, s + n); }
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) throw FormatError("truncated automaton stream");
    }
    std::uint8_t u8() {
        need(1);
        return in_[pos_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    bool done() const { return pos_ == in_.size(); }
    std::size_t remaining() const { return in_.size() - pos_; }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

} // namespace

std::vector<std::uint8_t> TokenAutomaton::serialize() const {
    Writer w;
    w.raw("DGTA", 4);
    w.u32(kFormatVersion);
    w.u64(vocab_hash_);
    w.u32(static_cast<std::uint32_t>(num_states_));
    w.u32(start_);
    w.u32(dead_);
    w.u32(static_cast<std::uint32_t>(vocab_size_));
    w.u32(mask_id_);
    for (std::size_t byte = 0; byte < (num_states_ + 7) / 8; ++byte) {
        std::uint8_t bits = 0;
        for (std::size_t b = 0; b < 8; ++b) {
            const std::size_t q = byte * 8 + b;
            if (q < num_states_ && accepting_.contains(static_cast<StateId>(q))) bits |= std::uint8_t(1u << b);
        }
        w.u8(bits);
    }
    for (auto off : edge_offsets_) w.u64(off);
    for (const auto& e : edges_) {
        w.u32(e.token);
        w.u32(e.target);
    }
    for (auto off : mask_offsets_) w.u64(off);
    for (auto t : mask_targets_) w.u32(t);
    return w.take();
}

TokenAutomaton TokenAutomaton::deserialize(std::span<const std::uint8_t> bytes, const TokenVocabulary& vocab) {
    Reader r(bytes);
    r.need(4);
    if (!(bytes[0] == 'D' && bytes[1] == 'G' && bytes[2] == 'T' && bytes[3] == 'A'))
        throw FormatError("not a token automaton stream (bad magic)");
    for (int i = 0; i < 4; ++i) r.u8();
    const std::uint32_t version = r.u32();
    if (version != kFormatVersion)
        throw VersionMismatch("automaton format version " + std::to_string(version) + ", expected " +
                              std::to_string(kFormatVersion));
    TokenAutomaton ta;
    ta.vocab_hash_ = r.u64();
    if (ta.vocab_hash_ != vocab.fingerprint())
        throw VocabularyMismatch("automaton was built for a different vocabulary");
    ta.num_states_ = r.u32();
    ta.start_ = r.u32();
    ta.dead_ = r.u32();
    ta.vocab_size_ = r.u32();
    ta.mask_id_ = r.u32();
    const std::size_t n = ta.num_states_;
    if (n == 0 || ta.start_ >= n || ta.dead_ >= n) throw FormatError("bad state header");
    if (ta.vocab_size_ != vocab.size() || ta.mask_id_ != vocab.mask_id())
        throw VocabularyMismatch("vocabulary size or mask id differs");

    ta.accepting_ = StateSet(n);
    for (std::size_t byte = 0; byte < (n + 7) / 8; ++byte) {
        const std::uint8_t bits = r.u8();
        for (std::size_t b = 0; b < 8; ++b) {
            const std::size_t q = byte * 8 + b;
            if ((bits >> b) & 1u) {
                if (q >= n) throw FormatError("accepting bitset has bits past the state count");
                ta.accepting_.insert(static_cast<StateId>(q));
            }
        }
    }

    auto read_offsets = [&](std::vector<std::uint64_t>& offsets, std::size_t item_size) {
        r.need((n + 1) * 8);
        offsets.resize(n + 1);
        for (auto& off : offsets) off = r.u64();
        if (offsets.front() != 0) throw FormatError("CSR offsets must start at 0");
        for (std::size_t i = 0; i < n; ++i)
            if (offsets[i + 1] < offsets[i]) throw FormatError("CSR offsets not monotone");
        if (offsets.back() > r.remaining() / item_size) throw FormatError("truncated automaton stream");
    };

    read_offsets(ta.edge_offsets_, 8);
    ta.edges_.resize(ta.edge_offsets_.back());
    for (auto& e : ta.edges_) {
        e.token = r.u32();
        e.target = r.u32();
        if (e.token >= ta.vocab_size_ || e.token == ta.mask_id_ || e.target >= n || e.target == ta.dead_)
            throw FormatError("invalid delta_t edge");
    }
    for (StateId q = 0; q < n; ++q) {
        auto edges = ta.edges_from(q);
        for (std::size_t i = 1; i < edges.size(); ++i)
            if (edges[i - 1].token >= edges[i].token) throw FormatError("delta_t row not sorted by token");
    }

    read_offsets(ta.mask_offsets_, 4);
    ta.mask_targets_.resize(ta.mask_offsets_.back());
    for (auto& t : ta.mask_targets_) {
        t = r.u32();
        if (t >= n) throw FormatError("invalid delta_mask target");
    }
    if (!r.done()) throw FormatError("trailing bytes after automaton");

    for (StateId q = 0; q < n; ++q) {
        std::vector<StateId> expected;
        for (const auto& e : ta.edges_from(q)) expected.push_back(e.target);
        std::sort(expected.begin(), expected.end());
        expected.erase(std::unique(expected.begin(), expected.end()), expected.end());
        auto stored = ta.mask_closure(q);
        if (!std::equal(expected.begin(), expected.end(), stored.begin(), stored.end()))
            throw FormatError("delta_mask inconsistent with delta_t");
    }
    ta.finalize();
    return ta;
}

} // namespace dingo
