#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dingo/regex_automaton.hpp"
#include "dingo/types.hpp"
#include "dingo/vocabulary.hpp"

namespace dingo {

struct TokenEdge {
    TokenId token;
    StateId target;
    bool operator==(const TokenEdge&) const = default;
};

// Edge shared by every token of one transition-equivalence class.
struct ClassEdge {
    std::uint32_t token_class;
    StateId target;
};

struct TokenBuildOptions {
    unsigned threads = 1;
};

/// Token-level lifting of a CharDfa over a vocabulary.
///
/// delta_t is stored per source state as a token-sorted edge list; edges into
/// the dead sink are omitted. The mask closure of q is the set of targets of
/// those edges. Tokens are additionally grouped into classes with identical
/// transition columns, which is what the decoder iterates over.
class TokenAutomaton {
public:
    static TokenAutomaton build(const CharDfa& dfa, const StateSet& char_live, const TokenVocabulary& vocab,
                                const TokenBuildOptions& options = {});

    std::size_t num_states() const { return num_states_; }
    StateId start() const { return start_; }
    StateId dead_state() const { return dead_; }
    std::size_t vocab_size() const { return vocab_size_; }
    TokenId mask_id() const { return mask_id_; }
    std::uint64_t vocab_hash() const { return vocab_hash_; }
    const StateSet& accepting() const { return accepting_; }
    const StateSet& live() const { return live_; }
    bool is_live(StateId q) const { return live_.contains(q); }

    std::optional<StateId> token_transition(StateId q, TokenId t) const;
    std::span<const StateId> mask_closure(StateId q) const;
    // {delta_t(q,t)}, {} when undefined, or the mask closure for the mask id.
    std::vector<StateId> combined_transition(StateId q, TokenId t) const;

    std::span<const TokenEdge> edges_from(StateId q) const;
    std::size_t num_token_edges() const { return edges_.size(); }
    std::size_t num_mask_edges() const { return mask_targets_.size(); }

    // Smallest non-mask token moving `from` to `to`, or kNoToken.
    TokenId realizing_token(StateId from, StateId to) const;

    // kNoClass for the mask token and tokens without any edge.
    static constexpr std::uint32_t kNoClass = 0xFFFFFFFFu;
    std::size_t num_token_classes() const { return num_classes_; }
    std::span<const std::uint32_t> token_classes() const { return token_class_; }
    std::span<const ClassEdge> class_edges_from(StateId q) const;

    std::vector<std::uint8_t> serialize() const;
    static TokenAutomaton deserialize(std::span<const std::uint8_t> bytes, const TokenVocabulary& vocab);

    double build_seconds() const { return build_seconds_; }

    // Structural equality (ignores build timing).
    bool operator==(const TokenAutomaton& other) const;

private:
    TokenAutomaton() = default;
    void finalize();

    std::size_t num_states_ = 0;
    StateId start_ = 0;
    StateId dead_ = 0;
    std::size_t vocab_size_ = 0;
    TokenId mask_id_ = 0;
    std::uint64_t vocab_hash_ = 0;
    StateSet accepting_;
    StateSet live_;

    std::vector<std::uint64_t> edge_offsets_;  // CSR, size num_states + 1
    std::vector<TokenEdge> edges_;
    std::vector<std::uint64_t> mask_offsets_;
    std::vector<StateId> mask_targets_;

    std::size_t num_classes_ = 0;
    std::vector<std::uint32_t> token_class_;
    std::vector<std::uint64_t> class_edge_offsets_;
    std::vector<ClassEdge> class_edges_;

    double build_seconds_ = 0.0;
};

} // namespace dingo
