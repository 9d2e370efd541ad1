#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dingo/types.hpp"

namespace dingo {

// Inclusive range of Unicode code points.
struct CodeRange {
    char32_t lo;
    char32_t hi;
    bool operator==(const CodeRange&) const = default;
};

/// Total character-level DFA.
///
/// The alphabet is a partition of [0, 0x10FFFF] into disjoint intervals
/// ("classes"); code points the pattern never mentions share the intervals
/// between mentioned ranges. States are numbered breadth-first from the start
/// state, with the dead sink always last.
class CharDfa {
public:
    CharDfa(std::vector<char32_t> class_starts, std::size_t num_states, StateId start, StateSet accepting,
            std::vector<StateId> transitions);

    std::size_t num_states() const { return num_states_; }
    std::size_t num_classes() const { return class_starts_.size(); }
    StateId start() const { return start_; }
    StateId dead_state() const { return static_cast<StateId>(num_states_ - 1); }
    const StateSet& accepting() const { return accepting_; }
    bool is_accepting(StateId q) const { return accepting_.contains(q); }

    std::size_t class_of(char32_t c) const;
    CodeRange class_range(std::size_t cls) const;
    StateId next(StateId q, std::size_t cls) const { return transitions_[q * num_classes() + cls]; }
    StateId step(StateId q, char32_t c) const { return next(q, class_of(c)); }

    const std::vector<StateId>& transitions() const { return transitions_; }
    const std::vector<char32_t>& class_starts() const { return class_starts_; }

    bool operator==(const CharDfa&) const = default;

private:
    std::vector<char32_t> class_starts_;
    std::array<std::uint32_t, 128> ascii_class_{};
    std::size_t num_states_;
    StateId start_;
    StateSet accepting_;
    std::vector<StateId> transitions_;
};

struct CompileOptions {
    // Disable only to inspect the raw subset construction.
    bool minimize = true;
    // Upper bound on {m,n} repetition counts.
    std::size_t max_repeat = 1000;
    // Upper bound on determinized states before minimization.
    std::size_t max_states = 200000;
};

/// Compiles `pattern` (UTF-8) into a minimal total DFA with full-match
/// semantics. Throws SyntaxError or UnsupportedFeature.
CharDfa compile_regex(std::string_view pattern, const CompileOptions& options = {});

StateSet compute_live_states(const CharDfa& dfa);

StateId extended_transition(const CharDfa& dfa, std::u32string_view text, StateId q);
// Malformed UTF-8 bytes are fed as U+FFFD.
StateId extended_transition(const CharDfa& dfa, std::string_view text, StateId q);

bool full_match(const CharDfa& dfa, std::string_view text);

} // namespace dingo
