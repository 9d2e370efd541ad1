#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "dingo/regex_automaton.hpp"

namespace dingo::detail {

struct RegexNode {
    enum class Kind { Empty, Chars, Concat, Alternate, Repeat };

    Kind kind = Kind::Empty;
    std::vector<CodeRange> ranges;  // Chars: sorted, disjoint, non-adjacent
    std::vector<RegexNode> children;
    std::size_t min = 0;  // Repeat bounds
    std::size_t max = 0;
    bool unbounded = false;
};

std::vector<CodeRange> normalize_ranges(std::vector<CodeRange> ranges);
std::vector<CodeRange> complement_ranges(const std::vector<CodeRange>& ranges);

RegexNode parse_regex(std::u32string_view pattern, std::size_t max_repeat);

} // namespace dingo::detail
