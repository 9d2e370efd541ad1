#include "regex_parser.hpp"

#include <algorithm>
#include <optional>
#include <string>

#include "dingo/error.hpp"
#include "dingo/utf8.hpp"

namespace dingo::detail {

std::vector<CodeRange> normalize_ranges(std::vector<CodeRange> ranges) {
    std::sort(ranges.begin(), ranges.end(), [](const CodeRange& a, const CodeRange& b) { return a.lo < b.lo; });
    std::vector<CodeRange> out;
    for (const auto& r : ranges) {
        if (!out.empty() && r.lo <= out.back().hi + 1) {
            out.back().hi = std::max(out.back().hi, r.hi);
        } else {
            out.push_back(r);
        }
    }
    return out;
}

std::vector<CodeRange> complement_ranges(const std::vector<CodeRange>& ranges) {
    std::vector<CodeRange> out;
    char32_t next = 0;
    for (const auto& r : ranges) {
        if (r.lo > next) out.push_back({next, r.lo - 1});
        next = r.hi + 1;
    }
    if (next <= utf8::kMaxCodePoint) out.push_back({next, utf8::kMaxCodePoint});
    return out;
}

namespace {

RegexNode chars(std::vector<CodeRange> ranges) {
    RegexNode node;
    node.kind = RegexNode::Kind::Chars;
    node.ranges = normalize_ranges(std::move(ranges));
    return node;
}

const std::vector<CodeRange>& digit_ranges() {
    static const std::vector<CodeRange> r{{U'0', U'9'}};
    return r;
}
const std::vector<CodeRange>& word_ranges() {
    static const std::vector<CodeRange> r{{U'0', U'9'}, {U'A', U'Z'}, {U'_', U'_'}, {U'a', U'z'}};
    return r;
}
const std::vector<CodeRange>& space_ranges() {
    static const std::vector<CodeRange> r{{U'\t', U'\r'}, {U' ', U' '}};
    return r;
}

bool is_hex(char32_t c) {
    return (c >= U'0' && c <= U'9') || (c >= U'a' && c <= U'f') || (c >= U'A' && c <= U'F');
}
unsigned hex_value(char32_t c) {
    if (c >= U'0' && c <= U'9') return c - U'0';
    if (c >= U'a' && c <= U'f') return c - U'a' + 10;
    return c - U'A' + 10;
}

// Result of an escape: either one code point or a predefined set.
struct Escape {
    std::optional<char32_t> single;
    std::vector<CodeRange> set;
};

class Parser {
public:
    Parser(std::u32string_view pattern, std::size_t max_repeat) : p_(pattern), max_repeat_(max_repeat) {}

    RegexNode parse() {
        if (!eof() && peek() == U'^') ++pos_;
        RegexNode root = parse_alternation();
        if (!eof()) {
            if (peek() == U')') throw SyntaxError("unbalanced ')'", pos_);
            throw SyntaxError("unexpected character", pos_);
        }
        return root;
    }

private:
    bool eof() const { return pos_ >= p_.size(); }
    char32_t peek(std::size_t ahead = 0) const { return pos_ + ahead < p_.size() ? p_[pos_ + ahead] : 0; }
    bool at_end_anchor() const { return peek() == U'$' && pos_ + 1 == p_.size(); }

    RegexNode parse_alternation() {
        std::vector<RegexNode> branches;
        branches.push_back(parse_concat());
        while (!eof() && peek() == U'|') {
            ++pos_;
            branches.push_back(parse_concat());
        }
        if (branches.size() == 1) return std::move(branches.front());
        RegexNode node;
        node.kind = RegexNode::Kind::Alternate;
        node.children = std::move(branches);
        return node;
    }

    RegexNode parse_concat() {
        std::vector<RegexNode> items;
        while (!eof() && peek() != U'|' && peek() != U')') {
            if (at_end_anchor()) {
                ++pos_;
                break;
            }
            items.push_back(parse_quantified());
        }
        if (items.empty()) return RegexNode{};
        if (items.size() == 1) return std::move(items.front());
        RegexNode node;
        node.kind = RegexNode::Kind::Concat;
        node.children = std::move(items);
        return node;
    }

    RegexNode parse_quantified() {
        RegexNode atom = parse_atom();
        for (;;) {
            if (eof()) break;
            const std::size_t at = pos_;
            std::size_t min = 0;
            std::size_t max = 0;
            bool unbounded = false;
            const char32_t c = peek();
            if (c == U'*') {
                unbounded = true;
                ++pos_;
            } else if (c == U'+') {
                min = 1;
                unbounded = true;
                ++pos_;
            } else if (c == U'?') {
                max = 1;
                ++pos_;
            } else if (c == U'{') {
                if (!parse_braces(min, max, unbounded)) break;
            } else {
                break;
            }
            if (!eof() && peek() == U'?') {
                ++pos_;  // lazy: same language under full-match semantics
            } else if (!eof() && peek() == U'+') {
                throw UnsupportedFeature("possessive quantifier at offset " + std::to_string(pos_));
            }
            if (!unbounded && min > max) throw SyntaxError("min repeat greater than max repeat", at);
            if (min > max_repeat_ || (!unbounded && max > max_repeat_))
                throw UnsupportedFeature("repetition count exceeds " + std::to_string(max_repeat_));
            RegexNode rep;
            rep.kind = RegexNode::Kind::Repeat;
            rep.min = min;
            rep.max = max;
            rep.unbounded = unbounded;
            rep.children.push_back(std::move(atom));
            atom = std::move(rep);
        }
        return atom;
    }

    // Parses {m}, {m,}, {,n}, {m,n}. Leaves pos_ untouched and returns false
    // when the brace is not a quantifier (it is then a literal).
    bool parse_braces(std::size_t& min, std::size_t& max, bool& unbounded) {
        std::size_t i = pos_ + 1;
        auto read_number = [&](std::optional<std::size_t>& out) {
            std::size_t value = 0;
            bool any = false;
            while (i < p_.size() && p_[i] >= U'0' && p_[i] <= U'9') {
                value = std::min<std::size_t>(value * 10 + (p_[i] - U'0'), 1u << 30);
                any = true;
                ++i;
            }
            if (any) out = value;
        };
        std::optional<std::size_t> lo;
        std::optional<std::size_t> hi;
        read_number(lo);
        bool comma = false;
        if (i < p_.size() && p_[i] == U',') {
            comma = true;
            ++i;
            read_number(hi);
        }
        if (i >= p_.size() || p_[i] != U'}') return false;
        if (!lo && !comma) return false;
        if (!lo && !hi) return false;
        min = lo.value_or(0);
        if (!comma) {
            max = min;
            unbounded = false;
        } else if (hi) {
            max = *hi;
            unbounded = false;
        } else {
            unbounded = true;
        }
        pos_ = i + 1;
        return true;
    }

    RegexNode parse_atom() {
        const std::size_t at = pos_;
        const char32_t c = peek();
        switch (c) {
        case U'(':
            return parse_group();
        case U'[':
            return parse_class();
        case U'.':
            ++pos_;
            return chars({{0, U'\n' - 1}, {U'\n' + 1, utf8::kMaxCodePoint}});
        case U'\\': {
            ++pos_;
            Escape e = parse_escape(false);
            if (e.single) return chars({{*e.single, *e.single}});
            return chars(std::move(e.set));
        }
        case U'*':
        case U'+':
        case U'?':
            throw SyntaxError("nothing to repeat", at);
        case U'{': {
            std::size_t mn = 0, mx = 0;
            bool ub = false;
            const std::size_t save = pos_;
            if (parse_braces(mn, mx, ub)) throw SyntaxError("nothing to repeat", save);
            ++pos_;
            return chars({{c, c}});
        }
        case U'^':
            throw UnsupportedFeature("'^' anchor is only supported at the start of the pattern");
        case U'$':
            throw UnsupportedFeature("'$' anchor is only supported at the end of the pattern");
        default:
            ++pos_;
            return chars({{c, c}});
        }
    }

    RegexNode parse_group() {
        const std::size_t open = pos_;
        ++pos_;
        if (peek() == U'?') {
            const char32_t k = peek(1);
            if (k == U':') {
                pos_ += 2;
            } else if (k == U'P' && peek(2) == U'<') {
                pos_ += 3;
                skip_group_name(open);
            } else if (k == U'<' && peek(2) != U'=' && peek(2) != U'!') {
                pos_ += 2;
                skip_group_name(open);
            } else if (k == U'=' || k == U'!' || k == U'<') {
                throw UnsupportedFeature("lookaround assertions are not supported");
            } else if (k == U'P' && peek(2) == U'=') {
                throw UnsupportedFeature("backreferences are not supported");
            } else {
                throw UnsupportedFeature("inline group flags are not supported");
            }
        }
        RegexNode inner = parse_alternation();
        if (eof() || peek() != U')') throw SyntaxError("missing ')'", open);
        ++pos_;
        return inner;
    }

    void skip_group_name(std::size_t open) {
        while (!eof() && peek() != U'>') ++pos_;
        if (eof()) throw SyntaxError("unterminated group name", open);
        ++pos_;
    }

    RegexNode parse_class() {
        const std::size_t open = pos_;
        ++pos_;
        bool negate = false;
        if (peek() == U'^' && pos_ < p_.size()) {
            negate = true;
            ++pos_;
        }
        std::vector<CodeRange> ranges;
        bool first = true;
        for (;;) {
            if (eof()) throw SyntaxError("unterminated character class", open);
            char32_t c = peek();
            if (c == U']' && !first) {
                ++pos_;
                break;
            }
            first = false;
            const std::size_t item_at = pos_;
            Escape lo = class_item();
            if (!lo.single) {
                ranges.insert(ranges.end(), lo.set.begin(), lo.set.end());
                continue;
            }
            if (peek() == U'-' && pos_ + 1 < p_.size() && peek(1) != U']') {
                ++pos_;
                Escape hi = class_item();
                if (!hi.single) throw SyntaxError("bad character range", item_at);
                if (*hi.single < *lo.single) throw SyntaxError("bad character range", item_at);
                ranges.push_back({*lo.single, *hi.single});
            } else {
                ranges.push_back({*lo.single, *lo.single});
            }
        }
        ranges = normalize_ranges(std::move(ranges));
        if (negate) ranges = complement_ranges(ranges);
        return chars(std::move(ranges));
    }

    Escape class_item() {
        const char32_t c = peek();
        ++pos_;
        if (c == U'\\') return parse_escape(true);
        return Escape{c, {}};
    }

    // pos_ points just past the backslash.
    Escape parse_escape(bool in_class) {
        const std::size_t at = pos_ - 1;
        if (eof()) throw SyntaxError("trailing backslash", at);
        const char32_t c = peek();
        ++pos_;
        switch (c) {
        case U'd': return {std::nullopt, digit_ranges()};
        case U'D': return {std::nullopt, complement_ranges(digit_ranges())};
        case U'w': return {std::nullopt, word_ranges()};
        case U'W': return {std::nullopt, complement_ranges(word_ranges())};
        case U's': return {std::nullopt, space_ranges()};
        case U'S': return {std::nullopt, complement_ranges(space_ranges())};
        case U'n': return {U'\n', {}};
        case U't': return {U'\t', {}};
        case U'r': return {U'\r', {}};
        case U'f': return {U'\f', {}};
        case U'v': return {U'\v', {}};
        case U'a': return {U'\a', {}};
        case U'0': return {U'\0', {}};
        case U'x': {
            if (peek() == U'{') {
                ++pos_;
                char32_t v = 0;
                std::size_t digits = 0;
                while (!eof() && is_hex(peek())) {
                    v = v * 16 + hex_value(peek());
                    ++pos_;
                    if (++digits > 6) throw SyntaxError("bad \\x{...} escape", at);
                }
                if (digits == 0 || eof() || peek() != U'}') throw SyntaxError("bad \\x{...} escape", at);
                ++pos_;
                return {checked_code_point(v, at), {}};
            }
            return {read_hex(2, at), {}};
        }
        case U'u': return {read_hex(4, at), {}};
        case U'U': return {read_hex(8, at), {}};
        case U'b':
            if (in_class) return {U'\b', {}};
            throw UnsupportedFeature("word-boundary assertions are not supported");
        case U'B':
        case U'A':
        case U'Z':
        case U'z':
        case U'G':
            throw UnsupportedFeature(std::string("assertion \\") + static_cast<char>(c) + " is not supported");
        case U'p':
        case U'P':
            throw UnsupportedFeature("Unicode property classes are not supported");
        case U'k':
            throw UnsupportedFeature("backreferences are not supported");
        default:
            break;
        }
        if (c >= U'1' && c <= U'9') throw UnsupportedFeature("backreferences are not supported");
        if ((c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z') || (c >= U'0' && c <= U'9'))
            throw SyntaxError("bad escape", at);
        return {c, {}};
    }

    char32_t read_hex(std::size_t digits, std::size_t at) {
        char32_t v = 0;
        for (std::size_t i = 0; i < digits; ++i) {
            if (eof() || !is_hex(peek())) throw SyntaxError("bad hex escape", at);
            v = v * 16 + hex_value(peek());
            ++pos_;
        }
        return checked_code_point(v, at);
    }

    static char32_t checked_code_point(char32_t v, std::size_t at) {
        if (v > utf8::kMaxCodePoint) throw SyntaxError("code point out of range", at);
        return v;
    }

    std::u32string_view p_;
    std::size_t pos_ = 0;
    std::size_t max_repeat_;
};

} // namespace

RegexNode parse_regex(std::u32string_view pattern, std::size_t max_repeat) {
    return Parser(pattern, max_repeat).parse();
}

} // namespace dingo::detail
