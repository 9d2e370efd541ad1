#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace dingo::utf8 {

inline constexpr char32_t kReplacement = 0xFFFD;
inline constexpr char32_t kMaxCodePoint = 0x10FFFF;

// Decodes one scalar starting at `pos` and advances it. Malformed input
// yields nullopt and advances by one byte.
std::optional<char32_t> next(std::string_view text, std::size_t& pos);

// Malformed sequences become U+FFFD.
std::u32string decode_lossy(std::string_view text);

// Throws dingo::FormatError on malformed input.
std::u32string decode_strict(std::string_view text);

void append(std::string& out, char32_t cp);
std::string encode(std::u32string_view text);

} // namespace dingo::utf8
