#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dingo/probability_block.hpp"
#include "dingo/regex_automaton.hpp"
#include "dingo/vocabulary.hpp"

namespace dingo::io {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);

/// {"tokens": [...], "mask": "<str>" | id, "special": [ids]}. A mask string
/// missing from "tokens" is appended.
TokenVocabulary parse_vocabulary_json(std::string_view text);
std::string vocabulary_to_json(const TokenVocabulary& vocab);

/// tiktoken rank file ("<base64> <rank>" per line, ranks dense from 0).
/// Token bytes are decoded as UTF-8 with U+FFFD for invalid sequences.
/// `specials` are appended as special ids, then `mask`.
TokenVocabulary load_tiktoken(const std::filesystem::path& path, const std::string& mask,
                              const std::vector<std::string>& specials = {});

/// Loads JSON or tiktoken depending on the file contents.
TokenVocabulary load_vocabulary(const std::filesystem::path& path, const std::string& tiktoken_mask = "<|mask|>");

std::vector<std::uint8_t> base64_decode(std::string_view text);

/// {"d": N, "vocab_size": M, "rows": [[...], ...]}
ProbabilityBlock parse_block_json(std::string_view text);
std::string block_to_json(const ProbabilityBlock& block);

/// "DGPB", u32 version, u32 d, u32 vocab_size, d*M float32, little-endian.
inline constexpr std::uint32_t kBlockFormatVersion = 1;
ProbabilityBlock parse_block_binary(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> block_to_binary(const ProbabilityBlock& block);

/// Either format, chosen by the leading magic.
ProbabilityBlock load_block(const std::filesystem::path& path);

/// {"states", "start", "dead", "accepting", "classes": [[lo, hi], ...], "trans": [[...], ...]}
std::string dfa_to_json(const CharDfa& dfa);

} // namespace dingo::io
