#include "dingo/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "dingo/error.hpp"
#include "dingo/utf8.hpp"

namespace dingo::io {

using nlohmann::json;

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed for " + path.string());
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    write_bytes(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

TokenVocabulary parse_vocabulary_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("vocabulary JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("tokens") || !doc["tokens"].is_array())
        throw FormatError("vocabulary JSON needs a \"tokens\" array");
    std::vector<std::string> tokens;
    for (const auto& t : doc["tokens"]) {
        if (!t.is_string()) throw FormatError("vocabulary tokens must be strings");
        tokens.push_back(t.get<std::string>());
    }
    TokenId mask_id = kNoToken;
    if (!doc.contains("mask")) throw FormatError("vocabulary JSON needs a \"mask\" entry");
    const json& mask = doc["mask"];
    if (mask.is_string()) {
        const std::string m = mask.get<std::string>();
        auto it = std::find(tokens.begin(), tokens.end(), m);
        if (it == tokens.end()) {
            mask_id = static_cast<TokenId>(tokens.size());
            tokens.push_back(m);
        } else {
            mask_id = static_cast<TokenId>(it - tokens.begin());
        }
    } else if (mask.is_number_unsigned()) {
        mask_id = mask.get<TokenId>();
    } else {
        throw FormatError("vocabulary \"mask\" must be a string or a token id");
    }
    std::vector<TokenId> special;
    if (doc.contains("special")) {
        if (!doc["special"].is_array()) throw FormatError("vocabulary \"special\" must be an array");
        for (const auto& s : doc["special"]) {
            if (!s.is_number_unsigned()) throw FormatError("special ids must be non-negative integers");
            special.push_back(s.get<TokenId>());
        }
    }
    return TokenVocabulary(std::move(tokens), mask_id, std::move(special));
}

std::string vocabulary_to_json(const TokenVocabulary& vocab) {
    json doc = {{"tokens", vocab.tokens()}, {"mask", vocab.mask_id()}, {"special", vocab.special_ids()}};
    return doc.dump();
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) throw FormatError("base64 length is not a multiple of 4");
    std::vector<std::uint8_t> out(text.size() / 4 * 3);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                  static_cast<int>(text.size()));
    if (n < 0) throw FormatError("invalid base64 data");
    // EVP_DecodeBlock keeps the bytes produced by '=' padding.
    std::size_t pad = 0;
    for (std::size_t i = text.size(); i > 0 && text[i - 1] == '=' && pad < 2; --i) ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

TokenVocabulary load_tiktoken(const std::filesystem::path& path, const std::string& mask,
                              const std::vector<std::string>& specials) {
    const std::string text = read_text(path);
    std::vector<std::string> tokens;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string_view line(text.data() + pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        const std::size_t space = line.find(' ');
        if (space == std::string_view::npos) throw FormatError("tiktoken line " + std::to_string(line_no) + ": no rank");
        std::size_t rank = 0;
        const std::string_view rank_text = line.substr(space + 1);
        auto [ptr, ec] = std::from_chars(rank_text.data(), rank_text.data() + rank_text.size(), rank);
        if (ec != std::errc() || ptr != rank_text.data() + rank_text.size())
            throw FormatError("tiktoken line " + std::to_string(line_no) + ": bad rank");
        if (rank != tokens.size()) throw FormatError("tiktoken ranks must be dense and ascending");
        const auto bytes = base64_decode(line.substr(0, space));
        const std::string raw(bytes.begin(), bytes.end());
        tokens.push_back(utf8::encode(utf8::decode_lossy(raw)));
    }
    std::vector<TokenId> special_ids;
    for (const auto& s : specials) {
        special_ids.push_back(static_cast<TokenId>(tokens.size()));
        tokens.push_back(s);
    }
    const TokenId mask_id = static_cast<TokenId>(tokens.size());
    tokens.push_back(mask);
    return TokenVocabulary(std::move(tokens), mask_id, std::move(special_ids));
}

TokenVocabulary load_vocabulary(const std::filesystem::path& path, const std::string& tiktoken_mask) {
    const std::string text = read_text(path);
    const std::size_t first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') return parse_vocabulary_json(text);
    return load_tiktoken(path, tiktoken_mask);
}

ProbabilityBlock parse_block_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("block JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("rows") || !doc["rows"].is_array())
        throw FormatError("block JSON needs a \"rows\" array");
    const auto& rows = doc["rows"];
    const std::size_t d = doc.value("d", rows.size());
    if (d != rows.size()) throw DimensionMismatch("\"d\" does not match the number of rows");
    std::size_t m = 0;
    if (doc.contains("vocab_size")) {
        m = doc["vocab_size"].get<std::size_t>();
    } else if (!rows.empty()) {
        m = rows[0].size();
    }
    std::vector<float> data;
    data.reserve(d * m);
    for (std::size_t i = 0; i < d; ++i) {
        if (!rows[i].is_array() || rows[i].size() != m)
            throw DimensionMismatch("row " + std::to_string(i) + " does not have " + std::to_string(m) + " entries");
        for (const auto& v : rows[i]) {
            if (!v.is_number()) throw FormatError("block entries must be numbers");
            data.push_back(v.get<float>());
        }
    }
    return ProbabilityBlock(d, m, std::move(data));
}

std::string block_to_json(const ProbabilityBlock& block) {
    json rows = json::array();
    for (std::size_t i = 0; i < block.length(); ++i) {
        auto r = block.row(i);
        rows.push_back(std::vector<float>(r.begin(), r.end()));
    }
    json doc = {{"d", block.length()}, {"vocab_size", block.vocab_size()}, {"rows", std::move(rows)}};
    return doc.dump();
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
    return v;
}

} // namespace

ProbabilityBlock parse_block_binary(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 16) throw FormatError("probability block truncated");
    if (std::memcmp(bytes.data(), "DGPB", 4) != 0) throw FormatError("bad probability block magic");
    const std::uint32_t version = get_u32(bytes, 4);
    if (version != kBlockFormatVersion)
        throw VersionMismatch("probability block version " + std::to_string(version) + " is not supported");
    const std::uint64_t d = get_u32(bytes, 8);
    const std::uint64_t m = get_u32(bytes, 12);
    if (bytes.size() - 16 != d * m * 4)
        throw FormatError("probability block payload has " + std::to_string(bytes.size() - 16) + " bytes, expected " +
                          std::to_string(d * m * 4));
    std::vector<float> data(d * m);
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = std::bit_cast<float>(get_u32(bytes, 16 + 4 * i));
    return ProbabilityBlock(d, m, std::move(data));
}

std::vector<std::uint8_t> block_to_binary(const ProbabilityBlock& block) {
    std::vector<std::uint8_t> out{'D', 'G', 'P', 'B'};
    out.reserve(16 + block.data().size() * 4);
    put_u32(out, kBlockFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(block.length()));
    put_u32(out, static_cast<std::uint32_t>(block.vocab_size()));
    for (float v : block.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

ProbabilityBlock load_block(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), "DGPB", 4) == 0) return parse_block_binary(bytes);
    return parse_block_json(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string dfa_to_json(const CharDfa& dfa) {
    json classes = json::array();
    for (std::size_t c = 0; c < dfa.num_classes(); ++c) {
        const CodeRange r = dfa.class_range(c);
        classes.push_back({static_cast<std::uint32_t>(r.lo), static_cast<std::uint32_t>(r.hi)});
    }
    json trans = json::array();
    for (StateId q = 0; q < dfa.num_states(); ++q) {
        std::vector<StateId> row(dfa.num_classes());
        for (std::size_t c = 0; c < dfa.num_classes(); ++c) row[c] = dfa.next(q, c);
        trans.push_back(std::move(row));
    }
    json doc = {{"states", dfa.num_states()},
                {"start", dfa.start()},
                {"dead", dfa.dead_state()},
                {"accepting", dfa.accepting().to_vector()},
                {"classes", std::move(classes)},
                {"trans", std::move(trans)}};
    return doc.dump();
}

} // namespace dingo::io
