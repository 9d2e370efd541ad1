#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dingo/types.hpp"

namespace dingo {

/// Token strings (UTF-8) with dense ids, one reserved mask id, and optional
/// special ids that never take part in decoding.
class TokenVocabulary {
public:
    TokenVocabulary(std::vector<std::string> tokens, TokenId mask_id, std::vector<TokenId> special_ids = {});

    std::size_t size() const { return tokens_.size(); }
    const std::string& token(TokenId id) const { return tokens_.at(id); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    TokenId mask_id() const { return mask_id_; }
    bool is_mask(TokenId id) const { return id == mask_id_; }
    bool is_special(TokenId id) const;
    const std::vector<TokenId>& special_ids() const { return special_; }

    // First id whose string equals `text`.
    std::optional<TokenId> find(std::string_view text) const;

    // 64-bit FNV-1a fingerprint of tokens, mask id and special ids.
    std::uint64_t fingerprint() const { return fingerprint_; }

    // Concatenation of token strings; the mask renders as `mask_placeholder`.
    std::string render(const std::vector<TokenId>& ids, std::string_view mask_placeholder) const;

private:
    std::vector<std::string> tokens_;
    TokenId mask_id_;
    std::vector<TokenId> special_;  // sorted
    std::uint64_t fingerprint_ = 0;
};

/// Builds a vocabulary from plain strings; `mask` is appended unless present.
TokenVocabulary make_vocabulary(std::vector<std::string> tokens, std::string mask);

} // namespace dingo
