#include "dingo/vocabulary.hpp"

#include <algorithm>

#include "dingo/error.hpp"

namespace dingo {

namespace {

class Fnv1a {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            hash_ ^= p[i];
            hash_ *= 0x100000001b3ULL;
        }
    }
    void u64(std::uint64_t v) {
        unsigned char buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
        bytes(buf, 8);
    }
    std::uint64_t value() const { return hash_; }

private:
    std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

} // namespace

TokenVocabulary::TokenVocabulary(std::vector<std::string> tokens, TokenId mask_id, std::vector<TokenId> special_ids)
    : tokens_(std::move(tokens)), mask_id_(mask_id), special_(std::move(special_ids)) {
    if (tokens_.empty()) throw InvalidArgument("vocabulary is empty");
    if (tokens_.size() >= kNoToken) throw InvalidArgument("vocabulary too large");
    if (mask_id_ >= tokens_.size()) throw InvalidArgument("mask id out of range");
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (tokens_[i].empty()) throw InvalidArgument("token " + std::to_string(i) + " is empty");
    }
    std::sort(special_.begin(), special_.end());
    special_.erase(std::unique(special_.begin(), special_.end()), special_.end());
    for (TokenId s : special_) {
        if (s >= tokens_.size()) throw InvalidArgument("special token id out of range");
        if (s == mask_id_) throw InvalidArgument("mask token cannot also be a special token");
    }

    Fnv1a h;
    h.u64(tokens_.size());
    for (const auto& t : tokens_) {
        h.u64(t.size());
        h.bytes(t.data(), t.size());
    }
    h.u64(mask_id_);
    h.u64(special_.size());
    for (TokenId s : special_) h.u64(s);
    fingerprint_ = h.value();
}

bool TokenVocabulary::is_special(TokenId id) const {
    return std::binary_search(special_.begin(), special_.end(), id);
}

std::optional<TokenId> TokenVocabulary::find(std::string_view text) const {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (tokens_[i] == text) return static_cast<TokenId>(i);
    }
    return std::nullopt;
}

std::string TokenVocabulary::render(const std::vector<TokenId>& ids, std::string_view mask_placeholder) const {
    std::string out;
    for (TokenId id : ids) {
        if (id == mask_id_) {
            out += mask_placeholder;
        } else {
            out += token(id);
        }
    }
    return out;
}

TokenVocabulary make_vocabulary(std::vector<std::string> tokens, std::string mask) {
    auto it = std::find(tokens.begin(), tokens.end(), mask);
    TokenId mask_id = 0;
    if (it == tokens.end()) {
        mask_id = static_cast<TokenId>(tokens.size());
        tokens.push_back(std::move(mask));
    } else {
        mask_id = static_cast<TokenId>(it - tokens.begin());
    }
    return TokenVocabulary(std::move(tokens), mask_id);
}

} // namespace dingo
