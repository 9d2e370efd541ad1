#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

namespace dingo {

using StateId = std::uint32_t;
using TokenId = std::uint32_t;

inline constexpr StateId kNoState = std::numeric_limits<StateId>::max();
inline constexpr TokenId kNoToken = std::numeric_limits<TokenId>::max();

// Fixed-capacity bitset over state ids.
class StateSet {
public:
    StateSet() = default;
    explicit StateSet(std::size_t capacity) : capacity_(capacity), words_((capacity + 63) / 64, 0) {}

    std::size_t capacity() const { return capacity_; }

    bool contains(StateId q) const {
        return q < capacity_ && ((words_[q >> 6] >> (q & 63)) & 1u) != 0;
    }
    void insert(StateId q) { words_[q >> 6] |= std::uint64_t{1} << (q & 63); }
    void erase(StateId q) { words_[q >> 6] &= ~(std::uint64_t{1} << (q & 63)); }
    void clear() { std::fill(words_.begin(), words_.end(), 0); }

    std::size_t count() const {
        std::size_t n = 0;
        for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
        return n;
    }
    bool empty() const {
        for (auto w : words_)
            if (w != 0) return false;
        return true;
    }

    bool intersects(const StateSet& other) const {
        const std::size_t n = std::min(words_.size(), other.words_.size());
        for (std::size_t i = 0; i < n; ++i)
            if ((words_[i] & other.words_[i]) != 0) return true;
        return false;
    }

    StateSet& operator|=(const StateSet& other) {
        const std::size_t n = std::min(words_.size(), other.words_.size());
        for (std::size_t i = 0; i < n; ++i) words_[i] |= other.words_[i];
        return *this;
    }

    // Ascending state ids.
    std::vector<StateId> to_vector() const {
        std::vector<StateId> out;
        for (std::size_t w = 0; w < words_.size(); ++w) {
            std::uint64_t bits = words_[w];
            while (bits != 0) {
                out.push_back(static_cast<StateId>(w * 64 + static_cast<std::size_t>(std::countr_zero(bits))));
                bits &= bits - 1;
            }
        }
        return out;
    }

    const std::vector<std::uint64_t>& words() const { return words_; }

    bool operator==(const StateSet&) const = default;

private:
    std::size_t capacity_ = 0;
    std::vector<std::uint64_t> words_;
};

} // namespace dingo
