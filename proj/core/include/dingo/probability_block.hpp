#pragma once

#include <span>
#include <vector>

#include "dingo/types.hpp"

namespace dingo {

/// Per-position token probabilities for one block: `length()` rows of
/// `vocab_size()` float32 entries, row-major.
class ProbabilityBlock {
public:
    ProbabilityBlock() = default;
    ProbabilityBlock(std::size_t length, std::size_t vocab_size);
    ProbabilityBlock(std::size_t length, std::size_t vocab_size, std::vector<float> data);

    std::size_t length() const { return length_; }
    std::size_t vocab_size() const { return vocab_size_; }

    std::span<float> row(std::size_t i) { return {data_.data() + i * vocab_size_, vocab_size_}; }
    std::span<const float> row(std::size_t i) const { return {data_.data() + i * vocab_size_, vocab_size_}; }
    float at(std::size_t i, TokenId t) const { return data_[i * vocab_size_ + t]; }
    const std::vector<float>& data() const { return data_; }

    void set_one_hot(std::size_t i, TokenId t);
    void set_masked(std::size_t i, TokenId mask_id) { set_one_hot(i, mask_id); }
    bool is_masked(std::size_t i, TokenId mask_id) const { return at(i, mask_id) == 1.0f; }
    // Some entry equals 1 and all others are 0.
    bool is_one_hot(std::size_t i) const;

    // Rows [first, first + count) as a new block.
    ProbabilityBlock slice(std::size_t first, std::size_t count) const;

    // Throws InvalidArgument for negative or non-finite entries.
    void check_non_negative() const;
    // Additionally requires every row to sum to 1 within `tolerance`.
    void check_simplex(double tolerance = 1e-4) const;

    bool operator==(const ProbabilityBlock&) const = default;

private:
    std::size_t length_ = 0;
    std::size_t vocab_size_ = 0;
    std::vector<float> data_;
};

} // namespace dingo
