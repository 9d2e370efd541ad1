#include "dingo/probability_block.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dingo/error.hpp"

namespace dingo {

ProbabilityBlock::ProbabilityBlock(std::size_t length, std::size_t vocab_size)
    : length_(length), vocab_size_(vocab_size), data_(length * vocab_size, 0.0f) {}

ProbabilityBlock::ProbabilityBlock(std::size_t length, std::size_t vocab_size, std::vector<float> data)
    : length_(length), vocab_size_(vocab_size), data_(std::move(data)) {
    if (data_.size() != length_ * vocab_size_)
        throw DimensionMismatch("block data has " + std::to_string(data_.size()) + " entries, expected " +
                                std::to_string(length_ * vocab_size_));
}

void ProbabilityBlock::set_one_hot(std::size_t i, TokenId t) {
    if (t >= vocab_size_) throw InvalidToken("token id out of range");
    auto r = row(i);
    std::fill(r.begin(), r.end(), 0.0f);
    r[t] = 1.0f;
}

bool ProbabilityBlock::is_one_hot(std::size_t i) const {
    auto r = row(i);
    std::size_t ones = 0;
    for (float v : r) {
        if (v == 1.0f) {
            ++ones;
        } else if (v != 0.0f) {
            return false;
        }
    }
    return ones == 1;
}

ProbabilityBlock ProbabilityBlock::slice(std::size_t first, std::size_t count) const {
    if (first + count > length_) throw DimensionMismatch("slice exceeds block length");
    std::vector<float> data(data_.begin() + static_cast<std::ptrdiff_t>(first * vocab_size_),
                            data_.begin() + static_cast<std::ptrdiff_t>((first + count) * vocab_size_));
    return ProbabilityBlock(count, vocab_size_, std::move(data));
}

void ProbabilityBlock::check_non_negative() const {
    for (std::size_t i = 0; i < data_.size(); ++i) {
        const float v = data_[i];
        if (!std::isfinite(v) || v < 0.0f)
            throw InvalidArgument("probability at row " + std::to_string(i / vocab_size_) + " is negative or not finite");
    }
}

void ProbabilityBlock::check_simplex(double tolerance) const {
    check_non_negative();
    for (std::size_t i = 0; i < length_; ++i) {
        double sum = 0.0;
        for (float v : row(i)) {
            if (v > 1.0f) throw InvalidArgument("probability above 1 at row " + std::to_string(i));
            sum += v;
        }
        if (std::abs(sum - 1.0) > tolerance)
            throw InvalidArgument("row " + std::to_string(i) + " sums to " + std::to_string(sum));
    }
}

} // namespace dingo
