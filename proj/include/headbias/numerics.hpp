#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "headbias/errors.hpp"

namespace headbias {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Model sizes here are small (a few
// hundred rows/cols at most), so there is no sparse or blocked variant.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    Vector& data() noexcept { return data_; }
    const Vector& data() const noexcept { return data_; }

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Vector data_;
};

// Deterministic 64-bit generator: xoshiro256** (Blackman & Vigna, public
// domain), state seeded through splitmix64. Distributions below are
// implemented by hand so streams are bit-identical across platforms and
// standard libraries. Instances are single-owner; never share across threads.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed);

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64();

    // Uniform in [0, 1) with 53 random bits.
    double next_double();

    // Uniform in [lo, hi).
    double uniform(double lo, double hi);

    // Uniform in {0, 1, ..., n-1}; unbiased via rejection. n must be > 0.
    std::size_t next_index(std::size_t n);

    // Standard normal via Box-Muller (the spare value is cached).
    double normal();

    // Derives an independent sub-stream seed; used to give each component of
    // a run (init, shuffling, relabeling, ...) its own stream.
    std::uint64_t fork_seed();

private:
    std::array<std::uint64_t, 4> state_{};
    std::uint64_t seed_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// In-place Fisher-Yates shuffle driven by SeededRng (std::shuffle is not
// specified bit-exactly by the standard).
template <typename T>
void shuffle(std::vector<T>& values, SeededRng& rng) {
    if (values.size() < 2) return;
    for (std::size_t i = values.size() - 1; i > 0; --i) {
        std::size_t j = rng.next_index(i + 1);
        std::swap(values[i], values[j]);
    }
}

// Numerically stable softmax: subtracts the maximum logit before
// exponentiating. Output sums to 1 and is invariant to adding a common
// constant to all logits. Throws std::invalid_argument on empty or
// non-finite input.
Vector softmax(const Vector& logits);

// Branch-stable logistic function; never overflows, exact symmetry
// sigmoid(-x) == 1 - sigmoid(x) up to rounding.
double sigmoid(double x);

// w * x + b. Throws ShapeError on dimension mismatch.
Vector affine(const Matrix& w, const Vector& x, const Vector& b);

// log(sum(exp(v))) with max-shift; v must be non-empty and finite.
double log_sum_exp(const Vector& v);

bool all_finite(const Vector& v);

}  // namespace headbias
