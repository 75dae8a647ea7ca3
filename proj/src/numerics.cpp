#include "headbias/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace headbias {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
}

std::uint64_t SeededRng::next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double SeededRng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
}

std::size_t SeededRng::next_index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("next_index: n must be positive");
    const std::uint64_t bound = n;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                (std::numeric_limits<std::uint64_t>::max() % bound);
    std::uint64_t draw;
    do {
        draw = next_u64();
    } while (draw >= limit);
    return static_cast<std::size_t>(draw % bound);
}

double SeededRng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // u1 in (0, 1] so the log never sees zero.
    double u1 = 1.0 - next_double();
    double u2 = next_double();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * kPi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::uint64_t SeededRng::fork_seed() {
    return next_u64();
}

bool all_finite(const Vector& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Vector softmax(const Vector& logits) {
    if (logits.empty()) throw std::invalid_argument("softmax: empty input");
    if (!all_finite(logits)) throw std::invalid_argument("softmax: non-finite input");
    const double shift = *std::max_element(logits.begin(), logits.end());
    Vector out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - shift);
        total += out[i];
    }
    for (double& p : out) p /= total;
    return out;
}

double sigmoid(double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("sigmoid: non-finite input");
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Vector affine(const Matrix& w, const Vector& x, const Vector& b) {
    if (w.cols() != x.size()) {
        throw ShapeError("affine: matrix has " + std::to_string(w.cols()) +
                         " columns but input has length " + std::to_string(x.size()));
    }
    if (w.rows() != b.size()) {
        throw ShapeError("affine: matrix has " + std::to_string(w.rows()) +
                         " rows but bias has length " + std::to_string(b.size()));
    }
    Vector out(b);
    for (std::size_t r = 0; r < w.rows(); ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < w.cols(); ++c) acc += w(r, c) * x[c];
        out[r] += acc;
    }
    return out;
}

double log_sum_exp(const Vector& v) {
    if (v.empty()) throw std::invalid_argument("log_sum_exp: empty input");
    if (!all_finite(v)) throw std::invalid_argument("log_sum_exp: non-finite input");
    const double shift = *std::max_element(v.begin(), v.end());
    double total = 0.0;
    for (double x : v) total += std::exp(x - shift);
    return shift + std::log(total);
}

}  // namespace headbias
