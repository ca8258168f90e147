#pragma once

// Dense row-major double matrices and seeded randomness.  Everything else in
// the library is built on these; keeping the numeric core tiny and
// dependency-free makes runs replayable bit-for-bit.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rrl {

class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(rows * cols, fill) {}
    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows)
        : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
        v_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_)
                throw std::invalid_argument("DenseMatrix: ragged initializer");
            v_.insert(v_.end(), r.begin(), r.end());
        }
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return v_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return v_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return v_[r * cols_ + c]; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    double* row(std::size_t r) { return v_.data() + r * cols_; }
    const double* row(std::size_t r) const { return v_.data() + r * cols_; }

    bool operator==(const DenseMatrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && v_ == o.v_;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> v_;
};

// Raises if any entry is NaN/Inf; modules call this where non-finite values
// would otherwise propagate silently (the vanishing-gradient analysis depends
// on honest doubles, not on masked overflow).
inline void check_finite(const DenseMatrix& m, const char* what) {
    for (std::size_t i = 0; i < m.size(); ++i)
        if (!std::isfinite(m.data()[i]))
            throw std::runtime_error(std::string(what) + ": non-finite value");
}

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: inner dimensions " + std::to_string(a.cols()) +
                                    " and " + std::to_string(b.rows()) + " differ");
    DenseMatrix out(a.rows(), b.cols());
    // i-k-j order: the inner loop walks b and out contiguously.  Zero a-entries
    // are skipped; with finite b this cannot change the sum and it makes the
    // 0/1 matrices of the discrete passes cheap.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* orow = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

inline DenseMatrix transpose(const DenseMatrix& m) {
    DenseMatrix out(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out(c, r) = m(r, c);
    return out;
}

template <typename F>
DenseMatrix map_elementwise(const DenseMatrix& m, F f) {
    DenseMatrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.size(); ++i) out.data()[i] = f(m.data()[i]);
    check_finite(out, "map_elementwise");
    return out;
}

// Deterministic RNG: mt19937_64 raw stream, doubles via the 53-bit mantissa
// trick, bounded ints via 128-bit multiply-shift.  No std distributions, so
// the stream is identical on every platform, which is what lets a stored seed
// replay an entire training run.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    std::uint64_t next_u64() {
        // splitmix64: a single u64 of state (trivial to note in the model
        // header), well mixed, and identical on every platform.
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1): top 53 bits of the stream.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) {
        if (!(lo < hi)) throw std::invalid_argument("Rng::uniform: lo >= hi");
        return lo + uniform01() * (hi - lo);
    }

    // Uniform integer in [0, n).
    std::size_t below(std::size_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below: n == 0");
        return static_cast<std::size_t>(
            (static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

    // Independent child stream; used to give each fold/epoch its own seed
    // without the streams overlapping.
    Rng derive(std::uint64_t stream) const {
        std::uint64_t z = state_ ^ (0x94d049bb133111ebull * (stream + 1));
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return Rng(z ^ (z >> 31));
    }

    static constexpr const char* algorithm() { return "splitmix64"; }

private:
    std::uint64_t state_;
};

inline DenseMatrix uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols,
                                  double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("uniform_matrix: lo >= hi");
    DenseMatrix out(rows, cols);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = lo + rng.uniform01() * (hi - lo);
    return out;
}

}  // namespace rrl
