#pragma once

// Binarization layer: fixed random lower/upper bounds turn each continuous
// feature into 2k Boolean comparison atoms.  The bounds are sampled once from
// the training data's observed ranges and never trained; the logical layers
// above learn which atoms matter.

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "rrl/dataset.hpp"
#include "rrl/matrix.hpp"

namespace rrl {

struct BinarizationBounds {
    std::size_t k = 0;       // bounds per side
    DenseMatrix lower;       // m x k thresholds T
    DenseMatrix upper;       // m x k thresholds H
    std::vector<double> feat_min, feat_max;  // observed sampling ranges

    std::size_t m() const { return lower.rows(); }
    std::size_t n_atoms() const { return 2 * k * m(); }
};

inline BinarizationBounds sample_bounds(const Dataset& ds, std::size_t k, Rng& rng) {
    if (k < 1) throw std::invalid_argument("sample_bounds: k must be >= 1");
    BinarizationBounds b;
    b.k = k;
    const std::size_t m = ds.continuous.cols();
    b.lower = DenseMatrix(m, k);
    b.upper = DenseMatrix(m, k);
    b.feat_min.resize(m);
    b.feat_max.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        double lo = ds.continuous(0, j), hi = lo;
        for (std::size_t i = 1; i < ds.n(); ++i) {
            lo = std::min(lo, ds.continuous(i, j));
            hi = std::max(hi, ds.continuous(i, j));
        }
        b.feat_min[j] = lo;
        b.feat_max[j] = hi;
        for (std::size_t i = 0; i < k; ++i) {
            // Constant feature: every bound collapses to the single observed
            // value (all its atoms become constants, pruned at extraction).
            b.lower(j, i) = lo == hi ? lo : rng.uniform(lo, hi);
            b.upper(j, i) = lo == hi ? lo : rng.uniform(lo, hi);
        }
    }
    return b;
}

// Per feature j the block is [q(c_j - T_1..k), q(H_1..k - c_j)] with
// q(x) = 1 iff x > 0; equality at a bound gives 0.
inline std::vector<double> binarize(const BinarizationBounds& b, const std::vector<double>& c) {
    if (c.size() != b.m())
        throw std::invalid_argument("binarize: expected " + std::to_string(b.m()) +
                                    " continuous values, got " + std::to_string(c.size()));
    std::vector<double> out;
    out.reserve(b.n_atoms());
    for (std::size_t j = 0; j < b.m(); ++j) {
        for (std::size_t i = 0; i < b.k; ++i) out.push_back(c[j] > b.lower(j, i) ? 1.0 : 0.0);
        for (std::size_t i = 0; i < b.k; ++i) out.push_back(c[j] < b.upper(j, i) ? 1.0 : 0.0);
    }
    return out;
}

// u0 = binarized continuous block followed by the one-hot binary block.
inline std::vector<double> assemble_u0(const BinarizationBounds& b,
                                       const std::vector<double>& c,
                                       const std::vector<double>& binary) {
    std::vector<double> u0 = binarize(b, c);
    u0.insert(u0.end(), binary.begin(), binary.end());
    return u0;
}

inline std::vector<double> assemble_u0(const BinarizationBounds& b, const Dataset& ds,
                                       std::size_t row) {
    std::vector<double> c(ds.continuous.row(row), ds.continuous.row(row) + ds.continuous.cols());
    std::vector<double> bin(ds.binary.row(row), ds.binary.row(row) + ds.binary.cols());
    return assemble_u0(b, c, bin);
}

// Whole-dataset u0 as an N x (2km + b) matrix; the training loop works on
// mini-batch slices of this.
inline DenseMatrix assemble_u0_matrix(const BinarizationBounds& b, const Dataset& ds) {
    const std::size_t n0 = b.n_atoms() + ds.binary.cols();
    DenseMatrix out(ds.n(), n0);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        std::vector<double> u0 = assemble_u0(b, ds, i);
        for (std::size_t j = 0; j < n0; ++j) out(i, j) = u0[j];
    }
    return out;
}

namespace detail {

// 6 significant digits for display; the model file keeps full precision.
inline std::string format_bound(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace detail

// One atom name per u0 dimension, in assembly order: continuous comparisons
// first, then `feature == category` for each one-hot dimension.
inline std::vector<std::string> bound_feature_names(const BinarizationBounds& b,
                                                    const FeatureSchema& schema) {
    std::vector<std::string> names;
    std::size_t j = 0;
    for (const auto& col : schema.columns) {
        if (col.kind != ColumnKind::continuous) continue;
        for (std::size_t i = 0; i < b.k; ++i)
            names.push_back(col.name + " > " + detail::format_bound(b.lower(j, i)));
        for (std::size_t i = 0; i < b.k; ++i)
            names.push_back(col.name + " < " + detail::format_bound(b.upper(j, i)));
        ++j;
    }
    for (const auto& col : schema.columns) {
        if (col.kind != ColumnKind::discrete) continue;
        for (const auto& cat : col.categories) names.push_back(col.name + " == " + cat);
    }
    return names;
}

}  // namespace rrl
