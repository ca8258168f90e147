#pragma once

// The three logical activation function (LAF) families, scalar and batched,
// forward and backward, plus the exact discrete conjunction/disjunction they
// all approximate.
//
//   original:      Conj(h,W_i) = prod_j (1 - W_ij (1 - h_j))
//                  Disj(h,W_i) = 1 - prod_j (1 - h_j W_ij)
//   log-improved:  the same products routed through P(v) = 1/(1 - log v),
//                  with a small epsilon added inside each product term;
//                  computed as a sum of logs so fan-in ~1000 cannot underflow
//   nlaf:          Q(H,W) = P(-G(H) G(W)^T) with G(x) = 1 - 1/(1 - (ax)^b),
//                  P(x) = 1/(1-x)^g; Conj(h,W_i) = Q(1-h, W_i),
//                  Disj(h,W_i) = 1 - Q(h, W_i).  The only n-wide contraction
//                  is a single matrix product between G-mapped operands.

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rrl/matrix.hpp"

namespace rrl {

enum class LafFamily { original, log_improved, nlaf };
enum class NodeKind { conj, disj };

// x^n for small non-negative integer n.  beta/gamma are ints by contract, so
// the transcendental pow() never enters the hot path.
inline double pow_int(double x, int n) {
    double r = 1.0;
    for (double b = x; n > 0; n >>= 1, b *= b)
        if (n & 1) r *= b;
    return r;
}

struct NlafParams {
    double alpha = 0.999;
    int beta = 8;
    int gamma = 3;
    double epsilon = 1e-10;

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw std::invalid_argument("NlafParams: alpha must be in (0,1)");
        if (beta < 1 || gamma < 1)
            throw std::invalid_argument("NlafParams: beta and gamma must be positive integers");
        if (!(epsilon > 0.0)) throw std::invalid_argument("NlafParams: epsilon must be > 0");
    }

    // The three recommended settings: a=(0.999,8,1), b=(0.999,8,3), c=(0.9,3,3).
    static NlafParams preset(char which) {
        switch (which) {
            case 'a': return {0.999, 8, 1, 1e-10};
            case 'b': return {0.999, 8, 3, 1e-10};
            case 'c': return {0.9, 3, 3, 1e-10};
            default: throw std::invalid_argument("NlafParams::preset: expected 'a', 'b' or 'c'");
        }
    }
};

// Which continuous relaxation a logical layer uses.  Exactly one family is
// active; epsilon/grad_trick apply to log_improved, nlaf params to nlaf.
struct LafKind {
    LafFamily family = LafFamily::log_improved;
    double epsilon = 1e-10;
    bool grad_trick = false;  // backward routes the P^2 factor through P again
    NlafParams nlaf;
};

namespace detail {

inline void require_unit(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!(x >= 0.0 && x <= 1.0))
            throw std::invalid_argument(std::string(what) + ": entry outside [0,1]");
}

inline void require_binary(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (x != 0.0 && x != 1.0)
            throw std::invalid_argument(std::string(what) + ": entry not in {0,1}");
}

inline void require_unit(const DenseMatrix& m, const char* what) {
    for (std::size_t i = 0; i < m.size(); ++i)
        if (!(m.data()[i] >= 0.0 && m.data()[i] <= 1.0))
            throw std::invalid_argument(std::string(what) + ": entry outside [0,1]");
}

inline void require_same_len(const std::vector<double>& a, const std::vector<double>& b,
                             const char* what) {
    if (a.size() != b.size())
        throw std::invalid_argument(std::string(what) + ": length mismatch");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Discrete logic (binarized weights, binarized inputs).

inline double discrete_conj(const std::vector<double>& u, const std::vector<double>& w) {
    detail::require_same_len(u, w, "discrete_conj");
    detail::require_binary(u, "discrete_conj");
    detail::require_binary(w, "discrete_conj");
    for (std::size_t j = 0; j < u.size(); ++j)
        if (w[j] == 1.0 && u[j] == 0.0) return 0.0;
    return 1.0;  // vacuous conjunction
}

inline double discrete_disj(const std::vector<double>& u, const std::vector<double>& w) {
    detail::require_same_len(u, w, "discrete_disj");
    detail::require_binary(u, "discrete_disj");
    detail::require_binary(w, "discrete_disj");
    for (std::size_t j = 0; j < u.size(); ++j)
        if (w[j] == 1.0 && u[j] == 1.0) return 1.0;
    return 0.0;  // vacuous disjunction
}

// ---------------------------------------------------------------------------
// Original product-form LAF.

inline double conj_original(const std::vector<double>& h, const std::vector<double>& w) {
    detail::require_same_len(h, w, "conj_original");
    detail::require_unit(h, "conj_original");
    detail::require_unit(w, "conj_original");
    double p = 1.0;
    for (std::size_t j = 0; j < h.size(); ++j) p *= 1.0 - w[j] * (1.0 - h[j]);
    return p;
}

inline double disj_original(const std::vector<double>& h, const std::vector<double>& w) {
    detail::require_same_len(h, w, "disj_original");
    detail::require_unit(h, "disj_original");
    detail::require_unit(w, "disj_original");
    double p = 1.0;
    for (std::size_t j = 0; j < h.size(); ++j) p *= 1.0 - h[j] * w[j];
    return 1.0 - p;
}

// ---------------------------------------------------------------------------
// Log-improved LAF: P(v) = 1/(1 - log v) applied to the epsilon-guarded
// products.  All evaluation happens on s = log v = sum_j log(term_j); the
// product itself is never materialized.  s is clamped at 0 from above: the
// +epsilon inside each term can push v a hair past 1, and P expects v <= 1.

inline double p_log(double s) { return 1.0 / (1.0 - s); }  // P(v) with s = log v

inline double conj_log_improved(const std::vector<double>& h, const std::vector<double>& w,
                                double eps) {
    detail::require_same_len(h, w, "conj_log_improved");
    detail::require_unit(h, "conj_log_improved");
    detail::require_unit(w, "conj_log_improved");
    double s = 0.0;
    for (std::size_t j = 0; j < h.size(); ++j) s += std::log(1.0 - w[j] * (1.0 - h[j]) + eps);
    return p_log(std::min(s, 0.0));
}

inline double disj_log_improved(const std::vector<double>& h, const std::vector<double>& w,
                                double eps) {
    detail::require_same_len(h, w, "disj_log_improved");
    detail::require_unit(h, "disj_log_improved");
    detail::require_unit(w, "disj_log_improved");
    double s = 0.0;
    for (std::size_t j = 0; j < h.size(); ++j) s += std::log(1.0 - h[j] * w[j] + eps);
    return 1.0 - p_log(std::min(s, 0.0));
}

// ---------------------------------------------------------------------------
// NLAF building blocks.

inline double g_func(double x, double alpha, int beta) {
    if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("g_func: x outside [0,1]");
    return 1.0 - 1.0 / (1.0 - pow_int(alpha * x, beta));
}

inline double g_prime(double x, double alpha, int beta) {
    const double ax = alpha * x;
    const double t_bm1 = pow_int(ax, beta - 1);
    const double denom = 1.0 - t_bm1 * ax;
    return -static_cast<double>(beta) * alpha * t_bm1 / (denom * denom);
}

inline double p_func(double x, int gamma) {
    if (x > 0.0) throw std::invalid_argument("p_func: x must be <= 0");
    return pow_int(1.0 / (1.0 - x), gamma);
}

// Q(H,W) = P(-G(H) G(W)^T).  The contract is the decoupling: the only n-wide
// reduction is one matmul between the G-mapped operands, so the cost per
// (instance, node) pair is O(1) beyond that product.
inline DenseMatrix q_batch(const DenseMatrix& h_batch, const DenseMatrix& w,
                           const NlafParams& p) {
    p.validate();
    if (h_batch.cols() != w.cols())
        throw std::invalid_argument("q_batch: h_batch and w disagree on n");
    detail::require_unit(h_batch, "q_batch");
    detail::require_unit(w, "q_batch");
    auto g = [&](double x) { return 1.0 - 1.0 / (1.0 - pow_int(p.alpha * x, p.beta)); };
    DenseMatrix s = matmul(map_elementwise(h_batch, g), transpose(map_elementwise(w, g)));
    DenseMatrix out(s.rows(), s.cols());
    for (std::size_t i = 0; i < s.size(); ++i) {
        // Each addend G(h)G(w) is a product of two non-positives; clamp the
        // accumulated sum at 0 from below purely against rounding drift.
        const double sum = std::max(s.data()[i], 0.0);
        out.data()[i] = pow_int(1.0 / (1.0 + sum), p.gamma);
    }
    return out;
}

inline double conj_nlaf(const std::vector<double>& h, const std::vector<double>& w,
                        const NlafParams& p) {
    detail::require_same_len(h, w, "conj_nlaf");
    detail::require_unit(h, "conj_nlaf");
    DenseMatrix hb(1, h.size());
    for (std::size_t j = 0; j < h.size(); ++j) hb(0, j) = 1.0 - h[j];
    DenseMatrix wm(1, w.size());
    for (std::size_t j = 0; j < w.size(); ++j) wm(0, j) = w[j];
    return q_batch(hb, wm, p)(0, 0);
}

inline double disj_nlaf(const std::vector<double>& h, const std::vector<double>& w,
                        const NlafParams& p) {
    detail::require_same_len(h, w, "disj_nlaf");
    DenseMatrix hb(1, h.size());
    for (std::size_t j = 0; j < h.size(); ++j) hb(0, j) = h[j];
    DenseMatrix wm(1, w.size());
    for (std::size_t j = 0; j < w.size(); ++j) wm(0, j) = w[j];
    return 1.0 - q_batch(hb, wm, p)(0, 0);
}

// Backward of q_batch.  With S = sum_j G(H_ij) G(W_rj) and Q = (1+S)^-gamma:
//   dQ/dH_ij = -gamma (1+S)^-(gamma+1) . G(W_rj) . G'(H_ij)
// and symmetrically for W.  ((1+S)^-(gamma+1) is Q^((gamma+1)/gamma); the
// sign is fixed by the chain rule even though the usual statement of the
// identity drops it.)  Both contractions are matmuls against the upstream.
inline std::pair<DenseMatrix, DenseMatrix> nlaf_backward(const DenseMatrix& h_batch,
                                                         const DenseMatrix& w,
                                                         const NlafParams& p,
                                                         const DenseMatrix& upstream) {
    p.validate();
    if (upstream.rows() != h_batch.rows() || upstream.cols() != w.rows())
        throw std::invalid_argument("nlaf_backward: upstream dims mismatch");
    auto g = [&](double x) { return 1.0 - 1.0 / (1.0 - pow_int(p.alpha * x, p.beta)); };
    auto gp = [&](double x) { return g_prime(x, p.alpha, p.beta); };
    const DenseMatrix gh = map_elementwise(h_batch, g);   // m x n
    const DenseMatrix gw = map_elementwise(w, g);         // l x n
    DenseMatrix s = matmul(gh, transpose(gw));            // m x l

    // dL/dS = upstream . dQ/dS
    DenseMatrix dlds(s.rows(), s.cols());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double sum = std::max(s.data()[i], 0.0);
        dlds.data()[i] = upstream.data()[i] *
                         (-static_cast<double>(p.gamma)) * pow_int(1.0 / (1.0 + sum), p.gamma + 1);
    }

    DenseMatrix grad_h = matmul(dlds, gw);                 // m x n, then . G'(H)
    for (std::size_t i = 0; i < h_batch.rows(); ++i)
        for (std::size_t j = 0; j < h_batch.cols(); ++j) grad_h(i, j) *= gp(h_batch(i, j));

    DenseMatrix grad_w = matmul(transpose(dlds), gh);      // l x n, then . G'(W)
    for (std::size_t r = 0; r < w.rows(); ++r)
        for (std::size_t j = 0; j < w.cols(); ++j) grad_w(r, j) *= gp(w(r, j));

    return {std::move(grad_h), std::move(grad_w)};
}

// ---------------------------------------------------------------------------
// Batched forward/backward for the product-form families.  In is m x n
// (instances), W is l x n (one node per row), output m x l.

inline DenseMatrix laf_forward_product(NodeKind kind, LafFamily family, const DenseMatrix& in,
                                       const DenseMatrix& w, double eps) {
    if (in.cols() != w.cols())
        throw std::invalid_argument("laf_forward_product: in and w disagree on n");
    detail::require_unit(in, "laf_forward_product");
    detail::require_unit(w, "laf_forward_product");
    const bool logimp = family == LafFamily::log_improved;
    DenseMatrix out(in.rows(), w.rows());
    for (std::size_t i = 0; i < in.rows(); ++i) {
        const double* hrow = in.row(i);
        for (std::size_t r = 0; r < w.rows(); ++r) {
            const double* wrow = w.row(r);
            if (logimp) {
                double s = 0.0;
                for (std::size_t j = 0; j < in.cols(); ++j) {
                    const double term = kind == NodeKind::conj
                                            ? 1.0 - wrow[j] * (1.0 - hrow[j])
                                            : 1.0 - hrow[j] * wrow[j];
                    s += std::log(term + eps);
                }
                const double p = p_log(std::min(s, 0.0));
                out(i, r) = kind == NodeKind::conj ? p : 1.0 - p;
            } else {
                double prod = 1.0;
                for (std::size_t j = 0; j < in.cols(); ++j)
                    prod *= kind == NodeKind::conj ? 1.0 - wrow[j] * (1.0 - hrow[j])
                                                   : 1.0 - hrow[j] * wrow[j];
                out(i, r) = kind == NodeKind::conj ? prod : 1.0 - prod;
            }
        }
    }
    return out;
}

// Backward for the original family.  Derivatives of a product need the
// product over all other indices; prefix/suffix products keep that exact even
// when some term is 0.
inline std::pair<DenseMatrix, DenseMatrix> original_backward(NodeKind kind,
                                                             const DenseMatrix& in,
                                                             const DenseMatrix& w,
                                                             const DenseMatrix& upstream) {
    const std::size_t m = in.rows(), l = w.rows(), n = in.cols();
    if (upstream.rows() != m || upstream.cols() != l)
        throw std::invalid_argument("original_backward: upstream dims mismatch");
    DenseMatrix grad_in(m, n), grad_w(l, n);
    std::vector<double> pre(n + 1), suf(n + 1);
    for (std::size_t i = 0; i < m; ++i) {
        const double* hrow = in.row(i);
        for (std::size_t r = 0; r < l; ++r) {
            const double* wrow = w.row(r);
            const double up = upstream(i, r);
            if (up == 0.0) continue;
            pre[0] = 1.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double term = kind == NodeKind::conj ? 1.0 - wrow[j] * (1.0 - hrow[j])
                                                           : 1.0 - hrow[j] * wrow[j];
                pre[j + 1] = pre[j] * term;
            }
            suf[n] = 1.0;
            for (std::size_t j = n; j-- > 0;) {
                const double term = kind == NodeKind::conj ? 1.0 - wrow[j] * (1.0 - hrow[j])
                                                           : 1.0 - hrow[j] * wrow[j];
                suf[j] = suf[j + 1] * term;
            }
            for (std::size_t j = 0; j < n; ++j) {
                const double rest = pre[j] * suf[j + 1];  // product excluding j
                double dterm_dh, dterm_dw;
                if (kind == NodeKind::conj) { dterm_dh = wrow[j]; dterm_dw = -(1.0 - hrow[j]); }
                else { dterm_dh = -wrow[j]; dterm_dw = -hrow[j]; }
                // conj: out = prod; disj: out = 1 - prod.
                const double dout_dterm = kind == NodeKind::conj ? rest : -rest;
                grad_in(i, j) += up * dout_dterm * dterm_dh;
                grad_w(r, j) += up * dout_dterm * dterm_dw;
            }
        }
    }
    return {std::move(grad_in), std::move(grad_w)};
}

// Backward for the log-improved family.  With s = sum_j log(term_j + eps) and
// out = P(s) (conj) or 1 - P(s) (disj), the per-term factor is
// P^2(s) / (term_j + eps); grad_trick routes the P^2 through P once more:
// P(P^2(v)) = 1/(1 + 2 log(1-s)), which keeps the factor's sign and ordering
// but lowers its speed of approach to 0.
inline std::pair<DenseMatrix, DenseMatrix> log_improved_backward(NodeKind kind,
                                                                 const DenseMatrix& in,
                                                                 const DenseMatrix& w,
                                                                 double eps, bool grad_trick,
                                                                 const DenseMatrix& upstream) {
    const std::size_t m = in.rows(), l = w.rows(), n = in.cols();
    if (upstream.rows() != m || upstream.cols() != l)
        throw std::invalid_argument("log_improved_backward: upstream dims mismatch");
    DenseMatrix grad_in(m, n), grad_w(l, n);
    for (std::size_t i = 0; i < m; ++i) {
        const double* hrow = in.row(i);
        for (std::size_t r = 0; r < l; ++r) {
            const double* wrow = w.row(r);
            const double up = upstream(i, r);
            if (up == 0.0) continue;
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double term = kind == NodeKind::conj ? 1.0 - wrow[j] * (1.0 - hrow[j])
                                                           : 1.0 - hrow[j] * wrow[j];
                s += std::log(term + eps);
            }
            s = std::min(s, 0.0);
            const double p = p_log(s);
            const double fac = grad_trick ? 1.0 / (1.0 + 2.0 * std::log(1.0 - s)) : p * p;
            // conj: dout/ds = +fac; disj: out = 1 - P so the sign flips.
            const double dout_ds = kind == NodeKind::conj ? fac : -fac;
            for (std::size_t j = 0; j < n; ++j) {
                const double term = kind == NodeKind::conj ? 1.0 - wrow[j] * (1.0 - hrow[j])
                                                           : 1.0 - hrow[j] * wrow[j];
                const double inv = 1.0 / (term + eps);
                double dterm_dh, dterm_dw;
                if (kind == NodeKind::conj) { dterm_dh = wrow[j]; dterm_dw = -(1.0 - hrow[j]); }
                else { dterm_dh = -wrow[j]; dterm_dw = -hrow[j]; }
                grad_in(i, j) += up * dout_ds * inv * dterm_dh;
                grad_w(r, j) += up * dout_ds * inv * dterm_dw;
            }
        }
    }
    return {std::move(grad_in), std::move(grad_w)};
}

}  // namespace rrl
