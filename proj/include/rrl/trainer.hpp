#pragma once

// Training: gradient-grafted backpropagation (single and hierarchical), an
// STE baseline, Adam with [0,1] projection of logical weights, LR decay, and
// the epoch loop with discrete-validation model selection.
//
// All three modes compute the loss gradient at the DISCRETE logits (the
// model that ships is the discrete one) and differ only in where the logical
// layers' Jacobians are evaluated:
//   single        continuous inputs u^(l-1), continuous weights W
//   hierarchical  discrete inputs u(l-1),   continuous weights W
//   ste           discrete inputs u(l-1),   binarized weights q(W),
//                 gradient applied to W as if q were the identity

#include <cstdint>
#include <utility>
#include <vector>

#include "rrl/dataset.hpp"
#include "rrl/model.hpp"

namespace rrl {

enum class GraftingMode { single, hierarchical, ste };

struct TrainConfig {
    std::size_t epochs = 400;
    std::size_t batch_size = 32;
    double learning_rate = 5e-3;
    double lr_decay_factor = 0.75;
    std::size_t lr_decay_every = 100;
    double l2_lambda = 0.0;
    GraftingMode grafting = GraftingMode::hierarchical;
    std::uint64_t seed = 1;
    double temp_init = 1.0;

    void validate() const {
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        if (!(learning_rate > 0.0))
            throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
        if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0))
            throw std::invalid_argument("TrainConfig: lr_decay_factor must be in (0,1]");
        if (lr_decay_every < 1)
            throw std::invalid_argument("TrainConfig: lr_decay_every must be >= 1");
        if (l2_lambda < 0.0) throw std::invalid_argument("TrainConfig: l2_lambda must be >= 0");
        if (!(temp_init > 0.0)) throw std::invalid_argument("TrainConfig: temp_init must be > 0");
    }
};

// Gradient (or Adam moment) for every trainable tensor, shaped like the model.
struct ModelGrads {
    std::vector<DenseMatrix> w_conj, w_disj;
    DenseMatrix head_w;
    std::vector<double> head_b;
    double log_temp = 0.0;

    static ModelGrads zeros_like(const RrlModel& m) {
        ModelGrads g;
        for (const auto& layer : m.layers) {
            g.w_conj.emplace_back(layer.w_conj.rows(), layer.w_conj.cols());
            g.w_disj.emplace_back(layer.w_disj.rows(), layer.w_disj.cols());
        }
        g.head_w = DenseMatrix(m.head.weights.rows(), m.head.weights.cols());
        g.head_b.assign(m.head.biases.size(), 0.0);
        return g;
    }
};

namespace detail {

inline DenseMatrix slice_cols(const DenseMatrix& m, std::size_t from, std::size_t len) {
    DenseMatrix out(m.rows(), len);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < len; ++j) out(i, j) = m(i, from + j);
    return out;
}

inline void add_cols_into(DenseMatrix& dst, const DenseMatrix& src, std::size_t dst_from) {
    for (std::size_t i = 0; i < src.rows(); ++i)
        for (std::size_t j = 0; j < src.cols(); ++j) dst(i, dst_from + j) += src(i, j);
}

// Backward through one half (conjunction or disjunction) of a logical layer,
// with the LAF family Jacobian evaluated at (in, w).
inline std::pair<DenseMatrix, DenseMatrix> half_backward(NodeKind kind, const LafKind& laf,
                                                         const DenseMatrix& in,
                                                         const DenseMatrix& w,
                                                         const DenseMatrix& upstream) {
    switch (laf.family) {
        case LafFamily::original:
            return original_backward(kind, in, w, upstream);
        case LafFamily::log_improved:
            return log_improved_backward(kind, in, w, laf.epsilon, laf.grad_trick, upstream);
        case LafFamily::nlaf: {
            if (kind == NodeKind::conj) {
                const DenseMatrix flipped =
                    map_elementwise(in, [](double x) { return 1.0 - x; });
                auto [ga, gw] = nlaf_backward(flipped, w, laf.nlaf, upstream);
                return {map_elementwise(ga, [](double x) { return -x; }), std::move(gw)};
            }
            const DenseMatrix neg_up = map_elementwise(upstream, [](double x) { return -x; });
            return nlaf_backward(in, w, laf.nlaf, neg_up);  // out = 1 - Q
        }
    }
    throw std::logic_error("half_backward: unreachable");
}

inline DenseMatrix softmax_rows(const DenseMatrix& logits, double tau) {
    DenseMatrix p(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        double mx = logits(i, 0) / tau;
        for (std::size_t k = 1; k < logits.cols(); ++k) mx = std::max(mx, logits(i, k) / tau);
        double z = 0.0;
        for (std::size_t k = 0; k < logits.cols(); ++k) {
            p(i, k) = std::exp(logits(i, k) / tau - mx);
            z += p(i, k);
        }
        for (std::size_t k = 0; k < logits.cols(); ++k) p(i, k) /= z;
    }
    return p;
}

}  // namespace detail

// The shared grafted-backpropagation engine.  u0_batch is the assembled
// binarized input, y_onehot the labels.
inline ModelGrads grafted_backward(const RrlModel& m, const DenseMatrix& u0_batch,
                                   const DenseMatrix& y_onehot, GraftingMode mode,
                                   double l2_lambda) {
    const std::size_t L = m.n_layers();
    const std::size_t B = u0_batch.rows();
    const double tau = m.head.temperature();

    // Discrete forward: loss path and (for hier/ste) the Jacobian points.
    ForwardResult disc = forward_discrete(m, u0_batch);
    // Jacobian evaluation points per mode: continuous outputs for single
    // grafting, discrete outputs otherwise.
    std::vector<DenseMatrix> points;
    if (mode == GraftingMode::single) points = forward_continuous(m, u0_batch).outputs;
    else points = disc.outputs;

    ModelGrads g = ModelGrads::zeros_like(m);

    // Scion: loss gradient at the discrete logits.
    const DenseMatrix p = detail::softmax_rows(disc.logits, tau);
    DenseMatrix dlogits(B, p.cols());
    double gtheta = 0.0;
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t k = 0; k < p.cols(); ++k) {
            dlogits(i, k) = (p(i, k) - y_onehot(i, k)) / (tau * static_cast<double>(B));
            gtheta -= dlogits(i, k) * disc.logits(i, k);
        }
    g.log_temp = gtheta;

    // Head: differentiable directly on the discrete path.
    const DenseMatrix head_in = detail::gather_head_input(m, disc.outputs);
    g.head_w = matmul(transpose(dlogits), head_in);
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t k = 0; k < p.cols(); ++k) g.head_b[k] += dlogits(i, k);

    // Upstream gradient buffers per source (0 = u0, l = layer l output).
    std::vector<DenseMatrix> gu(L + 1);
    for (std::size_t s = 0; s <= L; ++s) gu[s] = DenseMatrix(B, m.source_width(s));
    {
        const DenseMatrix ghead_in = matmul(dlogits, m.head.weights);
        if (m.head_skip && L >= 2) {
            const std::size_t prev_w = m.source_width(L - 1);
            detail::add_cols_into(gu[L - 1], detail::slice_cols(ghead_in, 0, prev_w), 0);
            detail::add_cols_into(gu[L], detail::slice_cols(ghead_in, prev_w, m.source_width(L)),
                                  0);
        } else {
            detail::add_cols_into(gu[L], ghead_in, 0);
        }
    }

    // Walk the layers top-down, grafting each upstream onto the continuous
    // limb's Jacobian at this mode's evaluation points.
    for (std::size_t l = L; l >= 1; --l) {
        const LogicalLayerParams& layer = m.layers[l - 1];
        std::vector<const DenseMatrix*> parts;
        for (std::size_t src : m.skip_plan[l - 1]) parts.push_back(&points[src]);
        const DenseMatrix in = detail::concat_cols(parts);
        const DenseMatrix wc =
            mode == GraftingMode::ste ? binarize_weights(layer.w_conj) : layer.w_conj;
        const DenseMatrix wd =
            mode == GraftingMode::ste ? binarize_weights(layer.w_disj) : layer.w_disj;

        const DenseMatrix up_conj = detail::slice_cols(gu[l], 0, layer.w_conj.rows());
        const DenseMatrix up_disj =
            detail::slice_cols(gu[l], layer.w_conj.rows(), layer.w_disj.rows());

        auto [gin_c, gw_c] = detail::half_backward(NodeKind::conj, layer.laf, in, wc, up_conj);
        auto [gin_d, gw_d] = detail::half_backward(NodeKind::disj, layer.laf, in, wd, up_disj);
        g.w_conj[l - 1] = std::move(gw_c);
        g.w_disj[l - 1] = std::move(gw_d);

        DenseMatrix gin(B, in.cols());
        for (std::size_t i = 0; i < gin.size(); ++i)
            gin.data()[i] = gin_c.data()[i] + gin_d.data()[i];
        std::size_t at = 0;
        for (std::size_t src : m.skip_plan[l - 1]) {
            detail::add_cols_into(gu[src], detail::slice_cols(gin, at, m.source_width(src)), 0);
            at += m.source_width(src);
        }
    }

    if (l2_lambda != 0.0) {
        for (std::size_t l = 0; l < L; ++l) {
            for (std::size_t i = 0; i < g.w_conj[l].size(); ++i)
                g.w_conj[l].data()[i] += 2.0 * l2_lambda * m.layers[l].w_conj.data()[i];
            for (std::size_t i = 0; i < g.w_disj[l].size(); ++i)
                g.w_disj[l].data()[i] += 2.0 * l2_lambda * m.layers[l].w_disj.data()[i];
        }
    }

    for (std::size_t l = 0; l < L; ++l) {
        check_finite(g.w_conj[l], "grafted_backward: w_conj grad");
        check_finite(g.w_disj[l], "grafted_backward: w_disj grad");
    }
    check_finite(g.head_w, "grafted_backward: head grad");
    if (!std::isfinite(g.log_temp))
        throw std::runtime_error("grafted_backward: non-finite temperature grad");
    return g;
}

inline ModelGrads graft_single_backward(const RrlModel& m, const DenseMatrix& u0,
                                        const DenseMatrix& y, const TrainConfig& cfg) {
    return grafted_backward(m, u0, y, GraftingMode::single, cfg.l2_lambda);
}

inline ModelGrads graft_hierarchical_backward(const RrlModel& m, const DenseMatrix& u0,
                                              const DenseMatrix& y, const TrainConfig& cfg) {
    return grafted_backward(m, u0, y, GraftingMode::hierarchical, cfg.l2_lambda);
}

inline ModelGrads ste_backward(const RrlModel& m, const DenseMatrix& u0, const DenseMatrix& y,
                               const TrainConfig& cfg) {
    return grafted_backward(m, u0, y, GraftingMode::ste, cfg.l2_lambda);
}

// Adam with bias correction; logical weights are projected onto [0,1] by
// clamping after the step.
struct AdamState {
    ModelGrads m, v;
    std::size_t t = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    static AdamState init(const RrlModel& model) {
        AdamState s;
        s.m = ModelGrads::zeros_like(model);
        s.v = ModelGrads::zeros_like(model);
        return s;
    }
};

namespace detail {

inline void adam_tensor(double* p, const double* g, double* m, double* v, std::size_t len,
                        double lr, const AdamState& s, bool clamp01) {
    const double bc1 = 1.0 - pow_int(s.beta1, static_cast<int>(s.t));
    const double bc2 = 1.0 - pow_int(s.beta2, static_cast<int>(s.t));
    for (std::size_t i = 0; i < len; ++i) {
        m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
        v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
        const double step = lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + s.eps);
        p[i] -= step;
        if (!std::isfinite(p[i])) throw std::runtime_error("adam_step: non-finite parameter");
        if (clamp01) p[i] = std::min(1.0, std::max(0.0, p[i]));
    }
}

}  // namespace detail

inline void adam_step(RrlModel& model, const ModelGrads& g, AdamState& s, double lr) {
    ++s.t;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        detail::adam_tensor(model.layers[l].w_conj.data(), g.w_conj[l].data(),
                            s.m.w_conj[l].data(), s.v.w_conj[l].data(),
                            g.w_conj[l].size(), lr, s, true);
        detail::adam_tensor(model.layers[l].w_disj.data(), g.w_disj[l].data(),
                            s.m.w_disj[l].data(), s.v.w_disj[l].data(),
                            g.w_disj[l].size(), lr, s, true);
    }
    detail::adam_tensor(model.head.weights.data(), g.head_w.data(), s.m.head_w.data(),
                        s.v.head_w.data(), g.head_w.size(), lr, s, false);
    detail::adam_tensor(model.head.biases.data(), g.head_b.data(), s.m.head_b.data(),
                        s.v.head_b.data(), g.head_b.size(), lr, s, false);
    detail::adam_tensor(&model.head.log_temperature, &g.log_temp, &s.m.log_temp, &s.v.log_temp,
                        1, lr, s, false);
}

struct EpochStats {
    double discrete_loss = 0.0;    // epoch-end CE of the discrete model, full train set
    double continuous_loss = 0.0;  // epoch-end CE of the continuous model, full train set
    double valid_f1 = 0.0;         // macro-F1 of the discrete model on the validation set
};

// Epoch loop: seeded per-epoch shuffles, LR decay, Adam + projection, and a
// snapshot of the weights at the best discrete validation macro-F1 (ties go
// to the later epoch, letting regularization keep simplifying after the F1
// plateaus).  The snapshot is restored into `model` before returning.
inline std::vector<EpochStats> fit(RrlModel& model, const Dataset& train, const Dataset& valid,
                                   const TrainConfig& cfg) {
    cfg.validate();
    model.validate();
    const DenseMatrix u0_train = assemble_u0_matrix(model.bounds, train);
    const DenseMatrix u0_valid = assemble_u0_matrix(model.bounds, valid);
    const std::vector<int> y_valid = valid.label_indices();

    Rng master(cfg.seed);
    AdamState adam = AdamState::init(model);
    std::vector<EpochStats> history;
    history.reserve(cfg.epochs);

    std::vector<LogicalLayerParams> best_layers = model.layers;
    LinearHeadParams best_head = model.head;
    double best_f1 = -1.0;

    std::vector<std::size_t> order(train.n());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr =
            cfg.learning_rate *
            pow_int(cfg.lr_decay_factor, static_cast<int>(epoch / cfg.lr_decay_every));
        Rng erng = master.derive(epoch);
        erng.shuffle(order);

        for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
            const std::size_t bs = std::min(cfg.batch_size, order.size() - at);
            DenseMatrix u0b(bs, u0_train.cols()), yb(bs, train.labels.cols());
            for (std::size_t i = 0; i < bs; ++i) {
                const std::size_t r = order[at + i];
                for (std::size_t j = 0; j < u0_train.cols(); ++j) u0b(i, j) = u0_train(r, j);
                for (std::size_t j = 0; j < train.labels.cols(); ++j)
                    yb(i, j) = train.labels(r, j);
            }
            const ModelGrads g =
                grafted_backward(model, u0b, yb, cfg.grafting, cfg.l2_lambda);
            adam_step(model, g, adam, lr);
        }

        EpochStats st;
        const double tau = model.head.temperature();
        st.discrete_loss =
            loss(forward_discrete(model, u0_train).logits, train.labels, tau, 0.0, {});
        st.continuous_loss =
            loss(forward_continuous(model, u0_train).logits, train.labels, tau, 0.0, {});
        st.valid_f1 = macro_f1(y_valid,
                               predict_logits(forward_discrete(model, u0_valid).logits),
                               valid.schema.n_classes());
        history.push_back(st);

        if (st.valid_f1 >= best_f1) {
            best_f1 = st.valid_f1;
            best_layers = model.layers;
            best_head = model.head;
        }
    }

    model.layers = std::move(best_layers);
    model.head = std::move(best_head);
    return history;
}

}  // namespace rrl
