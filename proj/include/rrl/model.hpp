#pragma once

// The RRL model: binarization bounds feeding a stack of logical layers (each
// a conjunction half plus a disjunction half) wired by skip connections, and
// a linear head with trainable softmax temperature.
//
// Three forward modes:
//   discrete    u(l)  = LO(u(l-1), q(W))          -- the model that ships
//   continuous  u^(l) = LAF(u^(l-1), W)           -- fully relaxed
//   grafting    u~(l) = LAF(u(l-1), W)            -- continuous limb evaluated
//                                                    at the discrete outputs
// where q(W) = 1_{W > 0.5} (strict: 0.5 maps to 0).

#include <cmath>
#include <string>
#include <vector>

#include "rrl/binarizer.hpp"
#include "rrl/dataset.hpp"
#include "rrl/laf.hpp"
#include "rrl/matrix.hpp"

namespace rrl {

struct LogicalLayerParams {
    DenseMatrix w_conj;  // nodes_conj x n_in, entries in [0,1]
    DenseMatrix w_disj;  // nodes_disj x n_in, entries in [0,1]
    LafKind laf;

    std::size_t n_in() const { return w_conj.cols(); }
    std::size_t n_out() const { return w_conj.rows() + w_disj.rows(); }
};

struct LinearHeadParams {
    DenseMatrix weights;         // M x n_in
    std::vector<double> biases;  // M
    double log_temperature = 0.0;

    double temperature() const { return std::exp(log_temperature); }
};

inline DenseMatrix binarize_weights(const DenseMatrix& w) {
    return map_elementwise(w, [](double x) { return x > 0.5 ? 1.0 : 0.0; });
}

struct RrlModel {
    FeatureSchema schema;
    BinarizationBounds bounds;
    std::vector<LogicalLayerParams> layers;
    // skip_plan[i] lists the outputs concatenated into layer i+1's input;
    // source 0 is u0, source l is logical layer l.  Default: layer 1 reads
    // u0, every later layer reads the two outputs before it.
    std::vector<std::vector<std::size_t>> skip_plan;
    LinearHeadParams head;
    bool head_skip = false;  // head also sees the second-to-last output

    std::size_t n_layers() const { return layers.size(); }

    std::size_t source_width(std::size_t src) const {
        return src == 0 ? bounds.n_atoms() + schema.n_binary() : layers[src - 1].n_out();
    }

    std::size_t layer_input_width(std::size_t layer) const {  // layer is 1-based
        std::size_t w = 0;
        for (std::size_t src : skip_plan[layer - 1]) w += source_width(src);
        return w;
    }

    std::size_t head_input_width() const {
        std::size_t w = source_width(n_layers());
        if (head_skip && n_layers() >= 2) w += source_width(n_layers() - 1);
        return w;
    }

    void validate() const {
        if (layers.empty()) throw std::invalid_argument("RrlModel: needs at least one logical layer");
        if (skip_plan.size() != layers.size())
            throw std::invalid_argument("RrlModel: skip_plan/layers size mismatch");
        for (std::size_t l = 1; l <= layers.size(); ++l) {
            for (std::size_t src : skip_plan[l - 1])
                if (src >= l)
                    throw std::invalid_argument("RrlModel: layer " + std::to_string(l) +
                                                " consumes non-earlier output " +
                                                std::to_string(src));
            if (layers[l - 1].w_conj.cols() != layer_input_width(l) ||
                layers[l - 1].w_disj.cols() != layer_input_width(l))
                throw std::invalid_argument("RrlModel: layer " + std::to_string(l) +
                                            " width inconsistent with skip plan");
        }
        if (head.weights.cols() != head_input_width() ||
            head.weights.rows() != schema.n_classes() ||
            head.biases.size() != schema.n_classes())
            throw std::invalid_argument("RrlModel: head dims inconsistent");
    }
};

inline std::vector<std::vector<std::size_t>> default_skip_plan(std::size_t n_layers) {
    std::vector<std::vector<std::size_t>> plan(n_layers);
    for (std::size_t l = 1; l <= n_layers; ++l) {
        if (l == 1) plan[l - 1] = {0};
        else plan[l - 1] = {l - 2, l - 1};
    }
    return plan;
}

// Fresh model.  Logical weights start uniform in [0, 0.6]: most edges are
// discrete-0 (below the 0.5 threshold) but close enough to flip; head weights
// start small and symmetric; biases 0.
inline RrlModel build_model(const FeatureSchema& schema, const BinarizationBounds& bounds,
                            const std::vector<std::size_t>& half_widths, const LafKind& laf,
                            double temp_init, Rng& rng, bool head_skip = false) {
    if (half_widths.empty()) throw std::invalid_argument("build_model: no layer widths");
    if (!(temp_init > 0.0)) throw std::invalid_argument("build_model: temp_init must be > 0");
    RrlModel m;
    m.schema = schema;
    m.bounds = bounds;
    m.skip_plan = default_skip_plan(half_widths.size());
    m.head_skip = head_skip;
    for (std::size_t l = 1; l <= half_widths.size(); ++l) {
        LogicalLayerParams layer;
        layer.laf = laf;
        m.layers.push_back(layer);  // placeholder so layer_input_width(l) works
        const std::size_t n_in = m.layer_input_width(l);
        m.layers.back().w_conj = uniform_matrix(rng, half_widths[l - 1], n_in, 0.0, 0.6);
        m.layers.back().w_disj = uniform_matrix(rng, half_widths[l - 1], n_in, 0.0, 0.6);
    }
    const std::size_t hw = m.head_input_width();
    const double scale = 1.0 / std::sqrt(static_cast<double>(hw));
    m.head.weights = uniform_matrix(rng, schema.n_classes(), hw, -scale, scale);
    m.head.biases.assign(schema.n_classes(), 0.0);
    m.head.log_temperature = std::log(temp_init);
    m.validate();
    return m;
}

namespace detail {

inline DenseMatrix concat_cols(const std::vector<const DenseMatrix*>& parts) {
    std::size_t cols = 0;
    for (const DenseMatrix* p : parts) cols += p->cols();
    DenseMatrix out(parts.empty() ? 0 : parts[0]->rows(), cols);
    std::size_t at = 0;
    for (const DenseMatrix* p : parts) {
        for (std::size_t i = 0; i < p->rows(); ++i)
            for (std::size_t j = 0; j < p->cols(); ++j) out(i, at + j) = (*p)(i, j);
        at += p->cols();
    }
    return out;
}

inline DenseMatrix gather_layer_input(const RrlModel& m, std::size_t layer,
                                      const std::vector<DenseMatrix>& outputs) {
    std::vector<const DenseMatrix*> parts;
    for (std::size_t src : m.skip_plan[layer - 1]) parts.push_back(&outputs[src]);
    return concat_cols(parts);
}

inline DenseMatrix gather_head_input(const RrlModel& m, const std::vector<DenseMatrix>& outputs) {
    if (m.head_skip && m.n_layers() >= 2) {
        std::vector<const DenseMatrix*> parts = {&outputs[m.n_layers() - 1],
                                                 &outputs[m.n_layers()]};
        return concat_cols(parts);
    }
    return outputs[m.n_layers()];
}

// Exact discrete layer via counting: a conjunction fails iff some selected
// input is 0, a disjunction fires iff some selected input is 1.
inline DenseMatrix discrete_layer(const DenseMatrix& in, const LogicalLayerParams& layer) {
    const DenseMatrix wc = binarize_weights(layer.w_conj);
    const DenseMatrix wd = binarize_weights(layer.w_disj);
    const DenseMatrix miss = matmul(map_elementwise(in, [](double x) { return 1.0 - x; }),
                                    transpose(wc));
    const DenseMatrix hit = matmul(in, transpose(wd));
    DenseMatrix out(in.rows(), layer.n_out());
    for (std::size_t i = 0; i < in.rows(); ++i) {
        for (std::size_t r = 0; r < wc.rows(); ++r) out(i, r) = miss(i, r) == 0.0 ? 1.0 : 0.0;
        for (std::size_t r = 0; r < wd.rows(); ++r)
            out(i, wc.rows() + r) = hit(i, r) > 0.0 ? 1.0 : 0.0;
    }
    return out;
}

inline DenseMatrix continuous_layer(const DenseMatrix& in, const DenseMatrix& w_conj,
                                    const DenseMatrix& w_disj, const LafKind& laf) {
    DenseMatrix conj, disj;
    switch (laf.family) {
        case LafFamily::nlaf: {
            const DenseMatrix flipped =
                map_elementwise(in, [](double x) { return 1.0 - x; });
            conj = q_batch(flipped, w_conj, laf.nlaf);
            disj = map_elementwise(q_batch(in, w_disj, laf.nlaf),
                                   [](double q) { return 1.0 - q; });
            break;
        }
        default:
            conj = laf_forward_product(NodeKind::conj, laf.family, in, w_conj, laf.epsilon);
            disj = laf_forward_product(NodeKind::disj, laf.family, in, w_disj, laf.epsilon);
    }
    std::vector<const DenseMatrix*> parts = {&conj, &disj};
    return concat_cols(parts);
}

inline DenseMatrix head_logits(const LinearHeadParams& head, const DenseMatrix& in) {
    DenseMatrix logits = matmul(in, transpose(head.weights));
    for (std::size_t i = 0; i < logits.rows(); ++i)
        for (std::size_t k = 0; k < logits.cols(); ++k) logits(i, k) += head.biases[k];
    return logits;
}

}  // namespace detail

// Batched forward results: outputs[0] is u0, outputs[l] is layer l.
struct ForwardResult {
    std::vector<DenseMatrix> outputs;
    DenseMatrix logits;
};

// Grafting forward: discrete outputs plus the continuous limb evaluated at
// the discrete inputs.  tilde[0] is unused padding to keep indices aligned.
struct GraftResult {
    std::vector<DenseMatrix> outputs;  // discrete u(l)
    std::vector<DenseMatrix> tilde;    // u~(l) = LAF(u(l-1), W)
    DenseMatrix logits;                // head on discrete u(L)
};

inline ForwardResult forward_discrete(const RrlModel& m, const DenseMatrix& u0_batch) {
    if (u0_batch.cols() != m.source_width(0))
        throw std::invalid_argument("forward_discrete: u0 width mismatch");
    ForwardResult r;
    r.outputs.push_back(u0_batch);
    for (std::size_t l = 1; l <= m.n_layers(); ++l)
        r.outputs.push_back(
            detail::discrete_layer(detail::gather_layer_input(m, l, r.outputs), m.layers[l - 1]));
    r.logits = detail::head_logits(m.head, detail::gather_head_input(m, r.outputs));
    return r;
}

inline ForwardResult forward_continuous(const RrlModel& m, const DenseMatrix& u0_batch) {
    if (u0_batch.cols() != m.source_width(0))
        throw std::invalid_argument("forward_continuous: u0 width mismatch");
    ForwardResult r;
    r.outputs.push_back(u0_batch);
    for (std::size_t l = 1; l <= m.n_layers(); ++l) {
        const LogicalLayerParams& layer = m.layers[l - 1];
        r.outputs.push_back(detail::continuous_layer(detail::gather_layer_input(m, l, r.outputs),
                                                     layer.w_conj, layer.w_disj, layer.laf));
    }
    r.logits = detail::head_logits(m.head, detail::gather_head_input(m, r.outputs));
    return r;
}

inline GraftResult forward_grafting(const RrlModel& m, const DenseMatrix& u0_batch) {
    if (u0_batch.cols() != m.source_width(0))
        throw std::invalid_argument("forward_grafting: u0 width mismatch");
    GraftResult r;
    r.outputs.push_back(u0_batch);
    r.tilde.emplace_back();
    for (std::size_t l = 1; l <= m.n_layers(); ++l) {
        const LogicalLayerParams& layer = m.layers[l - 1];
        const DenseMatrix in = detail::gather_layer_input(m, l, r.outputs);
        r.tilde.push_back(detail::continuous_layer(in, layer.w_conj, layer.w_disj, layer.laf));
        r.outputs.push_back(detail::discrete_layer(in, layer));
    }
    r.logits = detail::head_logits(m.head, detail::gather_head_input(m, r.outputs));
    return r;
}

// Per-instance wrappers.

inline std::pair<std::vector<double>, std::vector<std::vector<double>>> forward_discrete(
    const RrlModel& m, const std::vector<double>& u0) {
    DenseMatrix b(1, u0.size());
    for (std::size_t j = 0; j < u0.size(); ++j) b(0, j) = u0[j];
    ForwardResult r = forward_discrete(m, b);
    std::vector<double> logits(r.logits.row(0), r.logits.row(0) + r.logits.cols());
    std::vector<std::vector<double>> all_u;
    for (std::size_t l = 1; l < r.outputs.size(); ++l)
        all_u.emplace_back(r.outputs[l].row(0), r.outputs[l].row(0) + r.outputs[l].cols());
    return {logits, all_u};
}

inline std::pair<std::vector<double>, std::vector<std::vector<double>>> forward_continuous(
    const RrlModel& m, const std::vector<double>& u0) {
    DenseMatrix b(1, u0.size());
    for (std::size_t j = 0; j < u0.size(); ++j) b(0, j) = u0[j];
    ForwardResult r = forward_continuous(m, b);
    std::vector<double> logits(r.logits.row(0), r.logits.row(0) + r.logits.cols());
    std::vector<std::vector<double>> all_u;
    for (std::size_t l = 1; l < r.outputs.size(); ++l)
        all_u.emplace_back(r.outputs[l].row(0), r.outputs[l].row(0) + r.outputs[l].cols());
    return {logits, all_u};
}

// Cross-entropy of softmax(logits / tau) against one-hot labels (mean over
// the batch), plus l2 * sum of squared logical-layer weights.  Head weights
// are exempt from the penalty.
inline double loss(const DenseMatrix& logits, const DenseMatrix& y_onehot, double tau,
                   double l2_lambda, const std::vector<LogicalLayerParams>& layers) {
    if (!(tau > 0.0)) throw std::invalid_argument("loss: tau must be > 0");
    if (logits.rows() != y_onehot.rows() || logits.cols() != y_onehot.cols())
        throw std::invalid_argument("loss: logits/labels shape mismatch");
    double ce = 0.0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        double mx = logits(i, 0) / tau;
        for (std::size_t k = 1; k < logits.cols(); ++k) mx = std::max(mx, logits(i, k) / tau);
        double z = 0.0, picked = 0.0;
        for (std::size_t k = 0; k < logits.cols(); ++k) {
            const double s = logits(i, k) / tau;
            z += std::exp(s - mx);
            if (y_onehot(i, k) == 1.0) picked = s - mx;
        }
        ce += std::log(z) - picked;
    }
    ce /= static_cast<double>(logits.rows());
    if (l2_lambda != 0.0) {
        double sq = 0.0;
        for (const auto& layer : layers) {
            for (std::size_t i = 0; i < layer.w_conj.size(); ++i)
                sq += layer.w_conj.data()[i] * layer.w_conj.data()[i];
            for (std::size_t i = 0; i < layer.w_disj.size(); ++i)
                sq += layer.w_disj.data()[i] * layer.w_disj.data()[i];
        }
        ce += l2_lambda * sq;
    }
    return ce;
}

inline std::vector<int> predict_logits(const DenseMatrix& logits) {
    std::vector<int> out(logits.rows());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        int best = 0;
        for (std::size_t k = 1; k < logits.cols(); ++k)
            if (logits(i, k) > logits(i, best)) best = static_cast<int>(k);  // tie -> lower
        out[i] = best;
    }
    return out;
}

inline std::vector<int> predict(const RrlModel& m, const Dataset& ds) {
    const DenseMatrix u0 = assemble_u0_matrix(m.bounds, ds);
    return predict_logits(forward_discrete(m, u0).logits);
}

}  // namespace rrl
