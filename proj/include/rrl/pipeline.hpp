#pragma once

// End-to-end workflows shared by the command-line tool and the test suites:
// train a model on a dataset, evaluate it, and run stratified k-fold
// cross-validation.  All randomness is derived from a single seed so every
// report is reproducible byte for byte.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rrl/model_io.hpp"
#include "rrl/rules.hpp"

namespace rrl {

struct TrainResult {
    ModelFile file;
    std::vector<EpochStats> history;
    double best_valid_f1 = 0.0;
    std::size_t n_train = 0;
    std::size_t n_valid = 0;
};

// Bounds are sampled from the full dataset handed in (in cross-validation
// that is the training fold); the 95/5 validation split happens after.
// Sub-streams are derived at offsets far above any epoch index so they never
// collide with the per-epoch shuffle streams used inside fit().
inline TrainResult train_pipeline(const Dataset& data, const std::vector<std::size_t>& half_widths,
                                  const LafKind& laf, std::size_t bounds_k,
                                  const TrainConfig& cfg, double train_fraction = 0.95,
                                  bool head_skip = false) {
    cfg.validate();
    Rng root(cfg.seed);
    Rng bounds_rng = root.derive(1000000);
    Rng split_rng = root.derive(1000001);
    Rng init_rng = root.derive(1000002);

    const BinarizationBounds bounds = sample_bounds(data, bounds_k, bounds_rng);
    auto [train, valid] = split_train_validation(data, train_fraction, split_rng);

    TrainResult res;
    res.n_train = train.n();
    res.n_valid = valid.n();
    res.file.config = cfg;
    res.file.model =
        build_model(data.schema, bounds, half_widths, laf, cfg.temp_init, init_rng, head_skip);
    res.history = fit(res.file.model, train, valid, cfg);
    for (const EpochStats& st : res.history)
        res.best_valid_f1 = std::max(res.best_valid_f1, st.valid_f1);
    return res;
}

inline std::string history_csv(const std::vector<EpochStats>& history) {
    std::string out = "epoch,discrete_loss,continuous_loss,valid_macro_f1\n";
    for (std::size_t e = 0; e < history.size(); ++e)
        out += std::to_string(e) + "," + fmt_double(history[e].discrete_loss) + "," +
               fmt_double(history[e].continuous_loss) + "," +
               fmt_double(history[e].valid_f1) + "\n";
    return out;
}

struct EvalResult {
    double f1 = 0.0;
    std::vector<std::vector<std::size_t>> confusion;  // [true][pred]
    std::size_t edges = 0;
    std::string report;
};

inline std::string fmt_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// Evaluates the discrete model on `data`.  The edge count comes from rule
// extraction with `stats` as the activation sample (normally the training
// data, so the reported complexity matches what extraction would keep).
inline EvalResult evaluate_model(const RrlModel& m, const Dataset& data, const Dataset& stats) {
    const std::size_t M = m.schema.n_classes();
    EvalResult res;
    const std::vector<int> pred = predict(m, data);
    const std::vector<int> truth = data.label_indices();
    res.f1 = macro_f1(truth, pred, M);
    res.confusion.assign(M, std::vector<std::size_t>(M, 0));
    for (std::size_t i = 0; i < data.n(); ++i)
        ++res.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(pred[i])];
    res.edges = extract(m, stats).edge_count;

    const std::vector<std::string>& names = m.schema.columns[m.schema.label_column()].categories;
    std::string& r = res.report;
    r += "instances: " + std::to_string(data.n()) + "\n";
    r += "macro_f1: " + fmt_double(res.f1) + "\n";
    r += "edges: " + std::to_string(res.edges) + "\n";
    r += "confusion (rows = true, cols = predicted):\n";
    for (std::size_t t = 0; t < M; ++t) {
        r += "  " + names[t] + ":";
        for (std::size_t p = 0; p < M; ++p) r += " " + std::to_string(res.confusion[t][p]);
        r += "\n";
    }
    return res;
}

struct FoldOutcome {
    double f1 = 0.0;
    std::size_t edges = 0;
    ModelFile file;
    std::vector<std::size_t> test_idx;
};

struct CvResult {
    std::vector<FoldOutcome> folds;
    double mean_f1 = 0.0;
    double std_f1 = 0.0;
    double mean_log10_edges = 0.0;
    std::string csv;
};

// Stratified k-fold cross-validation.  Each fold gets its own derived seed,
// samples binarization bounds from its training portion, trains, and is
// scored (discrete model) on the held-out fold.  log10(#edges) clamps the
// edge count to >= 1 so a bias-only model does not produce -inf.
inline CvResult run_cv(const Dataset& data, std::size_t folds,
                       const std::vector<std::size_t>& half_widths, const LafKind& laf,
                       std::size_t bounds_k, const TrainConfig& base_cfg) {
    Rng root(base_cfg.seed);
    Rng fold_rng = root.derive(2000000);
    const FoldPlan plan = stratified_kfold(data, folds, fold_rng);

    CvResult res;
    res.csv = "fold,macro_f1,edges,log10_edges\n";
    double sum = 0.0, sumsq = 0.0, logsum = 0.0;
    for (std::size_t f = 0; f < folds; ++f) {
        const Dataset train = subset(data, plan.train_indices(f));
        const Dataset test = subset(data, plan.test_indices(f));
        TrainConfig cfg = base_cfg;
        cfg.seed = root.derive(2000001 + f).next_u64();

        TrainResult tr = train_pipeline(train, half_widths, laf, bounds_k, cfg);
        FoldOutcome out;
        out.file = std::move(tr.file);
        out.test_idx = plan.test_indices(f);
        const EvalResult ev = evaluate_model(out.file.model, test, train);
        out.f1 = ev.f1;
        out.edges = ev.edges;

        const double log_edges = std::log10(static_cast<double>(std::max<std::size_t>(out.edges, 1)));
        res.csv += std::to_string(f) + "," + fmt_double(out.f1) + "," +
                   std::to_string(out.edges) + "," + fmt_double(log_edges) + "\n";
        sum += out.f1;
        sumsq += out.f1 * out.f1;
        logsum += log_edges;
        res.folds.push_back(std::move(out));
    }
    const double n = static_cast<double>(folds);
    res.mean_f1 = sum / n;
    res.std_f1 = std::sqrt(std::max(0.0, sumsq / n - res.mean_f1 * res.mean_f1));
    res.mean_log10_edges = logsum / n;
    res.csv += "mean," + fmt_double(res.mean_f1) + ",," + fmt_double(res.mean_log10_edges) + "\n";
    res.csv += "std," + fmt_double(res.std_f1) + ",,\n";
    return res;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << text;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace rrl
