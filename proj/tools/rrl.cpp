// Command-line front end: train / cv / eval / explain.
//
// Exit codes: 0 success, 2 usage or input-contract error (bad flags, missing
// or malformed input files, schema mismatch), 3 runtime or numeric failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "rrl/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Options {
    std::string data;
    std::string schema;
    std::string model;
    std::string out_dir;
    std::string layers = "64";
    std::string laf = "logexp";
    std::string nlaf_preset = "a";
    std::string grafting = "hier";
    std::size_t bounds_k = 5;
    std::size_t epochs = 400;
    std::size_t batch = 32;
    std::size_t lr_decay_every = 100;
    std::size_t folds = 5;
    double lr = 5e-3;
    double lr_decay = 0.75;
    double l2 = 0.0;
    double temp_init = 1.0;
    std::uint64_t seed = 1;
};

std::vector<std::size_t> parse_layers(const std::string& spec) {
    std::vector<std::size_t> widths;
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        const std::size_t comma = std::min(spec.find(',', pos), spec.size());
        const std::string tok = spec.substr(pos, comma - pos);
        unsigned long long v = 0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || p != tok.data() + tok.size() || v == 0)
            throw std::invalid_argument("--layers: '" + tok +
                                        "' is not a positive integer (expected e.g. 64,32)");
        widths.push_back(static_cast<std::size_t>(v));
        pos = comma + 1;
    }
    return widths;
}

rrl::LafKind make_laf(const Options& o) {
    rrl::LafKind kind;
    if (o.laf == "orig") kind.family = rrl::LafFamily::original;
    else if (o.laf == "logexp") kind.family = rrl::LafFamily::log_improved;
    else if (o.laf == "nlaf") kind.family = rrl::LafFamily::nlaf;
    else throw std::invalid_argument("--laf: unknown family '" + o.laf + "'");
    kind.nlaf = rrl::NlafParams::preset(o.nlaf_preset.at(0));
    return kind;
}

rrl::TrainConfig make_config(const Options& o) {
    rrl::TrainConfig cfg;
    cfg.epochs = o.epochs;
    cfg.batch_size = o.batch;
    cfg.learning_rate = o.lr;
    cfg.lr_decay_factor = o.lr_decay;
    cfg.lr_decay_every = o.lr_decay_every;
    cfg.l2_lambda = o.l2;
    cfg.temp_init = o.temp_init;
    cfg.seed = o.seed;
    if (o.grafting == "single") cfg.grafting = rrl::GraftingMode::single;
    else if (o.grafting == "hier") cfg.grafting = rrl::GraftingMode::hierarchical;
    else if (o.grafting == "ste") cfg.grafting = rrl::GraftingMode::ste;
    else throw std::invalid_argument("--grafting: unknown mode '" + o.grafting + "'");
    cfg.validate();
    return cfg;
}

std::string schema_diff(const rrl::FeatureSchema& a, const rrl::FeatureSchema& b) {
    if (a.columns.size() != b.columns.size())
        return "column count " + std::to_string(a.columns.size()) + " vs " +
               std::to_string(b.columns.size());
    for (std::size_t i = 0; i < a.columns.size(); ++i) {
        const auto& x = a.columns[i];
        const auto& y = b.columns[i];
        if (x.name != y.name || x.kind != y.kind || x.categories != y.categories)
            return "column '" + x.name + "' differs";
    }
    return "";
}

int usage_error(const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
}

int runtime_error_exit(const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
}

int cmd_train(const Options& o) {
    rrl::Dataset data;
    std::vector<std::size_t> widths;
    rrl::LafKind laf;
    rrl::TrainConfig cfg;
    try {
        data = rrl::load_dataset(o.data, o.schema);
        widths = parse_layers(o.layers);
        laf = make_laf(o);
        cfg = make_config(o);
    } catch (const std::exception& e) {
        return usage_error(e);
    }
    try {
        fs::create_directories(o.out_dir);
        rrl::TrainResult tr = rrl::train_pipeline(data, widths, laf, o.bounds_k, cfg);
        const std::string model_path =
            o.model.empty() ? (fs::path(o.out_dir) / "model.txt").string() : o.model;
        tr.file.save(model_path);
        rrl::write_text_file((fs::path(o.out_dir) / "loss_history.csv").string(),
                             rrl::history_csv(tr.history));

        std::string report;
        report += "instances: " + std::to_string(data.n()) + "\n";
        report += "train: " + std::to_string(tr.n_train) + "\n";
        report += "valid: " + std::to_string(tr.n_valid) + "\n";
        report += "epochs: " + std::to_string(tr.history.size()) + "\n";
        report += "best_valid_macro_f1: " + rrl::fmt_double(tr.best_valid_f1) + "\n";
        if (!tr.history.empty()) {
            report += "final_discrete_loss: " + rrl::fmt_double(tr.history.back().discrete_loss) + "\n";
            report +=
                "final_continuous_loss: " + rrl::fmt_double(tr.history.back().continuous_loss) + "\n";
        }
        report += "model: " + model_path + "\n";
        rrl::write_text_file((fs::path(o.out_dir) / "train_report.txt").string(), report);
        std::cout << report;
        return 0;
    } catch (const std::exception& e) {
        return runtime_error_exit(e);
    }
}

int cmd_cv(const Options& o) {
    rrl::Dataset data;
    std::vector<std::size_t> widths;
    rrl::LafKind laf;
    rrl::TrainConfig cfg;
    try {
        data = rrl::load_dataset(o.data, o.schema);
        widths = parse_layers(o.layers);
        laf = make_laf(o);
        cfg = make_config(o);
        if (o.folds < 2) throw std::invalid_argument("--folds must be >= 2");
    } catch (const std::exception& e) {
        return usage_error(e);
    }
    try {
        fs::create_directories(o.out_dir);
        rrl::CvResult cv = rrl::run_cv(data, o.folds, widths, laf, o.bounds_k, cfg);
        rrl::write_text_file((fs::path(o.out_dir) / "cv_report.csv").string(), cv.csv);
        for (std::size_t f = 0; f < cv.folds.size(); ++f)
            cv.folds[f].file.save(
                (fs::path(o.out_dir) / ("fold_" + std::to_string(f) + ".model")).string());
        std::cout << cv.csv;
        return 0;
    } catch (const std::exception& e) {
        return runtime_error_exit(e);
    }
}

int cmd_eval(const Options& o) {
    rrl::Dataset data;
    rrl::ModelFile mf;
    try {
        mf = rrl::ModelFile::load(o.model);
        data = rrl::load_dataset(o.data, o.schema);
        const std::string diff = schema_diff(mf.model.schema, data.schema);
        if (!diff.empty())
            throw std::invalid_argument("schema mismatch between model and data: " + diff);
    } catch (const std::exception& e) {
        return usage_error(e);
    }
    try {
        const rrl::EvalResult ev = rrl::evaluate_model(mf.model, data, data);
        std::cout << ev.report;
        if (!o.out_dir.empty()) {
            fs::create_directories(o.out_dir);
            rrl::write_text_file((fs::path(o.out_dir) / "eval_report.txt").string(), ev.report);
        }
        return 0;
    } catch (const std::exception& e) {
        return runtime_error_exit(e);
    }
}

int cmd_explain(const Options& o) {
    rrl::Dataset data;
    rrl::ModelFile mf;
    try {
        mf = rrl::ModelFile::load(o.model);
        data = rrl::load_dataset(o.data, o.schema);
        const std::string diff = schema_diff(mf.model.schema, data.schema);
        if (!diff.empty())
            throw std::invalid_argument("schema mismatch between model and data: " + diff);
    } catch (const std::exception& e) {
        return usage_error(e);
    }
    try {
        fs::create_directories(o.out_dir);
        const rrl::RuleSet rs = rrl::extract(mf.model, data);
        std::string doc = rrl::render(rs, mf.model.schema);

        // Fidelity of the extracted rules against the discrete network on the
        // provided data: logits must agree exactly.
        const rrl::DenseMatrix u0 = rrl::assemble_u0_matrix(mf.model.bounds, data);
        const rrl::ForwardResult fw = rrl::forward_discrete(mf.model, u0);
        std::size_t match = 0;
        for (std::size_t i = 0; i < data.n(); ++i) {
            std::vector<double> row(u0.row(i), u0.row(i) + u0.cols());
            const std::vector<double> logits = rs.evaluate_logits(row);
            bool same = true;
            for (std::size_t k = 0; k < logits.size(); ++k)
                if (logits[k] != fw.logits(i, k)) same = false;
            if (same) ++match;
        }
        doc += "fidelity: " + std::to_string(match) + "/" + std::to_string(data.n()) +
               " instances match the network exactly\n";
        rrl::write_text_file((fs::path(o.out_dir) / "rules.txt").string(), doc);

        ordered_json j;
        j["classes"] = mf.model.schema.columns[mf.model.schema.label_column()].categories;
        j["biases"] = rs.biases;
        j["edges"] = rs.edge_count;
        ordered_json arr = ordered_json::array();
        for (const rrl::Rule& r : rs.rules) {
            ordered_json jr;
            jr["kind"] = r.kind == rrl::NodeKind::conj ? "conj" : "disj";
            jr["condition"] = r.rendered;
            jr["weights"] = r.per_class_weight;
            arr.push_back(jr);
        }
        j["rules"] = arr;
        rrl::write_text_file((fs::path(o.out_dir) / "rules.json").string(), j.dump(2) + "\n");

        // Head-weight distribution: per rule the largest |class weight|,
        // normalized by the global maximum (1.0 for the strongest rule).
        double max_abs = 0.0;
        std::vector<double> strength;
        for (const rrl::Rule& r : rs.rules) {
            double s = 0.0;
            for (double w : r.per_class_weight) s = std::max(s, std::abs(w));
            strength.push_back(s);
            max_abs = std::max(max_abs, s);
        }
        std::string csv = "rule,max_abs_weight,normalized\n";
        for (std::size_t i = 0; i < strength.size(); ++i)
            csv += std::to_string(i) + "," + rrl::fmt_double(strength[i]) + "," +
                   rrl::fmt_double(max_abs > 0 ? strength[i] / max_abs : 0.0) + "\n";
        rrl::write_text_file((fs::path(o.out_dir) / "rule_weights.csv").string(), csv);

        std::cout << doc;
        return 0;
    } catch (const std::exception& e) {
        return runtime_error_exit(e);
    }
}

void add_data_flags(CLI::App* c, Options& o) {
    c->add_option("--data", o.data, "CSV data file")->required();
    c->add_option("--schema", o.schema, "schema sidecar file")->required();
}

void add_train_flags(CLI::App* c, Options& o) {
    c->add_option("--layers", o.layers, "comma-separated logical layer half-widths");
    c->add_option("--laf", o.laf, "logical activation family")
        ->check(CLI::IsMember({"orig", "logexp", "nlaf"}));
    c->add_option("--nlaf-preset", o.nlaf_preset, "NLAF parameter preset")
        ->check(CLI::IsMember({"a", "b", "c"}));
    c->add_option("--grafting", o.grafting, "gradient grafting mode")
        ->check(CLI::IsMember({"single", "hier", "ste"}));
    c->add_option("--bounds-k", o.bounds_k, "binarization bounds per direction per feature");
    c->add_option("--epochs", o.epochs, "training epochs");
    c->add_option("--batch", o.batch, "mini-batch size");
    c->add_option("--lr", o.lr, "initial learning rate");
    c->add_option("--lr-decay", o.lr_decay, "learning-rate decay factor");
    c->add_option("--lr-decay-every", o.lr_decay_every, "epochs between decays");
    c->add_option("--l2", o.l2, "L2 penalty on logical-layer weights");
    c->add_option("--temp-init", o.temp_init, "initial softmax temperature");
    c->add_option("--seed", o.seed, "master random seed");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rule-based representation learner"};
    app.require_subcommand(1);
    Options o;

    CLI::App* train = app.add_subcommand("train", "train a model on a dataset");
    add_data_flags(train, o);
    add_train_flags(train, o);
    train->add_option("--model", o.model, "output model path (default <out-dir>/model.txt)");
    train->add_option("--out-dir", o.out_dir, "output directory")->required();

    CLI::App* cv = app.add_subcommand("cv", "stratified k-fold cross-validation");
    add_data_flags(cv, o);
    add_train_flags(cv, o);
    cv->add_option("--folds", o.folds, "number of folds");
    cv->add_option("--out-dir", o.out_dir, "output directory")->required();

    CLI::App* eval = app.add_subcommand("eval", "evaluate a trained model");
    add_data_flags(eval, o);
    eval->add_option("--model", o.model, "trained model file")->required();
    eval->add_option("--out-dir", o.out_dir, "optional output directory");

    CLI::App* explain = app.add_subcommand("explain", "extract and render the rule set");
    add_data_flags(explain, o);
    explain->add_option("--model", o.model, "trained model file")->required();
    explain->add_option("--out-dir", o.out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (train->parsed()) return cmd_train(o);
    if (cv->parsed()) return cmd_cv(o);
    if (eval->parsed()) return cmd_eval(o);
    if (explain->parsed()) return cmd_explain(o);
    return 2;
}
