#pragma once

// Model serialization: a self-describing versioned text container.  Floats
// are written in shortest round-trip form (std::to_chars), so save -> load ->
// save is byte-identical; that identity is what makes reruns checkable by
// byte comparison.

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rrl/model.hpp"
#include "rrl/trainer.hpp"

namespace rrl {

inline std::string fmt_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

namespace iodetail {

inline double parse_double(const std::string& tok, const std::string& what) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size())
        throw std::runtime_error("model file: bad float '" + tok + "' in " + what);
    return v;
}

inline unsigned long long parse_int(const std::string& tok, const std::string& what) {
    unsigned long long v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size())
        throw std::runtime_error("model file: bad integer '" + tok + "' in " + what);
    return v;
}

// Line reader with strict expectations.
struct Reader {
    std::istringstream in;
    std::string context;

    explicit Reader(std::string text) : in(std::move(text)) {}

    std::string line(const std::string& what) {
        std::string s;
        if (!std::getline(in, s)) throw std::runtime_error("model file: truncated at " + what);
        return s;
    }
    std::vector<std::string> fields(const std::string& what) {
        std::istringstream ls(line(what));
        std::vector<std::string> out;
        std::string tok;
        while (ls >> tok) out.push_back(tok);
        return out;
    }
    // `name v1 v2 ...` with an exact field count.
    std::vector<std::string> tagged(const std::string& name, std::size_t values) {
        std::vector<std::string> f = fields(name);
        if (f.empty() || f[0] != name || f.size() != values + 1)
            throw std::runtime_error("model file: expected '" + name + "' line");
        f.erase(f.begin());
        return f;
    }
};

inline void write_matrix_rows(std::string& out, const DenseMatrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out += ' ';
            out += fmt_double(m(i, j));
        }
        out += '\n';
    }
}

inline DenseMatrix read_matrix_rows(Reader& r, std::size_t rows, std::size_t cols,
                                    const std::string& what) {
    DenseMatrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        std::vector<std::string> f = r.fields(what);
        if (f.size() != cols)
            throw std::runtime_error("model file: row width mismatch in " + what);
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = parse_double(f[j], what);
    }
    return m;
}

inline const char* laf_name(LafFamily f) {
    switch (f) {
        case LafFamily::original: return "orig";
        case LafFamily::log_improved: return "logexp";
        case LafFamily::nlaf: return "nlaf";
    }
    return "?";
}

inline LafFamily laf_from_name(const std::string& s) {
    if (s == "orig") return LafFamily::original;
    if (s == "logexp") return LafFamily::log_improved;
    if (s == "nlaf") return LafFamily::nlaf;
    throw std::runtime_error("model file: unknown laf '" + s + "'");
}

inline const char* grafting_name(GraftingMode g) {
    switch (g) {
        case GraftingMode::single: return "single";
        case GraftingMode::hierarchical: return "hier";
        case GraftingMode::ste: return "ste";
    }
    return "?";
}

inline GraftingMode grafting_from_name(const std::string& s) {
    if (s == "single") return GraftingMode::single;
    if (s == "hier") return GraftingMode::hierarchical;
    if (s == "ste") return GraftingMode::ste;
    throw std::runtime_error("model file: unknown grafting mode '" + s + "'");
}

}  // namespace iodetail

struct ModelFile {
    static constexpr int version = 1;

    RrlModel model;
    TrainConfig config;  // echo of the training configuration

    std::string serialize() const {
        using iodetail::write_matrix_rows;
        std::string out;
        out += "rrl-model v" + std::to_string(version) + "\n";
        out += "rng " + std::string(Rng::algorithm()) + "\n";
        out += "config " + std::to_string(config.epochs) + " " +
               std::to_string(config.batch_size) + " " + fmt_double(config.learning_rate) +
               " " + fmt_double(config.lr_decay_factor) + " " +
               std::to_string(config.lr_decay_every) + " " + fmt_double(config.l2_lambda) +
               " " + iodetail::grafting_name(config.grafting) + " " +
               std::to_string(config.seed) + " " + fmt_double(config.temp_init) + "\n";

        out += "schema " + std::to_string(model.schema.columns.size()) + "\n";
        for (const auto& col : model.schema.columns) {
            out += col.name;
            out += col.kind == ColumnKind::continuous ? ",continuous"
                   : col.kind == ColumnKind::discrete ? ",discrete"
                                                      : ",label";
            for (const auto& c : col.categories) out += "," + c;
            out += '\n';
        }

        out += "bounds " + std::to_string(model.bounds.m()) + " " +
               std::to_string(model.bounds.k) + "\n";
        for (std::size_t j = 0; j < model.bounds.m(); ++j) {
            if (j) out += ' ';
            out += fmt_double(model.bounds.feat_min[j]);
        }
        out += model.bounds.m() ? "\n" : "";
        for (std::size_t j = 0; j < model.bounds.m(); ++j) {
            if (j) out += ' ';
            out += fmt_double(model.bounds.feat_max[j]);
        }
        out += model.bounds.m() ? "\n" : "";
        write_matrix_rows(out, model.bounds.lower);
        write_matrix_rows(out, model.bounds.upper);

        out += "layers " + std::to_string(model.n_layers()) + "\n";
        for (std::size_t l = 0; l < model.n_layers(); ++l) {
            const LogicalLayerParams& layer = model.layers[l];
            out += "layer " + std::to_string(layer.w_conj.rows()) + " " +
                   std::to_string(layer.w_disj.rows()) + " " + std::to_string(layer.n_in()) +
                   "\n";
            out += "skip";
            for (std::size_t s : model.skip_plan[l]) out += " " + std::to_string(s);
            out += '\n';
            const LafKind& laf = layer.laf;
            out += "laf " + std::string(iodetail::laf_name(laf.family)) + " " +
                   fmt_double(laf.epsilon) + " " + std::to_string(laf.grad_trick ? 1 : 0) +
                   " " + fmt_double(laf.nlaf.alpha) + " " + std::to_string(laf.nlaf.beta) +
                   " " + std::to_string(laf.nlaf.gamma) + " " + fmt_double(laf.nlaf.epsilon) +
                   "\n";
            write_matrix_rows(out, layer.w_conj);
            write_matrix_rows(out, layer.w_disj);
        }

        out += "head " + std::to_string(model.head.weights.rows()) + " " +
               std::to_string(model.head.weights.cols()) + " " +
               std::to_string(model.head_skip ? 1 : 0) + "\n";
        write_matrix_rows(out, model.head.weights);
        for (std::size_t k = 0; k < model.head.biases.size(); ++k) {
            if (k) out += ' ';
            out += fmt_double(model.head.biases[k]);
        }
        out += '\n';
        out += "logtemp " + fmt_double(model.head.log_temperature) + "\n";
        return out;
    }

    static ModelFile deserialize(std::string text) {
        using namespace iodetail;
        Reader r(std::move(text));
        const std::string head = r.line("header");
        if (head != "rrl-model v" + std::to_string(version))
            throw std::runtime_error("model file: unsupported version line '" + head +
                                     "' (expected 'rrl-model v" + std::to_string(version) +
                                     "')");
        ModelFile mf;
        r.tagged("rng", 1);

        std::vector<std::string> cfg = r.tagged("config", 9);
        mf.config.epochs = static_cast<std::size_t>(parse_int(cfg[0], "config"));
        mf.config.batch_size = static_cast<std::size_t>(parse_int(cfg[1], "config"));
        mf.config.learning_rate = parse_double(cfg[2], "config");
        mf.config.lr_decay_factor = parse_double(cfg[3], "config");
        mf.config.lr_decay_every = static_cast<std::size_t>(parse_int(cfg[4], "config"));
        mf.config.l2_lambda = parse_double(cfg[5], "config");
        mf.config.grafting = grafting_from_name(cfg[6]);
        mf.config.seed = static_cast<std::uint64_t>(parse_int(cfg[7], "config"));
        mf.config.temp_init = parse_double(cfg[8], "config");

        const std::size_t n_cols =
            static_cast<std::size_t>(parse_int(r.tagged("schema", 1)[0], "schema"));
        std::string schema_text;
        for (std::size_t i = 0; i < n_cols; ++i) schema_text += r.line("schema column") + "\n";
        std::istringstream ss(schema_text);
        mf.model.schema = FeatureSchema::parse(ss);

        std::vector<std::string> bt = r.tagged("bounds", 2);
        const std::size_t m = static_cast<std::size_t>(parse_int(bt[0], "bounds"));
        mf.model.bounds.k = static_cast<std::size_t>(parse_int(bt[1], "bounds"));
        mf.model.bounds.feat_min.resize(m);
        mf.model.bounds.feat_max.resize(m);
        if (m > 0) {
            std::vector<std::string> mins = r.fields("bounds min");
            std::vector<std::string> maxs = r.fields("bounds max");
            if (mins.size() != m || maxs.size() != m)
                throw std::runtime_error("model file: bounds range width mismatch");
            for (std::size_t j = 0; j < m; ++j) {
                mf.model.bounds.feat_min[j] = parse_double(mins[j], "bounds min");
                mf.model.bounds.feat_max[j] = parse_double(maxs[j], "bounds max");
            }
        }
        mf.model.bounds.lower = read_matrix_rows(r, m, mf.model.bounds.k, "bounds lower");
        mf.model.bounds.upper = read_matrix_rows(r, m, mf.model.bounds.k, "bounds upper");

        const std::size_t L =
            static_cast<std::size_t>(parse_int(r.tagged("layers", 1)[0], "layers"));
        for (std::size_t l = 0; l < L; ++l) {
            std::vector<std::string> lt = r.tagged("layer", 3);
            const std::size_t nc = static_cast<std::size_t>(parse_int(lt[0], "layer"));
            const std::size_t nd = static_cast<std::size_t>(parse_int(lt[1], "layer"));
            const std::size_t nin = static_cast<std::size_t>(parse_int(lt[2], "layer"));
            std::vector<std::string> sk = r.fields("skip");
            if (sk.empty() || sk[0] != "skip")
                throw std::runtime_error("model file: expected 'skip' line");
            std::vector<std::size_t> plan;
            for (std::size_t i = 1; i < sk.size(); ++i)
                plan.push_back(static_cast<std::size_t>(parse_int(sk[i], "skip")));
            mf.model.skip_plan.push_back(plan);

            std::vector<std::string> lf = r.tagged("laf", 7);
            LogicalLayerParams layer;
            layer.laf.family = laf_from_name(lf[0]);
            layer.laf.epsilon = parse_double(lf[1], "laf");
            layer.laf.grad_trick = parse_int(lf[2], "laf") != 0;
            layer.laf.nlaf.alpha = parse_double(lf[3], "laf");
            layer.laf.nlaf.beta = static_cast<int>(parse_int(lf[4], "laf"));
            layer.laf.nlaf.gamma = static_cast<int>(parse_int(lf[5], "laf"));
            layer.laf.nlaf.epsilon = parse_double(lf[6], "laf");
            layer.w_conj = read_matrix_rows(r, nc, nin, "w_conj");
            layer.w_disj = read_matrix_rows(r, nd, nin, "w_disj");
            mf.model.layers.push_back(std::move(layer));
        }

        std::vector<std::string> ht = r.tagged("head", 3);
        const std::size_t hm = static_cast<std::size_t>(parse_int(ht[0], "head"));
        const std::size_t hc = static_cast<std::size_t>(parse_int(ht[1], "head"));
        mf.model.head_skip = parse_int(ht[2], "head") != 0;
        mf.model.head.weights = read_matrix_rows(r, hm, hc, "head weights");
        std::vector<std::string> bs = r.fields("head biases");
        if (bs.size() != hm) throw std::runtime_error("model file: bias width mismatch");
        mf.model.head.biases.resize(hm);
        for (std::size_t k = 0; k < hm; ++k)
            mf.model.head.biases[k] = parse_double(bs[k], "head biases");
        mf.model.head.log_temperature = parse_double(r.tagged("logtemp", 1)[0], "logtemp");

        mf.model.validate();
        return mf;
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write model file: " + path);
        out << serialize();
    }

    static ModelFile load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open model file: " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return deserialize(ss.str());
    }
};

}  // namespace rrl
