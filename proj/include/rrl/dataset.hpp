#pragma once

// Tabular data handling: schema sidecar parsing, CSV ingestion with one-hot
// encoding of discrete features, stratified splitting, and macro-F1.

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "rrl/matrix.hpp"

namespace rrl {

enum class ColumnKind { continuous, discrete, label };

struct SchemaColumn {
    std::string name;
    ColumnKind kind = ColumnKind::continuous;
    std::vector<std::string> categories;  // discrete/label only, in file order
};

// One line per column: `name,kind[,categories...]`.  Class index = position
// in the label line's category list, so the schema fixes the encoding.
struct FeatureSchema {
    std::vector<SchemaColumn> columns;

    std::size_t label_column() const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i].kind == ColumnKind::label) return i;
        throw std::runtime_error("schema: no label column");
    }
    std::size_t n_classes() const { return columns[label_column()].categories.size(); }
    std::size_t n_continuous() const {
        std::size_t m = 0;
        for (const auto& c : columns) m += c.kind == ColumnKind::continuous;
        return m;
    }
    std::size_t n_binary() const {
        std::size_t b = 0;
        for (const auto& c : columns)
            if (c.kind == ColumnKind::discrete) b += c.categories.size();
        return b;
    }

    void validate() const {
        std::size_t labels = 0;
        for (const auto& c : columns) {
            if (c.name.empty()) throw std::runtime_error("schema: empty column name");
            if (c.kind == ColumnKind::label) ++labels;
            if (c.kind != ColumnKind::continuous) {
                if (c.categories.empty())
                    throw std::runtime_error("schema: column '" + c.name + "' has no categories");
                std::unordered_set<std::string> seen(c.categories.begin(), c.categories.end());
                if (seen.size() != c.categories.size())
                    throw std::runtime_error("schema: column '" + c.name +
                                             "' has duplicate categories");
            }
        }
        if (labels != 1)
            throw std::runtime_error("schema: expected exactly one label column, found " +
                                     std::to_string(labels));
        if (n_classes() < 2) throw std::runtime_error("schema: need at least 2 classes");
    }

    static FeatureSchema parse(std::istream& in) {
        FeatureSchema s;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            SchemaColumn col;
            std::stringstream ls(line);
            std::string field;
            std::vector<std::string> fields;
            while (std::getline(ls, field, ',')) fields.push_back(field);
            if (fields.size() < 2)
                throw std::runtime_error("schema: bad line '" + line + "'");
            col.name = fields[0];
            if (fields[1] == "continuous") col.kind = ColumnKind::continuous;
            else if (fields[1] == "discrete") col.kind = ColumnKind::discrete;
            else if (fields[1] == "label") col.kind = ColumnKind::label;
            else throw std::runtime_error("schema: unknown kind '" + fields[1] + "'");
            col.categories.assign(fields.begin() + 2, fields.end());
            if (col.kind == ColumnKind::continuous && !col.categories.empty())
                throw std::runtime_error("schema: continuous column '" + col.name +
                                         "' lists categories");
            s.columns.push_back(std::move(col));
        }
        s.validate();
        return s;
    }

    static FeatureSchema load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open schema file: " + path);
        return parse(in);
    }
};

// Loaded table: continuous block, one-hot binary block (discrete features in
// schema order), one-hot labels.  Immutable after load.
struct Dataset {
    FeatureSchema schema;
    DenseMatrix continuous;  // N x m
    DenseMatrix binary;      // N x b
    DenseMatrix labels;      // N x M, one-hot

    std::size_t n() const { return labels.rows(); }

    int label_index(std::size_t i) const {
        for (std::size_t k = 0; k < labels.cols(); ++k)
            if (labels(i, k) == 1.0) return static_cast<int>(k);
        throw std::runtime_error("dataset: row without label");
    }
    std::vector<int> label_indices() const {
        std::vector<int> y(n());
        for (std::size_t i = 0; i < n(); ++i) y[i] = label_index(i);
        return y;
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline double parse_double(const std::string& tok, std::size_t row, const std::string& col) {
    double v = 0.0;
    const char* b = tok.data();
    const char* e = b + tok.size();
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e)
        throw std::runtime_error("row " + std::to_string(row) + ", column '" + col +
                                 "': cannot parse '" + tok + "' as a number");
    return v;
}

inline std::size_t category_index(const SchemaColumn& col, const std::string& tok,
                                  std::size_t row) {
    for (std::size_t c = 0; c < col.categories.size(); ++c)
        if (col.categories[c] == tok) return c;
    throw std::runtime_error("row " + std::to_string(row) + ", column '" + col.name +
                             "': unknown category '" + tok + "'");
}

}  // namespace detail

inline Dataset load_dataset(const std::string& data_path, const std::string& schema_path) {
    FeatureSchema schema = FeatureSchema::load(schema_path);
    std::ifstream in(data_path);
    if (!in) throw std::runtime_error("cannot open data file: " + data_path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(data_path + ": empty file");
    std::vector<std::string> header = detail::split_csv_line(line);
    if (header.size() != schema.columns.size())
        throw std::runtime_error(data_path + ": header has " + std::to_string(header.size()) +
                                 " columns, schema has " + std::to_string(schema.columns.size()));
    for (std::size_t c = 0; c < header.size(); ++c)
        if (header[c] != schema.columns[c].name)
            throw std::runtime_error(data_path + ": header column '" + header[c] +
                                     "' does not match schema column '" +
                                     schema.columns[c].name + "'");

    std::vector<std::vector<std::string>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string> fields = detail::split_csv_line(line);
        if (fields.size() != schema.columns.size())
            throw std::runtime_error(data_path + ": row " + std::to_string(lineno) + " has " +
                                     std::to_string(fields.size()) + " fields, expected " +
                                     std::to_string(schema.columns.size()));
        rows.push_back(std::move(fields));
    }
    if (rows.empty()) throw std::runtime_error(data_path + ": no data rows");

    Dataset ds;
    ds.schema = schema;
    const std::size_t n = rows.size();
    ds.continuous = DenseMatrix(n, schema.n_continuous());
    ds.binary = DenseMatrix(n, schema.n_binary());
    ds.labels = DenseMatrix(n, schema.n_classes());

    for (std::size_t i = 0; i < n; ++i) {
        std::size_t mc = 0, bc = 0;
        for (std::size_t c = 0; c < schema.columns.size(); ++c) {
            const SchemaColumn& col = schema.columns[c];
            const std::string& tok = rows[i][c];
            switch (col.kind) {
                case ColumnKind::continuous:
                    ds.continuous(i, mc++) = detail::parse_double(tok, i + 2, col.name);
                    break;
                case ColumnKind::discrete:
                    ds.binary(i, bc + detail::category_index(col, tok, i + 2)) = 1.0;
                    bc += col.categories.size();
                    break;
                case ColumnKind::label:
                    ds.labels(i, detail::category_index(col, tok, i + 2)) = 1.0;
                    break;
            }
        }
    }
    return ds;
}

inline Dataset subset(const Dataset& ds, const std::vector<std::size_t>& idx) {
    Dataset out;
    out.schema = ds.schema;
    out.continuous = DenseMatrix(idx.size(), ds.continuous.cols());
    out.binary = DenseMatrix(idx.size(), ds.binary.cols());
    out.labels = DenseMatrix(idx.size(), ds.labels.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= ds.n()) throw std::invalid_argument("subset: index out of range");
        for (std::size_t j = 0; j < ds.continuous.cols(); ++j)
            out.continuous(i, j) = ds.continuous(idx[i], j);
        for (std::size_t j = 0; j < ds.binary.cols(); ++j)
            out.binary(i, j) = ds.binary(idx[i], j);
        for (std::size_t j = 0; j < ds.labels.cols(); ++j)
            out.labels(i, j) = ds.labels(idx[i], j);
    }
    return out;
}

// Fold assignment per instance.  Stratified: within every class, fold counts
// differ by at most one.
struct FoldPlan {
    std::size_t k = 0;
    std::vector<std::size_t> assignments;

    std::vector<std::size_t> test_indices(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignments.size(); ++i)
            if (assignments[i] == fold) out.push_back(i);
        return out;
    }
    std::vector<std::size_t> train_indices(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignments.size(); ++i)
            if (assignments[i] != fold) out.push_back(i);
        return out;
    }
};

inline FoldPlan stratified_kfold(const Dataset& ds, std::size_t k, Rng& rng) {
    if (k < 2) throw std::invalid_argument("stratified_kfold: k must be >= 2");
    const std::size_t M = ds.schema.n_classes();
    std::vector<std::vector<std::size_t>> by_class(M);
    for (std::size_t i = 0; i < ds.n(); ++i)
        by_class[static_cast<std::size_t>(ds.label_index(i))].push_back(i);
    for (std::size_t c = 0; c < M; ++c)
        if (by_class[c].size() < k)
            throw std::invalid_argument("stratified_kfold: class " + std::to_string(c) +
                                        " has " + std::to_string(by_class[c].size()) +
                                        " instances, fewer than k=" + std::to_string(k));
    FoldPlan plan;
    plan.k = k;
    plan.assignments.assign(ds.n(), 0);
    for (std::size_t c = 0; c < M; ++c) {
        rng.shuffle(by_class[c]);
        // Round-robin with a per-class offset so the remainder instances do
        // not all land in fold 0.
        for (std::size_t i = 0; i < by_class[c].size(); ++i)
            plan.assignments[by_class[c][i]] = (i + c) % k;
    }
    return plan;
}

inline double macro_f1(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                       std::size_t n_classes) {
    if (y_true.size() != y_pred.size())
        throw std::invalid_argument("macro_f1: length mismatch");
    std::vector<double> tp(n_classes, 0), fp(n_classes, 0), fn(n_classes, 0);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        int t = y_true[i], p = y_pred[i];
        if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= n_classes ||
            static_cast<std::size_t>(p) >= n_classes)
            throw std::invalid_argument("macro_f1: class index out of range");
        if (t == p) tp[t] += 1;
        else { fp[p] += 1; fn[t] += 1; }
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        const double denom = 2 * tp[c] + fp[c] + fn[c];
        sum += denom == 0.0 ? 0.0 : 2 * tp[c] / denom;  // zero-denominator F1 := 0
    }
    return sum / static_cast<double>(n_classes);
}

inline std::pair<Dataset, Dataset> split_train_validation(const Dataset& ds, double fraction,
                                                          Rng& rng) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw std::invalid_argument("split_train_validation: fraction must be in (0,1)");
    const std::size_t M = ds.schema.n_classes();
    std::vector<std::vector<std::size_t>> by_class(M);
    for (std::size_t i = 0; i < ds.n(); ++i)
        by_class[static_cast<std::size_t>(ds.label_index(i))].push_back(i);

    // Largest-remainder allocation: per-class train counts sum to
    // round(fraction * N) and each class is split as close to `fraction` as
    // integers allow.
    const std::size_t target =
        static_cast<std::size_t>(fraction * static_cast<double>(ds.n()) + 0.5);
    std::vector<std::size_t> take(M);
    std::vector<std::pair<double, std::size_t>> remainder;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < M; ++c) {
        const double exact = fraction * static_cast<double>(by_class[c].size());
        take[c] = std::min(static_cast<std::size_t>(exact), by_class[c].size());
        assigned += take[c];
        remainder.emplace_back(exact - static_cast<double>(take[c]), c);
    }
    std::sort(remainder.begin(), remainder.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (std::size_t r = 0; assigned < target && r < remainder.size(); ++r) {
        const std::size_t c = remainder[r].second;
        if (take[c] < by_class[c].size()) { ++take[c]; ++assigned; }
    }

    std::vector<std::size_t> train_idx, valid_idx;
    for (std::size_t c = 0; c < M; ++c) {
        rng.shuffle(by_class[c]);
        for (std::size_t i = 0; i < by_class[c].size(); ++i)
            (i < take[c] ? train_idx : valid_idx).push_back(by_class[c][i]);
    }
    if (train_idx.empty() || valid_idx.empty())
        throw std::invalid_argument("split_train_validation: fraction yields an empty split");
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(valid_idx.begin(), valid_idx.end());
    return {subset(ds, train_idx), subset(ds, valid_idx)};
}

}  // namespace rrl
