#pragma once

// Rule extraction from a trained model: binarize the weights, remove dead
// nodes (analytically constant or constant over the supplied data), fold the
// constants into their consumers, merge duplicate nodes, drop head columns
// whose weights are all dust, and render what survives as weighted rules.
//
// Every pass preserves the discrete model's logits exactly on the data the
// constants were measured on; the analytic prunes (bound contradictions and
// tautologies, one-hot exclusivity/completeness) are input-independent.

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "rrl/model.hpp"

namespace rrl {

// Reference to a value in the layered graph: src 0 is the binarized input
// space (idx = u0 atom), src l >= 1 is logical layer l (idx = node index in
// the ORIGINAL, unpruned layer).
struct Lit {
    std::size_t src = 0;
    std::size_t idx = 0;
    bool operator<(const Lit& o) const { return src != o.src ? src < o.src : idx < o.idx; }
    bool operator==(const Lit& o) const { return src == o.src && idx == o.idx; }
};

struct Rule {
    NodeKind kind = NodeKind::conj;
    std::vector<Lit> literals;
    std::string rendered;
    std::vector<double> per_class_weight;
    Lit ref;  // the graph node this top-level rule points at
};

namespace ruledetail {

enum class NodeState { alive, const0, const1, merged };

struct GraphNode {
    NodeState state = NodeState::alive;
    NodeKind kind = NodeKind::conj;
    std::size_t merged_into = 0;        // valid when state == merged
    std::vector<Lit> lits;              // valid when state == alive
    bool reachable = false;
};

// Atom metadata for the analytic checks.
struct AtomInfo {
    enum Kind { lower, upper, onehot } kind = onehot;
    std::size_t feature = 0;   // continuous feature index or discrete column index
    double threshold = 0.0;    // lower/upper only
    std::size_t category = 0;  // onehot only
    std::size_t n_categories = 0;
};

inline std::vector<AtomInfo> atom_table(const BinarizationBounds& b,
                                        const FeatureSchema& schema) {
    std::vector<AtomInfo> atoms;
    for (std::size_t j = 0; j < b.m(); ++j) {
        for (std::size_t i = 0; i < b.k; ++i)
            atoms.push_back({AtomInfo::lower, j, b.lower(j, i), 0, 0});
        for (std::size_t i = 0; i < b.k; ++i)
            atoms.push_back({AtomInfo::upper, j, b.upper(j, i), 0, 0});
    }
    std::size_t disc = 0;
    for (const auto& col : schema.columns) {
        if (col.kind != ColumnKind::discrete) continue;
        for (std::size_t c = 0; c < col.categories.size(); ++c)
            atoms.push_back({AtomInfo::onehot, disc, 0.0, c, col.categories.size()});
        ++disc;
    }
    return atoms;
}

// Conjunction over these atoms is unsatisfiable for every real input.
inline bool conj_contradiction(const std::vector<Lit>& lits, const std::vector<AtomInfo>& atoms) {
    for (std::size_t a = 0; a < lits.size(); ++a) {
        if (lits[a].src != 0) continue;
        const AtomInfo& x = atoms[lits[a].idx];
        for (std::size_t b = a + 1; b < lits.size(); ++b) {
            if (lits[b].src != 0) continue;
            const AtomInfo& y = atoms[lits[b].idx];
            if (x.kind == AtomInfo::onehot && y.kind == AtomInfo::onehot &&
                x.feature == y.feature && x.category != y.category)
                return true;  // one-hot exclusivity
            if (x.kind != AtomInfo::onehot && y.kind != AtomInfo::onehot &&
                x.feature == y.feature && x.kind != y.kind) {
                const double t = x.kind == AtomInfo::lower ? x.threshold : y.threshold;
                const double h = x.kind == AtomInfo::lower ? y.threshold : x.threshold;
                if (t >= h) return true;  // v > T and v < H with T >= H
            }
        }
    }
    return false;
}

// Disjunction over these atoms is satisfied by every real input.
inline bool disj_tautology(const std::vector<Lit>& lits, const std::vector<AtomInfo>& atoms) {
    std::map<std::size_t, std::vector<bool>> seen_cats;
    for (std::size_t a = 0; a < lits.size(); ++a) {
        if (lits[a].src != 0) continue;
        const AtomInfo& x = atoms[lits[a].idx];
        if (x.kind == AtomInfo::onehot) {
            auto& v = seen_cats[x.feature];
            v.resize(x.n_categories, false);
            v[x.category] = true;
            continue;
        }
        for (std::size_t b = a + 1; b < lits.size(); ++b) {
            if (lits[b].src != 0) continue;
            const AtomInfo& y = atoms[lits[b].idx];
            if (y.kind == AtomInfo::onehot || x.feature != y.feature || x.kind == y.kind)
                continue;
            const double t = x.kind == AtomInfo::lower ? x.threshold : y.threshold;
            const double h = x.kind == AtomInfo::lower ? y.threshold : x.threshold;
            if (t < h) return true;  // v > T or v < H with T < H covers all v
        }
    }
    for (const auto& [feat, cats] : seen_cats)  // one-hot completeness
        if (std::all_of(cats.begin(), cats.end(), [](bool x) { return x; })) return true;
    return false;
}

}  // namespace ruledetail

struct RuleSet {
    std::size_t n_classes = 0;
    std::vector<Rule> rules;     // top-level, sorted by max |class weight| desc
    std::vector<double> biases;  // per class, with folded constants (display form)
    std::size_t edge_count = 0;
    std::size_t dead_nodes_removed = 0;
    std::size_t merged_duplicates = 0;
    // Pruned graph, per layer, indexed by original node id (evaluation and
    // nested rendering need it).
    std::vector<std::vector<ruledetail::GraphNode>> graph;
    std::vector<std::string> atom_names;
    // Raw head kept in original column order.  The merged rule weights and
    // folded biases above are equal in real arithmetic, but only summing the
    // original columns in their original order reproduces the network's
    // float-for-float logits; that identity is what evaluate_logits promises.
    DenseMatrix raw_head;                 // M x n_head_cols
    std::vector<double> raw_biases;       // M
    std::vector<Lit> head_cols;           // original column -> graph reference

    // Discrete logits of the pruned rule set for one assembled u0 vector.
    // Node values come from the pruned graph (constants, merges, pruned
    // literal lists); the head sum mirrors the network's accumulation order.
    std::vector<double> evaluate_logits(const std::vector<double>& u0) const {
        std::vector<std::vector<double>> values;
        values.push_back(u0);
        for (const auto& layer : graph) {
            std::vector<double> out(layer.size(), 0.0);
            for (std::size_t r = 0; r < layer.size(); ++r) {
                const auto& node = layer[r];
                switch (node.state) {
                    case ruledetail::NodeState::const0: out[r] = 0.0; break;
                    case ruledetail::NodeState::const1: out[r] = 1.0; break;
                    case ruledetail::NodeState::merged: out[r] = out[node.merged_into]; break;
                    case ruledetail::NodeState::alive: {
                        double v = node.kind == NodeKind::conj ? 1.0 : 0.0;
                        for (const Lit& lit : node.lits) {
                            const double x = values[lit.src][lit.idx];
                            if (node.kind == NodeKind::conj && x == 0.0) { v = 0.0; break; }
                            if (node.kind == NodeKind::disj && x == 1.0) { v = 1.0; break; }
                        }
                        out[r] = v;
                        break;
                    }
                }
            }
            values.push_back(std::move(out));
        }
        std::vector<double> logits(n_classes, 0.0);
        for (std::size_t k = 0; k < n_classes; ++k) {
            double acc = 0.0;
            for (std::size_t col = 0; col < head_cols.size(); ++col)
                if (values[head_cols[col].src][head_cols[col].idx] == 1.0)
                    acc += raw_head(k, col);
            logits[k] = acc + raw_biases[k];
        }
        return logits;
    }
};

inline std::size_t count_edges(const RuleSet& rs) {
    std::size_t edges = 0;
    for (const auto& layer : rs.graph)
        for (const auto& node : layer)
            if (node.state == ruledetail::NodeState::alive && node.reachable)
                edges += node.lits.size();
    for (const Rule& rule : rs.rules)
        for (double w : rule.per_class_weight)
            if (std::abs(w) >= 1e-6) ++edges;
    return edges;
}

namespace ruledetail {

inline std::string render_node(const RuleSet& rs, const Lit& ref, bool parenthesize);

inline std::string render_literals(const RuleSet& rs, const GraphNode& node) {
    std::string sep = node.kind == NodeKind::conj ? " ∧ " : " ∨ ";
    std::string out;
    for (std::size_t i = 0; i < node.lits.size(); ++i) {
        if (i) out += sep;
        out += render_node(rs, node.lits[i], true);
    }
    return out;
}

inline std::string render_node(const RuleSet& rs, const Lit& ref, bool parenthesize) {
    if (ref.src == 0) return rs.atom_names[ref.idx];
    const GraphNode& node = rs.graph[ref.src - 1][ref.idx];
    if (node.state == NodeState::merged)
        return render_node(rs, {ref.src, node.merged_into}, parenthesize);
    if (node.state == NodeState::const0) return "false";
    if (node.state == NodeState::const1) return "true";
    if (node.lits.size() == 1) return render_node(rs, node.lits[0], parenthesize);
    std::string body = render_literals(rs, node);
    return parenthesize ? "(" + body + ")" : body;
}

}  // namespace ruledetail

// The extraction pipeline.  `stats` supplies the activation statistics for
// the empirical dead-node test (normally the training split).
inline RuleSet extract(const RrlModel& m, const Dataset& stats) {
    using namespace ruledetail;
    m.validate();
    const std::size_t L = m.n_layers();
    const std::size_t M = m.schema.n_classes();

    RuleSet rs;
    rs.n_classes = M;
    rs.atom_names = bound_feature_names(m.bounds, m.schema);
    const std::vector<AtomInfo> atoms = atom_table(m.bounds, m.schema);

    // Discrete activations over the stats data, for the empirical test.
    const DenseMatrix u0 = assemble_u0_matrix(m.bounds, stats);
    const ForwardResult fwd = forward_discrete(m, u0);

    auto column_constant = [&](const DenseMatrix& mat, std::size_t col, double& value) {
        value = mat(0, col);
        for (std::size_t i = 1; i < mat.rows(); ++i)
            if (mat(i, col) != value) return false;
        return true;
    };

    // Atom states (src 0): constants can only come from the data.
    std::vector<GraphNode> atom_state(u0.cols());
    for (std::size_t a = 0; a < u0.cols(); ++a) {
        double v;
        if (column_constant(u0, a, v))
            atom_state[a].state = v == 1.0 ? NodeState::const1 : NodeState::const0;
    }

    rs.graph.assign(L, {});
    auto state_of = [&](const Lit& lit) -> const GraphNode& {
        return lit.src == 0 ? atom_state[lit.idx] : rs.graph[lit.src - 1][lit.idx];
    };

    for (std::size_t l = 1; l <= L; ++l) {
        const LogicalLayerParams& layer = m.layers[l - 1];
        const DenseMatrix wc = binarize_weights(layer.w_conj);
        const DenseMatrix wd = binarize_weights(layer.w_disj);

        // Column -> (src, idx) map for this layer's concatenated input.
        std::vector<Lit> col_ref;
        for (std::size_t src : m.skip_plan[l - 1])
            for (std::size_t j = 0; j < m.source_width(src); ++j) col_ref.push_back({src, j});

        std::map<std::pair<int, std::vector<Lit>>, std::size_t> canonical;  // -> node id
        std::vector<GraphNode>& nodes = rs.graph[l - 1];
        nodes.resize(layer.n_out());

        for (std::size_t r = 0; r < layer.n_out(); ++r) {
            const bool is_conj = r < wc.rows();
            const DenseMatrix& w = is_conj ? wc : wd;
            const std::size_t row = is_conj ? r : r - wc.rows();
            GraphNode& node = nodes[r];
            node.kind = is_conj ? NodeKind::conj : NodeKind::disj;

            // Gather selected literals, folding source constants and
            // redirecting merged sources.
            bool forced = false;  // conj hit a constant 0 / disj hit a constant 1
            std::vector<Lit> lits;
            for (std::size_t j = 0; j < w.cols() && !forced; ++j) {
                if (w(row, j) != 1.0) continue;
                Lit lit = col_ref[j];
                const GraphNode* src = &state_of(lit);
                if (src->state == NodeState::merged) {
                    lit.idx = src->merged_into;
                    src = &state_of(lit);
                }
                switch (src->state) {
                    case NodeState::const1:
                        if (node.kind == NodeKind::disj) forced = true;  // saturates
                        break;                                           // conj: drop
                    case NodeState::const0:
                        if (node.kind == NodeKind::conj) forced = true;  // kills
                        break;                                           // disj: drop
                    default: lits.push_back(lit);
                }
            }

            if (forced) {
                node.state = node.kind == NodeKind::conj ? NodeState::const0 : NodeState::const1;
                ++rs.dead_nodes_removed;
                continue;
            }
            std::sort(lits.begin(), lits.end());
            lits.erase(std::unique(lits.begin(), lits.end()), lits.end());

            if (lits.empty()) {  // vacuous (possibly after constant folding)
                node.state = node.kind == NodeKind::conj ? NodeState::const1 : NodeState::const0;
                ++rs.dead_nodes_removed;
                continue;
            }
            if (node.kind == NodeKind::conj && conj_contradiction(lits, atoms)) {
                node.state = NodeState::const0;
                ++rs.dead_nodes_removed;
                continue;
            }
            if (node.kind == NodeKind::disj && disj_tautology(lits, atoms)) {
                node.state = NodeState::const1;
                ++rs.dead_nodes_removed;
                continue;
            }
            // Empirical: constant activation over the stats data.
            double v;
            if (column_constant(fwd.outputs[l], r, v)) {
                node.state = v == 1.0 ? NodeState::const1 : NodeState::const0;
                ++rs.dead_nodes_removed;
                continue;
            }
            const auto key = std::make_pair(node.kind == NodeKind::conj ? 0 : 1, lits);
            auto [it, inserted] = canonical.try_emplace(key, r);
            if (!inserted) {
                node.state = NodeState::merged;
                node.merged_into = it->second;
                ++rs.merged_duplicates;
                continue;
            }
            node.lits = std::move(lits);
        }
    }

    // Head: fold constants into biases, accumulate weights per surviving
    // target (summing across merged duplicates), drop all-dust columns.
    rs.biases = m.head.biases;
    std::vector<Lit> head_ref;
    if (m.head_skip && L >= 2)
        for (std::size_t j = 0; j < m.source_width(L - 1); ++j) head_ref.push_back({L - 1, j});
    for (std::size_t j = 0; j < m.source_width(L); ++j) head_ref.push_back({L, j});
    rs.raw_head = m.head.weights;
    rs.raw_biases = m.head.biases;
    rs.head_cols = head_ref;

    std::map<Lit, std::vector<double>> head_weights;
    for (std::size_t col = 0; col < head_ref.size(); ++col) {
        Lit ref = head_ref[col];
        const GraphNode* src = &rs.graph[ref.src - 1][ref.idx];
        if (src->state == NodeState::merged) {
            ref.idx = src->merged_into;
            src = &rs.graph[ref.src - 1][ref.idx];
        }
        if (src->state == NodeState::const0) continue;
        if (src->state == NodeState::const1) {
            for (std::size_t k = 0; k < M; ++k) rs.biases[k] += m.head.weights(k, col);
            continue;
        }
        auto& acc = head_weights[ref];
        acc.resize(M, 0.0);
        for (std::size_t k = 0; k < M; ++k) acc[k] += m.head.weights(k, col);
    }

    for (auto& [ref, w] : head_weights) {
        const bool dust =
            std::all_of(w.begin(), w.end(), [](double x) { return std::abs(x) < 1e-6; });
        if (dust) continue;
        Rule rule;
        rule.ref = ref;
        rule.kind = rs.graph[ref.src - 1][ref.idx].kind;
        rule.literals = rs.graph[ref.src - 1][ref.idx].lits;
        rule.per_class_weight = w;
        rs.rules.push_back(std::move(rule));
    }

    // Reachability from the surviving head targets.
    std::vector<Lit> stack;
    for (const Rule& rule : rs.rules) stack.push_back(rule.ref);
    while (!stack.empty()) {
        const Lit at = stack.back();
        stack.pop_back();
        if (at.src == 0) continue;
        GraphNode& node = rs.graph[at.src - 1][at.idx];
        if (node.reachable) continue;
        node.reachable = true;
        for (const Lit& lit : node.lits) stack.push_back(lit);
    }

    // Render and sort: strongest head influence first, deterministic ties.
    for (Rule& rule : rs.rules)
        rule.rendered = ruledetail::render_node(rs, rule.ref, false);
    std::sort(rs.rules.begin(), rs.rules.end(), [](const Rule& a, const Rule& b) {
        double ma = 0.0, mb = 0.0;
        for (double w : a.per_class_weight) ma = std::max(ma, std::abs(w));
        for (double w : b.per_class_weight) mb = std::max(mb, std::abs(w));
        if (ma != mb) return ma > mb;
        return a.ref < b.ref;
    });

    rs.edge_count = count_edges(rs);
    return rs;
}

// Human-readable rule document: per-class biases, then one line per rule with
// all class weights (4 decimals) and the rendered condition.
inline std::string render(const RuleSet& rs, const FeatureSchema& schema) {
    const auto& classes = schema.columns[schema.label_column()].categories;
    char buf[64];
    std::string out;
    out += "rules: " + std::to_string(rs.rules.size()) +
           ", edges: " + std::to_string(rs.edge_count) + "\n";
    out += "bias:";
    for (std::size_t k = 0; k < rs.n_classes; ++k) {
        std::snprintf(buf, sizeof buf, " %s=%.4f", classes[k].c_str(), rs.biases[k]);
        out += buf;
    }
    out += "\n";
    if (rs.rules.empty()) {
        out += "(no rules survived pruning; the model is bias-only)\n";
        return out;
    }
    for (const Rule& rule : rs.rules) {
        out += rule.kind == NodeKind::conj ? "AND[" : "OR[";
        for (std::size_t k = 0; k < rs.n_classes; ++k) {
            std::snprintf(buf, sizeof buf, "%s%s=%.4f", k ? " " : "", classes[k].c_str(),
                          rule.per_class_weight[k]);
            out += buf;
        }
        out += "]  ";
        out += rule.rendered;
        out += "\n";
    }
    return out;
}

}  // namespace rrl
