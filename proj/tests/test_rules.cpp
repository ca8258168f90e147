#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "rrl/rules.hpp"

using namespace rrl;

namespace {

std::string write_tmp(const std::string& name, const std::string& text) {
    std::filesystem::create_directories("unit_tmp");
    const std::string path = "unit_tmp/" + name;
    std::ofstream out(path, std::ios::binary);
    out << text;
    return path;
}

// One continuous feature (k = 2, atoms v>1, v>3, v<2, v<4), one discrete
// feature with three categories, two classes.  The five stats rows keep every
// atom non-constant.
Dataset fixture_dataset() {
    write_tmp("rules.schema",
              "v,continuous\n"
              "color,discrete,r,g,b\n"
              "class,label,neg,pos\n");
    write_tmp("rules.csv",
              "v,color,class\n"
              "0.5,r,neg\n"
              "1.5,g,pos\n"
              "2.5,b,neg\n"
              "3.5,r,pos\n"
              "4.5,g,neg\n");
    return load_dataset("unit_tmp/rules.csv", "unit_tmp/rules.schema");
}

BinarizationBounds fixture_bounds() {
    BinarizationBounds b;
    b.k = 2;
    b.lower = DenseMatrix{{1.0, 3.0}};
    b.upper = DenseMatrix{{2.0, 4.0}};
    b.feat_min = {0.0};
    b.feat_max = {5.0};
    return b;
}

// Atom columns: 0 v>1, 1 v>3, 2 v<2, 3 v<4, 4 ==r, 5 ==g, 6 ==b.
// Conjunction nodes: c0 contradiction (v>3, v<2), c1 one-hot exclusivity
// (==r, ==g), c2 alive (v>1, ==r), c3 duplicate of c2, c4 vacuous.
// Disjunction nodes: d0 tautology (v>1, v<4), d1 one-hot completeness,
// d2 alive single literal (v>3), d3 alive (v>3, v<2), dust head weights.
RrlModel fixture_model(const Dataset& ds) {
    RrlModel m;
    m.schema = ds.schema;
    m.bounds = fixture_bounds();
    LogicalLayerParams l1;
    l1.w_conj = DenseMatrix{{0, 1, 1, 0, 0, 0, 0},
                            {0, 0, 0, 0, 1, 1, 0},
                            {1, 0, 0, 0, 1, 0, 0},
                            {1, 0, 0, 0, 1, 0, 0},
                            {0, 0, 0, 0, 0, 0, 0}};
    l1.w_disj = DenseMatrix{{1, 0, 0, 1, 0, 0, 0},
                            {0, 0, 0, 0, 1, 1, 1},
                            {0, 1, 0, 0, 0, 0, 0},
                            {0, 1, 1, 0, 0, 0, 0}};
    m.layers = {l1};
    m.skip_plan = {{0}};
    m.head.weights = DenseMatrix{{0.7, 0.3, 0.8, 0.2, 0.5, 0.25, 0.0, 0.0, 1e-9},
                                 {0.7, 0.0, 0.0, -0.1, -0.5, 0.0, 0.75, 0.6, -1e-9}};
    m.head.biases = {0.1, 0.2};
    m.validate();
    return m;
}

void check_exact_logits(const RrlModel& m, const RuleSet& rs, const Dataset& ds) {
    const DenseMatrix u0 = assemble_u0_matrix(m.bounds, ds);
    const ForwardResult fwd = forward_discrete(m, u0);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const std::vector<double> logits = rs.evaluate_logits(assemble_u0(m.bounds, ds, i));
        REQUIRE(logits.size() == m.schema.n_classes());
        for (std::size_t k = 0; k < logits.size(); ++k) {
            // Bit-exact: the rule set must reproduce the network's floats.
            REQUIRE(logits[k] == fwd.logits(i, k));
        }
    }
}

std::string random_dataset_csv(Rng& rng, std::size_t rows, std::size_t n_classes) {
    const char* cats[] = {"r", "g", "b"};
    const char* labels[] = {"neg", "pos", "mid"};
    std::ostringstream out;
    out << "x,y,color,class\n";
    for (std::size_t i = 0; i < rows; ++i) {
        const std::size_t cat = i < 3 ? i : rng.below(3);
        const std::size_t cls = i < n_classes ? i : rng.below(n_classes);
        out << rng.uniform(0.0, 10.0) << ',' << rng.uniform(-5.0, 5.0) << ',' << cats[cat]
            << ',' << labels[cls] << '\n';
    }
    return out.str();
}

Dataset random_dataset(Rng& rng, std::size_t rows, std::size_t n_classes) {
    std::string schema = "x,continuous\ny,continuous\ncolor,discrete,r,g,b\nclass,label,neg,pos";
    if (n_classes == 3) schema += ",mid";
    schema += "\n";
    write_tmp("rules_rand.schema", schema);
    write_tmp("rules_rand.csv", random_dataset_csv(rng, rows, n_classes));
    return load_dataset("unit_tmp/rules_rand.csv", "unit_tmp/rules_rand.schema");
}

// Dense random filling so the extraction sees a rich mix of node states.
void randomize_model(RrlModel& m, Rng& rng) {
    for (LogicalLayerParams& layer : m.layers) {
        layer.w_conj = uniform_matrix(rng, layer.w_conj.rows(), layer.w_conj.cols(), 0.0, 1.0);
        layer.w_disj = uniform_matrix(rng, layer.w_disj.rows(), layer.w_disj.cols(), 0.0, 1.0);
    }
    m.head.weights = uniform_matrix(rng, m.head.weights.rows(), m.head.weights.cols(), -1.0, 1.0);
    for (double& b : m.head.biases) b = rng.uniform(-0.5, 0.5);
}

}  // namespace

TEST_CASE("symbolic prunes, merges, and constant folding on a hand-built layer") {
    Dataset ds = fixture_dataset();
    RrlModel m = fixture_model(ds);
    RuleSet rs = extract(m, ds);

    // c0, c1, c4, d0, d1 turn constant; c3 merges into c2; d3 is dust.
    CHECK(rs.dead_nodes_removed == 5);
    CHECK(rs.merged_duplicates == 1);
    using ruledetail::NodeState;
    REQUIRE(rs.graph.size() == 1);
    REQUIRE(rs.graph[0].size() == 9);
    CHECK(rs.graph[0][0].state == NodeState::const0);  // v>3 and v<2: T >= H
    CHECK(rs.graph[0][1].state == NodeState::const0);  // ==r and ==g
    CHECK(rs.graph[0][2].state == NodeState::alive);
    CHECK(rs.graph[0][3].state == NodeState::merged);
    CHECK(rs.graph[0][3].merged_into == 2);
    CHECK(rs.graph[0][4].state == NodeState::const1);  // vacuous conjunction
    CHECK(rs.graph[0][5].state == NodeState::const1);  // v>1 or v<4: T < H
    CHECK(rs.graph[0][6].state == NodeState::const1);  // r or g or b
    CHECK(rs.graph[0][7].state == NodeState::alive);
    CHECK(rs.graph[0][8].state == NodeState::alive);   // kept, but dust weights
    CHECK_FALSE(rs.graph[0][8].reachable);

    // Constant columns fold into the biases in column order.
    CHECK(rs.biases[0] == doctest::Approx(0.85).epsilon(1e-12));
    CHECK(rs.biases[1] == doctest::Approx(0.45).epsilon(1e-12));

    // Two rules survive, strongest first; duplicate head weights are summed.
    REQUIRE(rs.rules.size() == 2);
    CHECK(rs.rules[0].kind == NodeKind::conj);
    CHECK(rs.rules[0].ref == Lit{1, 2});
    CHECK(rs.rules[0].literals == std::vector<Lit>{{0, 0}, {0, 4}});
    CHECK(rs.rules[0].per_class_weight[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rs.rules[0].per_class_weight[1] == doctest::Approx(-0.1).epsilon(1e-12));
    CHECK(rs.rules[0].rendered == "v > 1 ∧ color == r");
    CHECK(rs.rules[1].kind == NodeKind::disj);
    CHECK(rs.rules[1].ref == Lit{1, 7});
    CHECK(rs.rules[1].per_class_weight[1] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(rs.rules[1].rendered == "v > 3");  // single literal, no parentheses

    // Edges: c2 has 2 literals, d2 has 1; class links 2 + 1 (one weight is 0).
    CHECK(rs.edge_count == 6);
    CHECK(count_edges(rs) == rs.edge_count);

    check_exact_logits(m, rs, ds);
}

TEST_CASE("analytic prunes hold on a grid, not just the stats rows") {
    Dataset ds = fixture_dataset();
    RrlModel m = fixture_model(ds);
    RuleSet rs = extract(m, ds);

    // Every pruning decision in the fixture is analytic (or the vacuous
    // fold), so the rule set must match the network everywhere.
    const char* cats[] = {"r", "g", "b"};
    std::ostringstream csv;
    csv << "v,color,class\n";
    for (double v = -1.0; v <= 6.0; v += 0.25)
        for (int c = 0; c < 3; ++c) csv << v << ',' << cats[c] << ",neg\n";
    write_tmp("rules_grid.csv", csv.str());
    Dataset grid = load_dataset("unit_tmp/rules_grid.csv", "unit_tmp/rules.schema");
    check_exact_logits(m, rs, grid);
}

TEST_CASE("render produces the weighted rule document") {
    Dataset ds = fixture_dataset();
    RrlModel m = fixture_model(ds);
    RuleSet rs = extract(m, ds);
    const std::string doc = render(rs, ds.schema);
    CHECK(doc ==
          "rules: 2, edges: 6\n"
          "bias: neg=0.8500 pos=0.4500\n"
          "AND[neg=1.0000 pos=-0.1000]  v > 1 ∧ color == r\n"
          "OR[neg=0.0000 pos=0.6000]  v > 3\n");
}

TEST_CASE("empirical constants: exact on the stats data, detectable elsewhere") {
    write_tmp("rules_emp.schema", "v,continuous\nclass,label,neg,pos\n");
    write_tmp("rules_emp.csv", "v,class\n0.5,neg\n1.5,pos\n");
    Dataset ds = load_dataset("unit_tmp/rules_emp.csv", "unit_tmp/rules_emp.schema");

    RrlModel m;
    m.schema = ds.schema;
    m.bounds = fixture_bounds();  // atoms v>1, v>3, v<2, v<4
    LogicalLayerParams l1;
    l1.w_conj = DenseMatrix{{1, 0, 0, 1}};  // v>1 and v<4; v<4 is constant 1 here
    l1.w_disj = DenseMatrix{{0, 1, 0, 0}};  // v>3; constant 0 on the stats rows
    m.layers = {l1};
    m.skip_plan = {{0}};
    m.head.weights = DenseMatrix{{0.9, 1.0}, {0.0, 0.0}};
    m.head.biases = {0.0, 0.0};
    m.validate();

    RuleSet rs = extract(m, ds);
    // The constant-1 atom is folded out of the conjunction; the disjunction
    // collapses to constant 0 and its head weight disappears entirely.
    REQUIRE(rs.rules.size() == 1);
    CHECK(rs.rules[0].rendered == "v > 1");
    CHECK(rs.biases[0] == 0.0);
    using ruledetail::NodeState;
    CHECK(rs.graph[0][1].state == NodeState::const0);

    check_exact_logits(m, rs, ds);

    // Off the stats distribution the fold is wrong, and the comparison sees
    // it: v = 5 sets v>3, which the pruned graph no longer tracks.
    const std::vector<double> far = assemble_u0(m.bounds, {5.0}, {});
    const std::vector<double> rule_logits = rs.evaluate_logits(far);
    DenseMatrix one_row(1, far.size());
    for (std::size_t j = 0; j < far.size(); ++j) one_row(0, j) = far[j];
    const ForwardResult fwd = forward_discrete(m, one_row);
    CHECK(rule_logits[0] != fwd.logits(0, 0));
}

TEST_CASE("nested composites render with parentheses") {
    write_tmp("rules_nest.schema", "v,continuous\nclass,label,neg,pos\n");
    write_tmp("rules_nest.csv", "v,class\n0.0,neg\n1.5,pos\n2.5,neg\n3.5,pos\n");
    Dataset ds = load_dataset("unit_tmp/rules_nest.csv", "unit_tmp/rules_nest.schema");

    RrlModel m;
    m.schema = ds.schema;
    m.bounds.k = 1;
    m.bounds.lower = DenseMatrix{{3.0}};
    m.bounds.upper = DenseMatrix{{2.0}};
    m.bounds.feat_min = {0.0};
    m.bounds.feat_max = {4.0};

    LogicalLayerParams l1;  // d0 = v>3 or v<2
    l1.w_conj = DenseMatrix(0, 2);
    l1.w_disj = DenseMatrix{{1, 1}};
    LogicalLayerParams l2;  // c = v>3 and d0, reading u0 ++ u1
    l2.w_conj = DenseMatrix{{1, 0, 1}};
    l2.w_disj = DenseMatrix(0, 3);
    m.layers = {l1, l2};
    m.skip_plan = {{0}, {0, 1}};
    m.head.weights = DenseMatrix{{1.0}, {-0.5}};
    m.head.biases = {0.0, 0.0};
    m.validate();

    RuleSet rs = extract(m, ds);
    REQUIRE(rs.rules.size() == 1);
    CHECK(rs.rules[0].rendered == "v > 3 ∧ (v > 3 ∨ v < 2)");
    CHECK(rs.edge_count == 6);  // 2 + 2 literals, 2 class links
    check_exact_logits(m, rs, ds);
}

TEST_CASE("all-dust heads degrade to a bias-only document") {
    Dataset ds = fixture_dataset();
    RrlModel m = fixture_model(ds);
    for (std::size_t k = 0; k < m.head.weights.rows(); ++k)
        for (std::size_t j = 0; j < m.head.weights.cols(); ++j)
            m.head.weights(k, j) = (k ? -1.0 : 1.0) * 1e-9;
    RuleSet rs = extract(m, ds);
    CHECK(rs.rules.empty());
    CHECK(rs.edge_count == 0);
    const std::string doc = render(rs, ds.schema);
    CHECK(doc.find("(no rules survived pruning; the model is bias-only)") != std::string::npos);
    // The raw head still carries the dust, so evaluation stays bit-exact.
    check_exact_logits(m, rs, ds);
}

TEST_CASE("extraction is bit-exact for random models, layouts, and data") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        Rng rng(seed * 101);
        const std::size_t n_classes = seed % 2 ? 2 : 3;
        Dataset ds = random_dataset(rng, 40, n_classes);
        BinarizationBounds b = sample_bounds(ds, 2, rng);

        struct Layout {
            std::vector<std::size_t> widths;
            bool head_skip;
        };
        const Layout layouts[] = {{{5}, false}, {{4, 3}, false}, {{3, 3, 3}, false},
                                  {{4, 3}, true}};
        for (const Layout& lay : layouts) {
            RrlModel m = build_model(ds.schema, b, lay.widths, LafKind{}, 1.0, rng,
                                     lay.head_skip);
            randomize_model(m, rng);
            RuleSet rs = extract(m, ds);
            check_exact_logits(m, rs, ds);

            // Structural audit of whatever survived.
            std::set<std::pair<int, std::vector<Lit>>> seen;
            for (const Rule& rule : rs.rules) {
                CHECK(std::is_sorted(rule.literals.begin(), rule.literals.end()));
                CHECK(std::adjacent_find(rule.literals.begin(), rule.literals.end()) ==
                      rule.literals.end());
                CHECK_FALSE(rule.literals.empty());
                REQUIRE(rule.per_class_weight.size() == n_classes);
                double peak = 0.0;
                for (double w : rule.per_class_weight) peak = std::max(peak, std::abs(w));
                CHECK(peak >= 1e-6);
                const auto& node = rs.graph[rule.ref.src - 1][rule.ref.idx];
                CHECK(node.state == ruledetail::NodeState::alive);
                CHECK(node.reachable);
                CHECK(seen.insert({rule.kind == NodeKind::conj ? 0 : 1, rule.literals}).second);
            }
            for (std::size_t i = 1; i < rs.rules.size(); ++i) {
                double prev = 0.0, cur = 0.0;
                for (double w : rs.rules[i - 1].per_class_weight)
                    prev = std::max(prev, std::abs(w));
                for (double w : rs.rules[i].per_class_weight) cur = std::max(cur, std::abs(w));
                CHECK(prev >= cur);
            }
            CHECK(rs.edge_count == count_edges(rs));
        }
    }
}
