#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "rrl/dataset.hpp"

using namespace rrl;

namespace {

std::string write_tmp(const std::string& name, const std::string& text) {
    std::filesystem::create_directories("unit_tmp");
    const std::string path = "unit_tmp/" + name;
    std::ofstream out(path, std::ios::binary);
    out << text;
    return path;
}

FeatureSchema schema_from(const std::string& text) {
    std::istringstream in(text);
    return FeatureSchema::parse(in);
}

}  // namespace

TEST_CASE("schema parses kinds, categories, and counts") {
    FeatureSchema s = schema_from(
        "age,continuous\n"
        "color,discrete,red,green,blue\n"
        "class,label,no,yes\n");
    REQUIRE(s.columns.size() == 3);
    CHECK(s.columns[0].kind == ColumnKind::continuous);
    CHECK(s.columns[1].categories.size() == 3);
    CHECK(s.label_column() == 2);
    CHECK(s.n_classes() == 2);
    CHECK(s.n_continuous() == 1);
    CHECK(s.n_binary() == 3);
}

TEST_CASE("schema validation rejects malformed layouts") {
    CHECK_THROWS(schema_from("age,continuous\n"));                        // no label
    CHECK_THROWS(schema_from("a,label,x,y\nb,label,x,y\n"));              // two labels
    CHECK_THROWS(schema_from("class,label,only\n"));                      // one class
    CHECK_THROWS(schema_from("c,discrete,x,x\nclass,label,a,b\n"));       // duplicate category
    CHECK_THROWS(schema_from("c,discrete\nclass,label,a,b\n"));           // no categories
    CHECK_THROWS(schema_from("c,continuous,x\nclass,label,a,b\n"));       // categories on continuous
    CHECK_THROWS(schema_from("c,mystery\nclass,label,a,b\n"));            // unknown kind
}

TEST_CASE("load_dataset one-hot encodes discrete features and labels") {
    const std::string schema = write_tmp(
        "toy.schema",
        "age,continuous\n"
        "color,discrete,red,green,blue\n"
        "class,label,no,yes\n");
    const std::string data = write_tmp(
        "toy.csv",
        "age,color,class\n"
        "1.5,red,no\n"
        "2.5,blue,yes\n"
        "-3,green,yes\n");
    Dataset ds = load_dataset(data, schema);
    REQUIRE(ds.n() == 3);
    CHECK(ds.continuous(0, 0) == 1.5);
    CHECK(ds.continuous(2, 0) == -3.0);
    // one-hot round trip: exactly one bit per discrete feature per row
    CHECK(ds.binary(0, 0) == 1.0);
    CHECK(ds.binary(1, 2) == 1.0);
    CHECK(ds.binary(2, 1) == 1.0);
    for (std::size_t i = 0; i < 3; ++i) {
        double sum = 0;
        for (std::size_t j = 0; j < 3; ++j) sum += ds.binary(i, j);
        CHECK(sum == 1.0);
    }
    CHECK(ds.label_index(0) == 0);
    CHECK(ds.label_index(1) == 1);
    CHECK(ds.label_index(2) == 1);
}

TEST_CASE("load_dataset reports parse errors with row and column") {
    const std::string schema = write_tmp("bad.schema",
                                         "x,continuous\n"
                                         "class,label,a,b\n");
    const std::string data = write_tmp("bad.csv",
                                       "x,class\n"
                                       "1.0,a\n"
                                       "oops,b\n");
    try {
        load_dataset(data, schema);
        FAIL("expected parse error");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("row 3") != std::string::npos);
        CHECK(msg.find("'x'") != std::string::npos);
        CHECK(msg.find("oops") != std::string::npos);
    }
}

TEST_CASE("load_dataset rejects header mismatch, bad category, ragged rows") {
    const std::string schema = write_tmp("hm.schema",
                                         "x,continuous\n"
                                         "class,label,a,b\n");
    CHECK_THROWS(load_dataset(write_tmp("hm1.csv", "y,class\n1,a\n"), schema));
    CHECK_THROWS(load_dataset(write_tmp("hm2.csv", "x,class\n1,zzz\n"), schema));
    CHECK_THROWS(load_dataset(write_tmp("hm3.csv", "x,class\n1,a,extra\n"), schema));
    CHECK_THROWS(load_dataset(write_tmp("hm4.csv", "x,class\n"), schema));
}

TEST_CASE("macro_f1 matches hand-worked values") {
    // class 0: tp=1 fn=1 -> 2/3; class 1: tp=2 fp=1 -> 4/5; mean = 0.733...
    CHECK(macro_f1({0, 0, 1, 1}, {0, 1, 1, 1}, 2) == doctest::Approx(0.7333333333).epsilon(1e-9));
    // degenerate: everything predicted as class 0 -> (2/3 + 0) / 2 = 1/3
    CHECK(macro_f1({0, 1}, {0, 0}, 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    // perfect prediction
    CHECK(macro_f1({0, 1, 2}, {0, 1, 2}, 3) == doctest::Approx(1.0));
    CHECK_THROWS_AS(macro_f1({0}, {0, 1}, 2), std::invalid_argument);
    CHECK_THROWS_AS(macro_f1({0, 5}, {0, 0}, 2), std::invalid_argument);
}

TEST_CASE("macro_f1 is invariant to permuting the instance order") {
    Rng rng(4);
    std::vector<int> t, p;
    for (int i = 0; i < 200; ++i) {
        t.push_back(static_cast<int>(rng.below(3)));
        p.push_back(static_cast<int>(rng.below(3)));
    }
    const double base = macro_f1(t, p, 3);
    std::vector<std::size_t> order(t.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<int> t2, p2;
    for (std::size_t i : order) {
        t2.push_back(t[i]);
        p2.push_back(p[i]);
    }
    CHECK(macro_f1(t2, p2, 3) == doctest::Approx(base).epsilon(1e-15));
}

TEST_CASE("stratified k-fold balances every class across folds") {
    Dataset ds = load_dataset(std::string(RRL_DATA_DIR) + "/tic_tac_toe.csv",
                              std::string(RRL_DATA_DIR) + "/tic_tac_toe.schema");
    Rng rng(17);
    const std::size_t k = 5;
    FoldPlan plan = stratified_kfold(ds, k, rng);
    REQUIRE(plan.assignments.size() == ds.n());

    std::map<std::pair<int, std::size_t>, std::size_t> count;  // (class, fold) -> n
    for (std::size_t i = 0; i < ds.n(); ++i) ++count[{ds.label_index(i), plan.assignments[i]}];
    for (int c = 0; c < 2; ++c) {
        std::size_t lo = ds.n(), hi = 0;
        for (std::size_t f = 0; f < k; ++f) {
            std::size_t v = count[{c, f}];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        CHECK(hi - lo <= 1);  // within each class, fold sizes differ by at most one
    }
    // test/train partition the data for every fold
    for (std::size_t f = 0; f < k; ++f) {
        auto test = plan.test_indices(f);
        auto train = plan.train_indices(f);
        CHECK(test.size() + train.size() == ds.n());
    }
    // class with fewer instances than k is rejected
    Dataset tiny = subset(ds, {0, 1, 2, 957});
    CHECK_THROWS_AS(stratified_kfold(tiny, 4, rng), std::invalid_argument);
}

TEST_CASE("split_train_validation hits the target size and stratifies") {
    Dataset ds = load_dataset(std::string(RRL_DATA_DIR) + "/tic_tac_toe.csv",
                              std::string(RRL_DATA_DIR) + "/tic_tac_toe.schema");
    Rng rng(23);
    auto [train, valid] = split_train_validation(ds, 0.95, rng);
    CHECK(train.n() + valid.n() == ds.n());
    const std::size_t target = static_cast<std::size_t>(0.95 * static_cast<double>(ds.n()) + 0.5);
    CHECK(train.n() == target);
    // both classes appear in the validation slice
    std::size_t pos = 0;
    for (std::size_t i = 0; i < valid.n(); ++i) pos += valid.label_index(i) == 1;
    CHECK(pos > 0);
    CHECK(pos < valid.n());

    // determinism: same seed, same split
    Rng rng2(23);
    auto [train2, valid2] = split_train_validation(ds, 0.95, rng2);
    CHECK(train2.labels == train.labels);
    CHECK(train2.binary == train.binary);
}

TEST_CASE("subset picks the requested rows") {
    Dataset ds = load_dataset(std::string(RRL_DATA_DIR) + "/tic_tac_toe.csv",
                              std::string(RRL_DATA_DIR) + "/tic_tac_toe.schema");
    Dataset s = subset(ds, {5, 7});
    REQUIRE(s.n() == 2);
    CHECK(s.label_index(0) == ds.label_index(5));
    CHECK(s.label_index(1) == ds.label_index(7));
    CHECK_THROWS_AS(subset(ds, {ds.n()}), std::invalid_argument);
}
