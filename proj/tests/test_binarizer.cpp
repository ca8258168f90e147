#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "rrl/binarizer.hpp"

using namespace rrl;

namespace {

Dataset toy_dataset() {
    std::filesystem::create_directories("unit_tmp");
    {
        std::ofstream s("unit_tmp/bin.schema", std::ios::binary);
        s << "a,continuous\nb,continuous\ncolor,discrete,red,blue\nclass,label,n,y\n";
        std::ofstream d("unit_tmp/bin.csv", std::ios::binary);
        d << "a,b,color,class\n"
             "0.0,5.0,red,n\n"
             "1.0,5.0,blue,y\n"
             "4.0,5.0,red,y\n"
             "2.0,5.0,blue,n\n";
    }
    return load_dataset("unit_tmp/bin.csv", "unit_tmp/bin.schema");
}

}  // namespace

TEST_CASE("sample_bounds stays inside the observed range; constants collapse") {
    Dataset ds = toy_dataset();
    Rng rng(3);
    BinarizationBounds b = sample_bounds(ds, 4, rng);
    REQUIRE(b.m() == 2);
    REQUIRE(b.n_atoms() == 16);
    CHECK(b.feat_min[0] == 0.0);
    CHECK(b.feat_max[0] == 4.0);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(b.lower(0, i) >= 0.0);
        CHECK(b.lower(0, i) < 4.0);
        CHECK(b.upper(0, i) >= 0.0);
        CHECK(b.upper(0, i) < 4.0);
        // feature b is constant: every bound equals the single observed value
        CHECK(b.lower(1, i) == 5.0);
        CHECK(b.upper(1, i) == 5.0);
    }
    CHECK_THROWS_AS(sample_bounds(ds, 0, rng), std::invalid_argument);
}

TEST_CASE("binarize uses strict comparisons and the lower-then-upper layout") {
    BinarizationBounds b;
    b.k = 2;
    b.lower = DenseMatrix{{1.0, 3.0}};
    b.upper = DenseMatrix{{2.0, 4.0}};
    b.feat_min = {0.0};
    b.feat_max = {5.0};

    // c = 2.5: > 1 yes, > 3 no, < 2 no, < 4 yes
    CHECK(binarize(b, {2.5}) == std::vector<double>{1, 0, 0, 1});
    // equality at a bound is 0 on both sides
    CHECK(binarize(b, {1.0}) == std::vector<double>{0, 0, 1, 1});
    CHECK(binarize(b, {4.0}) == std::vector<double>{1, 1, 0, 0});
    CHECK_THROWS_AS(binarize(b, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("binarized atoms are monotone in the feature value") {
    Dataset ds = toy_dataset();
    Rng rng(8);
    BinarizationBounds b = sample_bounds(ds, 3, rng);
    std::vector<double> prev_lower_block;
    for (double c = -1.0; c <= 5.0; c += 0.25) {
        std::vector<double> atoms = binarize(b, {c, 5.0});
        for (double v : atoms) CHECK((v == 0.0 || v == 1.0));
        // lower-bound atoms (c > T) can only switch 0 -> 1 as c grows
        std::vector<double> lower_block(atoms.begin(), atoms.begin() + 3);
        if (!prev_lower_block.empty())
            for (std::size_t i = 0; i < 3; ++i) CHECK(lower_block[i] >= prev_lower_block[i]);
        prev_lower_block = lower_block;
    }
}

TEST_CASE("assemble_u0 appends the one-hot block after the atoms") {
    Dataset ds = toy_dataset();
    Rng rng(5);
    BinarizationBounds b = sample_bounds(ds, 2, rng);
    std::vector<double> u0 = assemble_u0(b, ds, 1);  // row 1: a=1.0, color=blue
    REQUIRE(u0.size() == b.n_atoms() + 2);
    CHECK(u0[b.n_atoms()] == 0.0);      // red
    CHECK(u0[b.n_atoms() + 1] == 1.0);  // blue

    DenseMatrix all = assemble_u0_matrix(b, ds);
    REQUIRE(all.rows() == ds.n());
    REQUIRE(all.cols() == u0.size());
    for (std::size_t j = 0; j < u0.size(); ++j) CHECK(all(1, j) == u0[j]);
}

TEST_CASE("bound_feature_names mirrors the u0 layout") {
    Dataset ds = toy_dataset();
    Rng rng(5);
    BinarizationBounds b = sample_bounds(ds, 2, rng);
    std::vector<std::string> names = bound_feature_names(b, ds.schema);
    REQUIRE(names.size() == b.n_atoms() + 2);
    CHECK(names[0].rfind("a > ", 0) == 0);
    CHECK(names[2].rfind("a < ", 0) == 0);
    CHECK(names[4].rfind("b > ", 0) == 0);
    CHECK(names[8] == "color == red");
    CHECK(names[9] == "color == blue");
}
