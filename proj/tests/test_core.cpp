#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "spectral_tetris/core.hpp"

using namespace spectral_tetris;

TEST_CASE("tolerances validate their ordering") {
    CHECK_NOTHROW(Tolerances{});
    CHECK_NOTHROW(Tolerances(1e-12, 1e-9));
    CHECK_NOTHROW(Tolerances(1e-9, 1e-9));
    CHECK_THROWS_AS(Tolerances(0.0, 1e-9), std::invalid_argument);
    CHECK_THROWS_AS(Tolerances(-1e-12, 1e-9), std::invalid_argument);
    CHECK_THROWS_AS(Tolerances(1e-6, 1e-9), std::invalid_argument);
    const Tolerances t;
    CHECK(t.branch_eps == 1e-12);
    CHECK(t.verify_eps == 1e-9);
}

TEST_CASE("norm sequences reject bad values") {
    CHECK_THROWS_AS(NormSequence(std::vector<double>{}), std::invalid_argument);
    CHECK_THROWS_AS(NormSequence({1.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(NormSequence({-1.0}), std::invalid_argument);
    CHECK_THROWS_AS(NormSequence({1.0, std::numeric_limits<double>::infinity()}), std::invalid_argument);
    CHECK_THROWS_AS(NormSequence({std::numeric_limits<double>::quiet_NaN()}), std::invalid_argument);

    const NormSequence n({1.0, 3.0, 2.0});
    CHECK(n.size() == 3);
    CHECK(n[1] == 3.0);
    CHECK(n.total() == 6.0);
}

TEST_CASE("spectra reject bad values") {
    CHECK_THROWS_AS(Spectrum(std::vector<double>{}), std::invalid_argument);
    CHECK_THROWS_AS(Spectrum({2.0, -1.0}), std::invalid_argument);
    const Spectrum s({2.0, 6.0});
    CHECK(s.total() == 8.0);
    CHECK(s[0] == 2.0);
}

TEST_CASE("trace gap is permutation invariant") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> dist(0.01, 7.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> a(1 + static_cast<std::size_t>(rng() % 12));
        std::vector<double> l(1 + static_cast<std::size_t>(rng() % 5));
        for (double& x : a) x = dist(rng);
        for (double& x : l) x = dist(rng);
        const double gap = trace_gap(NormSequence(a), Spectrum(l));
        std::shuffle(a.begin(), a.end(), rng);
        std::shuffle(l.begin(), l.end(), rng);
        const double gap_shuffled = trace_gap(NormSequence(a), Spectrum(l));
        CHECK(std::abs(gap - gap_shuffled) < 1e-13);
    }
}

TEST_CASE("compensated sums beat naive accumulation") {
    // 1 followed by many values that individually vanish against it.
    std::vector<double> xs{1e16};
    for (int i = 0; i < 1000; ++i) xs.push_back(1.0);
    xs.push_back(-1e16);
    CHECK(detail::neumaier_sum(xs) == 1000.0);
}

TEST_CASE("matrix helpers") {
    Matrix m = Matrix::identity(3);
    CHECK(m(0, 0) == 1.0);
    CHECK(m(0, 1) == 0.0);
    Matrix n(3, 3);
    n(0, 0) = 1.0;
    n(1, 1) = 1.0;
    n(2, 2) = 0.5;
    CHECK(max_abs_diff(m, n) == 0.5);
    CHECK_THROWS_AS(max_abs_diff(Matrix(2, 2), Matrix(2, 3)), std::invalid_argument);
}

TEST_CASE("sparse frames accept the tetris sparsity pattern") {
    // Singleton, block pair over rows (0,1), singleton.
    const SparseFrame f = SparseFrame::from_entries(
        2, 4, {{0, 0, 1.0}, {0, 1, 0.5}, {1, 1, 2.0}, {0, 2, 0.5}, {1, 2, -2.0}, {1, 3, 1.0}});
    CHECK(f.rows() == 2);
    CHECK(f.cols() == 4);
    CHECK(f.entries().size() == 6);
    CHECK(f.column_norm_sq(1) == 0.5 * 0.5 + 4.0);
    CHECK(f.column_dot(1, 2) == 0.25 - 4.0);
    CHECK(f.column_dot(0, 3) == 0.0);

    auto [first, last] = f.column(2);
    REQUIRE(last - first == 2);
    CHECK(first->row == 0);
    CHECK(first->value == 0.5);

    const Matrix d = f.dense();
    CHECK(d(0, 0) == 1.0);
    CHECK(d(1, 2) == -2.0);
    CHECK(d(1, 0) == 0.0);
}

TEST_CASE("sparse frames reject structural violations") {
    using E = std::vector<SparseEntry>;
    CHECK_THROWS_AS(SparseFrame::from_entries(0, 1, E{}), std::invalid_argument);
    // Missing column.
    CHECK_THROWS_AS(SparseFrame::from_entries(2, 2, E{{0, 0, 1.0}}), std::invalid_argument);
    // Three nonzeros in one column.
    CHECK_THROWS_AS(SparseFrame::from_entries(3, 1, E{{0, 0, 1.0}, {1, 0, 1.0}, {2, 0, 1.0}}),
                    std::invalid_argument);
    // Two nonzeros in non-adjacent rows.
    CHECK_THROWS_AS(SparseFrame::from_entries(3, 1, E{{0, 0, 1.0}, {2, 0, 1.0}}), std::invalid_argument);
    // Duplicate position.
    CHECK_THROWS_AS(SparseFrame::from_entries(2, 1, E{{0, 0, 1.0}, {0, 0, 2.0}}), std::invalid_argument);
    // Explicit zero.
    CHECK_THROWS_AS(SparseFrame::from_entries(1, 1, E{{0, 0, 0.0}}), std::invalid_argument);
    // Out of range.
    CHECK_THROWS_AS(SparseFrame::from_entries(1, 1, E{{1, 0, 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(SparseFrame::from_entries(1, 1, E{{0, 1, 1.0}}), std::invalid_argument);
    // Non-finite value.
    CHECK_THROWS_AS(SparseFrame::from_entries(1, 1, E{{0, 0, std::numeric_limits<double>::infinity()}}),
                    std::invalid_argument);
}

TEST_CASE("ready partitions validate monotonicity and the final index") {
    ReadyPartition p{{1, 4}};
    CHECK_NOTHROW(p.validate(4));
    CHECK_THROWS_AS(p.validate(5), std::invalid_argument);
    CHECK_NOTHROW((ReadyPartition{{2, 2, 3}}.validate(3)));  // weakly increasing is fine
    CHECK_THROWS_AS((ReadyPartition{{2, 1}}.validate(1)), std::invalid_argument);
    CHECK_THROWS_AS((ReadyPartition{{0, 2}}.validate(2)), std::invalid_argument);
    CHECK_THROWS_AS((ReadyPartition{{}}.validate(0)), std::invalid_argument);
}

TEST_CASE("fusion problems validate subspaces and orderings") {
    FusionProblem p;
    p.subspaces = {{1.0, 2}, {0.5, 1}};
    p.spectrum = {1.0, 2.0};
    CHECK_NOTHROW(p.validate());
    CHECK(p.total_slots() == 3);

    p.ordering = std::vector<int>{1, 2, 1};
    CHECK_NOTHROW(p.validate());
    p.ordering = std::vector<int>{1, 1, 1};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p.ordering = std::vector<int>{1, 2, 3};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p.ordering.reset();

    p.subspaces[0].weight = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p.subspaces[0].weight = 1.0;
    p.subspaces[0].dim = 0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p.subspaces[0].dim = 2;
    p.spectrum = {};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p.spectrum = {1.0, -1.0};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("fusion frames validate the column partition") {
    FusionFrame f;
    f.frame = SparseFrame::from_entries(2, 2, {{0, 0, 1.0}, {1, 1, 1.0}});
    f.parts = {{0}, {1}};
    f.weights = {1.0, 1.0};
    CHECK_NOTHROW(f.validate());

    f.parts = {{0}, {0}};
    CHECK_THROWS_AS(f.validate(), std::invalid_argument);  // overlap
    f.parts = {{0}};
    f.weights = {1.0};
    CHECK_THROWS_AS(f.validate(), std::invalid_argument);  // column 2 uncovered
    f.parts = {{0}, {1}};
    CHECK_THROWS_AS(f.validate(), std::invalid_argument);  // weights too short
    f.weights = {1.0, -1.0};
    CHECK_THROWS_AS(f.validate(), std::invalid_argument);  // bad weight
    f.weights = {1.0, 1.0};
    f.parts = {{0}, {2}};
    CHECK_THROWS_AS(f.validate(), std::invalid_argument);  // out of range
    f.parts = {{0}, {}};
    CHECK_THROWS_AS(f.validate(), std::invalid_argument);  // empty part
}
