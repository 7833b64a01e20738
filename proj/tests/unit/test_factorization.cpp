#include <doctest.h>

#include "facret/descriptor_store.hpp"
#include "facret/errors.hpp"
#include "facret/factorization.hpp"
#include "unit/oracles.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

using namespace facret;

TEST_CASE("rank-one PCA with sign canonicalization") {
    Eigen::MatrixXf m(2, 2);
    m << 1, 1, 0, 0;
    const auto pca = pca_loadings(DescriptorMatrix(m), 1);
    CHECK(pca.loadings.kind == LoadingKind::pca);
    REQUIRE(pca.loadings.order() == 1);
    CHECK(pca.loadings.columns(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(pca.loadings.columns(1, 0)) < 1e-12);
}

TEST_CASE("PCA loadings are orthonormal with positive dominant entries") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const int t = 2 + static_cast<int>(rng.below(30));
        const int n = 1 + static_cast<int>(rng.below(60));
        const DescriptorMatrix m(oracle::random_nonneg(t, n, rng));
        const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(t, n))));
        const auto pca = pca_loadings(m, k);
        CHECK_NOTHROW(check_loadings(pca.loadings, true, 1e-8));
        for (int c = 0; c < k; ++c) {
            Eigen::Index arg;
            pca.loadings.columns.col(c).cwiseAbs().maxCoeff(&arg);
            CHECK(pca.loadings.columns(arg, c) > 0.0);
        }
    }
}

TEST_CASE("PCA span matches the top eigenvectors of M*M^T") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const DescriptorMatrix m(oracle::random_nonneg(3, 6, rng));
        const auto pca = pca_loadings(m, 2);
        const Eigen::MatrixXd md = m.as_double();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(md * md.transpose());
        // Eigenvalues ascend: the top two are the last columns.
        const Eigen::MatrixXd top = eig.eigenvectors().rightCols(2);
        CHECK(oracle::projector_distance(pca.loadings.columns, top) < 1e-7);
    }
}

TEST_CASE("SVD reconstructs M and tail energy matches projection residual") {
    Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const int t = 4 + static_cast<int>(rng.below(20));
        const int n = 3 + static_cast<int>(rng.below(40));
        const DescriptorMatrix m(oracle::random_nonneg(t, n, rng));
        const Eigen::MatrixXd md = m.as_double();
        const auto svd = compute_svd(md);
        const auto p = svd.singular_values.size();
        CHECK(svd.u.rows() == t);
        CHECK(svd.u.cols() == t);
        const Eigen::MatrixXd rebuilt = svd.u.leftCols(p) * svd.singular_values.asDiagonal() * svd.vt;
        CHECK((rebuilt - md).norm() / md.norm() < 1e-6);
        for (Eigen::Index i = 1; i < p; ++i) CHECK(svd.singular_values(i) <= svd.singular_values(i - 1));

        double prev = md.norm() + 1.0;
        for (int k = 1; k <= std::min(t, n); ++k) {
            const auto h = pca_loadings_from_svd(svd, k).columns;
            const double err = (md - h * (h.transpose() * md)).norm();
            const double tail = std::sqrt(svd.singular_values.tail(p - k).squaredNorm());
            CHECK(err <= prev + 1e-12);
            CHECK(std::abs(err - tail) <= 1e-6 * std::max(1.0, md.norm()));
            prev = err;
        }
    }
}

TEST_CASE("PCA order out of range") {
    const DescriptorMatrix m(Eigen::MatrixXf::Ones(4, 3));
    CHECK_THROWS_AS(pca_loadings(m, 0), InvalidArgument);
    CHECK_THROWS_AS(pca_loadings(m, 4), InvalidArgument);
}

TEST_CASE("NMF recovers two exact point clusters") {
    Eigen::MatrixXf m = Eigen::MatrixXf::Zero(4, 20);
    for (int j = 0; j < 10; ++j) m(0, j) = 1.0f;
    for (int j = 10; j < 20; ++j) m(1, j) = 1.0f;
    const DescriptorMatrix dm(m);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto r = nmf_loadings(dm, 2, {100, 1e-6, seed});
        const auto& l = r.loadings.columns;
        const bool direct = l(0, 0) == 1.0 && l(1, 1) == 1.0;
        const bool swapped = l(1, 0) == 1.0 && l(0, 1) == 1.0;
        CHECK((direct || swapped));
        CHECK(l.cwiseAbs().sum() == doctest::Approx(2.0));
        CHECK(r.objective_trace.back() == 0.0);
        CHECK(nmf_objective(dm, r.loadings, r.assignment) == 0.0);
    }
}

TEST_CASE("NMF assignment is 1-sparse and loadings stay admissible") {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const int t = 3 + static_cast<int>(rng.below(12));
        const int n = 5 + static_cast<int>(rng.below(60));
        const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(n, 8))));
        const DescriptorMatrix m(oracle::random_nonneg(t, n, rng));
        const auto r = nmf_loadings(m, k, {100, 1e-6, rng.next()});
        CHECK_NOTHROW(check_loadings(r.loadings, false, 1e-9));
        CHECK(r.assignment.count() == n);
        const Eigen::MatrixXd rm = r.assignment.to_matrix();
        for (int j = 0; j < n; ++j) {
            int nonzero = 0;
            for (int c = 0; c < k; ++c) nonzero += rm(c, j) != 0.0;
            // Strictly positive data keeps every scale positive.
            CHECK(nonzero == 1);
            CHECK(r.assignment.scale_of[j] >= 0.0);
        }
    }
}

TEST_CASE("NMF objective trace is non-increasing") {
    Rng rng(11);
    const DescriptorMatrix m(oracle::random_nonneg(5, 30, rng));
    const auto r = nmf_loadings(m, 3, {100, 1e-6, 11});
    REQUIRE(!r.objective_trace.empty());
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
        CHECK(r.objective_trace[i] <= r.objective_trace[i - 1]);
    }
    CHECK(r.objective_trace.back() <= r.objective_trace.front());
    CHECK(nmf_objective(m, r.loadings, r.assignment) == doctest::Approx(r.objective_trace.back()).epsilon(1e-12));
}

TEST_CASE("NMF is deterministic for identical inputs") {
    Rng rng(2);
    const DescriptorMatrix m(oracle::random_nonneg(16, 200, rng));
    const auto a = nmf_loadings(m, 6, {100, 1e-6, 5});
    const auto b = nmf_loadings(m, 6, {100, 1e-6, 5});
    CHECK(a.loadings.columns == b.loadings.columns);
    CHECK(a.assignment.cluster_of == b.assignment.cluster_of);
    CHECK(a.assignment.scale_of == b.assignment.scale_of);
    CHECK(a.objective_trace == b.objective_trace);
}

TEST_CASE("NMF capacity: k = N fits at least as well as k = 1") {
    Rng rng(4);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const DescriptorMatrix m(oracle::random_nonneg(6, 12, rng));
        const auto one = nmf_loadings(m, 1, {100, 1e-6, seed});
        const auto all = nmf_loadings(m, 12, {100, 1e-6, seed});
        CHECK(all.objective_trace.back() <= one.objective_trace.back());
        CHECK(all.objective_trace.back() == doctest::Approx(0.0));
    }
}

TEST_CASE("NMF precondition errors") {
    const DescriptorMatrix m(Eigen::MatrixXf::Ones(4, 3));
    CHECK_THROWS_AS(nmf_loadings(m, 4), InvalidArgument);
    CHECK_THROWS_AS(nmf_loadings(m, 0), InvalidArgument);
    // Negative input never reaches NMF: the descriptor matrix rejects it.
    Eigen::MatrixXf neg = Eigen::MatrixXf::Ones(4, 3);
    neg(2, 1) = -0.5f;
    CHECK_THROWS_AS(DescriptorMatrix{neg}, InvalidArgument);
}

TEST_CASE("nmf_objective exact cases") {
    Eigen::MatrixXf d(3, 1);
    d << 3, 4, 0;
    const DescriptorMatrix single(d);
    FactorLoadings l{"", LoadingKind::nmf, d.cast<double>() / 5.0};
    FactorAssignment a{1, {0}, {5.0}};
    CHECK(nmf_objective(single, l, a) == doctest::Approx(0.0));
    a.scale_of[0] = 4.0;
    CHECK(nmf_objective(single, l, a) == doctest::Approx(0.5));
}

TEST_CASE("nmf_objective matches naive summation") {
    Rng rng(31);
    const DescriptorMatrix m(oracle::random_nonneg(4, 8, rng));
    FactorLoadings l{"", LoadingKind::nmf, oracle::random_unit_columns(4, 3, rng, true)};
    FactorAssignment a{3, {}, {}};
    for (int j = 0; j < 8; ++j) {
        a.cluster_of.push_back(static_cast<int>(rng.below(3)));
        a.scale_of.push_back(rng.uniform());
    }
    double naive = 0.0;
    for (int j = 0; j < 8; ++j) {
        for (int t = 0; t < 4; ++t) {
            const double diff = static_cast<double>(m.values()(t, j)) - a.scale_of[j] * l.columns(t, a.cluster_of[j]);
            naive += diff * diff;
        }
    }
    CHECK(std::abs(nmf_objective(m, l, a) - 0.5 * naive) < 1e-10);

    FactorAssignment wrong = a;
    wrong.cluster_of.pop_back();
    CHECK_THROWS_AS(nmf_objective(m, l, wrong), InvalidArgument);
}
