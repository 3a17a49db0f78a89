#include "doctest.h"
#include "common/helpers.hpp"

#include "pclab/errors.hpp"
#include "pclab/linalg.hpp"

#include <algorithm>
#include <cmath>

using namespace pclab;
using testing::max_abs_diff;
using testing::naive_matmul;
using testing::random_matrix;

TEST_CASE("matmul: identity and scalar") {
    const Matrix m = random_matrix(3, 7, 1);
    CHECK(matmul(Matrix::identity(3), m) == m);
    CHECK(matmul(Matrix::from_rows({{2}}), Matrix::from_rows({{3}}))(0, 0) == 6.0);
}

TEST_CASE("matmul: matches the triple loop") {
    const Matrix a = random_matrix(4, 3, 2), b = random_matrix(3, 5, 3);
    CHECK(max_abs_diff(matmul(a, b), naive_matmul(a, b)) <= 1e-12);
    const Matrix c = random_matrix(6, 4, 4);
    const Matrix e = random_matrix(6, 3, 5);
    CHECK(max_abs_diff(matmul_tn(c, e), naive_matmul(c.transpose(), e)) <= 1e-12);
    CHECK(max_abs_diff(matmul_nt(a, c.slice_cols(0, 3)), naive_matmul(a, c.slice_cols(0, 3).transpose())) <= 1e-12);
}

TEST_CASE("matmul: shape mismatch and non-finite input") {
    CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
    Matrix bad(2, 2);
    bad(0, 1) = std::nan("");
    CHECK_THROWS_AS(matmul(bad, Matrix::identity(2)), NonFiniteError);
}

TEST_CASE("svd: closed-form cases") {
    const std::vector<double> d = {3, 1};
    SvdResult r = svd(Matrix::diagonal(d));
    CHECK(r.singular_values[0] == doctest::Approx(3.0));
    CHECK(r.singular_values[1] == doctest::Approx(1.0));

    r = svd(Matrix::identity(5));
    for (double s : r.singular_values) CHECK(s == doctest::Approx(1.0));

    std::vector<double> u = {0.6, 0.8, 0.0}, v = {0.0, 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)};
    Matrix outer(3, 3);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < 3; ++k) outer(i, k) = u[i] * v[k];
    r = svd(outer);
    CHECK(r.singular_values[0] == doctest::Approx(1.0));
    CHECK(r.singular_values[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.singular_values[2] == doctest::Approx(0.0).epsilon(1e-12));
}

namespace {

Matrix reconstruct(const SvdResult& r) {
    Matrix us = r.u;
    for (std::size_t i = 0; i < us.rows(); ++i)
        for (std::size_t k = 0; k < us.cols(); ++k) us(i, k) *= r.singular_values[k];
    return matmul(us, r.vt);
}

double orthonormality_error(const Matrix& q_cols) {
    const Matrix g = matmul_tn(q_cols, q_cols);
    return max_abs_diff(g, Matrix::identity(g.rows()));
}

}  // namespace

TEST_CASE("svd: invariants on random shapes") {
    const std::vector<std::pair<std::size_t, std::size_t>> shapes = {{7, 4}, {4, 7}, {10, 10}, {1, 5}, {6, 1}};
    std::uint64_t seed = 10;
    for (auto [m, n] : shapes) {
        CAPTURE(m);
        CAPTURE(n);
        const Matrix a = random_matrix(m, n, seed++);
        const SvdResult r = svd(a);
        CHECK(r.singular_values.size() == std::min(m, n));
        CHECK(std::is_sorted(r.singular_values.rbegin(), r.singular_values.rend()));
        for (double s : r.singular_values) CHECK(s >= 0.0);
        CHECK(max_abs_diff(reconstruct(r), a) <= 1e-10);
        CHECK(orthonormality_error(r.u) <= 1e-10);
        CHECK(orthonormality_error(r.vt.transpose()) <= 1e-10);
        // sign convention: largest-magnitude entry of each left vector is nonnegative
        for (std::size_t k = 0; k < r.u.cols(); ++k) {
            std::size_t best = 0;
            for (std::size_t i = 1; i < r.u.rows(); ++i)
                if (std::abs(r.u(i, k)) > std::abs(r.u(best, k))) best = i;
            CHECK(r.u(best, k) >= 0.0);
        }
    }
}

TEST_CASE("svd: rank-deficient input keeps orthonormal factors") {
    const Matrix b = random_matrix(30, 3, 40), c = random_matrix(3, 12, 41);
    const Matrix a = matmul(b, c);
    const SvdResult r = svd(a);
    CHECK(max_abs_diff(reconstruct(r), a) <= 1e-9);
    CHECK(orthonormality_error(r.u) <= 1e-9);
    for (std::size_t k = 3; k < r.singular_values.size(); ++k)
        CHECK(r.singular_values[k] <= 1e-10 * r.singular_values[0]);
}

TEST_CASE("svd: zero matrix and iteration cap") {
    const SvdResult r = svd(Matrix(4, 3));
    for (double s : r.singular_values) CHECK(s == 0.0);
    SvdOptions opts;
    opts.max_sweeps = 1;
    CHECK_THROWS_AS(svd(random_matrix(12, 8, 5), opts), ConvergenceError);
}

TEST_CASE("pinv_lstsq: identity, copy and planted coefficients") {
    const Matrix y = random_matrix(4, 3, 6);
    CHECK(max_abs_diff(pinv_lstsq(Matrix::identity(4), Matrix::identity(4)), Matrix::identity(4)) <= 1e-12);
    CHECK(max_abs_diff(pinv_lstsq(Matrix::identity(4), y), y) <= 1e-12);

    const Matrix x = random_matrix(20, 5, 7), b = random_matrix(5, 3, 8);
    CHECK(max_abs_diff(pinv_lstsq(x, matmul(x, b)), b) <= 1e-8);
}

TEST_CASE("pinv_lstsq: minimum-norm solution on a rank-deficient design") {
    // Two identical columns: the minimum-norm solution splits the weight evenly.
    Matrix x(4, 2);
    for (std::size_t i = 0; i < 4; ++i) x(i, 0) = x(i, 1) = static_cast<double>(i + 1);
    Matrix y(4, 1);
    for (std::size_t i = 0; i < 4; ++i) y(i, 0) = 2.0 * static_cast<double>(i + 1);
    const Matrix s = pinv_lstsq(x, y);
    CHECK(s(0, 0) == doctest::Approx(1.0));
    CHECK(s(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("pca: degenerate and line cases") {
    Matrix line(6, 2);
    for (std::size_t i = 0; i < 6; ++i) {
        line(i, 0) = static_cast<double>(i);
        line(i, 1) = 2.0 * static_cast<double>(i) + 1.0;
    }
    PcaResult p = pca(line, 2);
    CHECK(p.explained_variance[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(p.explained_variance[0] > 0.0);

    const Matrix same(5, 3, 1.5);
    p = pca(same, 3);
    for (double v : p.explained_variance) CHECK(v == 0.0);
}

TEST_CASE("pca: isotropic cloud has roughly equal variances") {
    const Matrix cloud = random_matrix(4000, 3, 9);
    const PcaResult p = pca(cloud, 3);
    for (double v : p.explained_variance) CHECK(v == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("pca: projections equal centered data times components") {
    const Matrix h = random_matrix(25, 6, 11);
    const PcaResult p = pca(h, 3);
    CHECK(max_abs_diff(p.projections, matmul_nt(center_columns(h), p.components)) <= 1e-12);
    CHECK(orthonormality_error(p.components.transpose()) <= 1e-10);
    double total = 0.0;
    for (double v : p.all_variances) total += v;
    double trace = 0.0;
    const Matrix c = center_columns(h);
    for (double v : c.data()) trace += v * v;
    CHECK(total == doctest::Approx(trace / 25.0));
}
