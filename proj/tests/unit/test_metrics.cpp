#include "doctest.h"
#include "common/helpers.hpp"

#include "pclab/envs.hpp"
#include "pclab/errors.hpp"
#include "pclab/linalg.hpp"
#include "pclab/metrics.hpp"

#include <cmath>
#include <numbers>

using namespace pclab;
using testing::max_abs_diff;
using testing::random_matrix;

namespace {

/// Rows +-a_i e_i, so the population covariance is diag(a_i^2 / n) with n = 2 * dims.
Matrix axis_cloud(const std::vector<double>& amplitude) {
    const std::size_t d = amplitude.size();
    Matrix h(2 * d, d);
    for (std::size_t i = 0; i < d; ++i) {
        h(2 * i, i) = amplitude[i];
        h(2 * i + 1, i) = -amplitude[i];
    }
    return h;
}

NetworkParams two_layer(const Matrix& w) {
    NetworkParams p;
    p.weights = {Matrix::identity(w.cols()), w};
    return p;
}

}  // namespace

TEST_CASE("ols_estimator: identity task with a constant action column") {
    const Dataset d = gen_onehot_1d(5, 0);
    const Matrix sigma = ols_estimator(d);
    REQUIRE(sigma.rows() == 6);
    REQUIRE(sigma.cols() == 5);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t k = 0; k < 5; ++k)
            CHECK(sigma(i, k) == doctest::Approx((i == k ? 1.0 : 0.0) - 1.0 / 6.0));
    for (std::size_t k = 0; k < 5; ++k) CHECK(sigma(5, k) == doctest::Approx(1.0 / 6.0));
    // The state block maps every input back to its own state.
    const Matrix pred = matmul(d.x, sigma);
    CHECK(max_abs_diff(pred, d.y) <= 1e-12);
}

TEST_CASE("ols_estimator: orthonormal rows give X^T Y") {
    Dataset d = gen_onehot_1d(4, 0);
    d.x = Matrix::identity(4);
    d.y = random_matrix(4, 4, 1);
    CHECK(max_abs_diff(ols_estimator(d), matmul_tn(d.x, d.y)) <= 1e-12);
}

TEST_CASE("ols spectrum compresses with the horizon") {
    const SpectrumSummary near = spectrum_summary(ols_estimator(gen_onehot_1d(20, 1)));
    const SpectrumSummary far = spectrum_summary(ols_estimator(gen_onehot_1d(20, 10)));
    CHECK(far.effective_rank < near.effective_rank);
    double top2 = 0.0, total = 0.0;
    for (std::size_t i = 0; i < far.singular_values.size(); ++i) {
        const double s2 = far.singular_values[i] * far.singular_values[i];
        total += s2;
        if (i < 2) top2 += s2;
    }
    CHECK(top2 / total >= 0.7);
}

TEST_CASE("band_report: width law") {
    BandReport b = band_report(gen_onehot_1d(10, 1));
    CHECK(b.band_width_observed == 3);
    CHECK(b.band_width_predicted == 3);
    CHECK(b.violations == 0);
    CHECK(b.diagonal_block_offdiag_nonzeros == 0);
    CHECK(b.blocks.size() == 4);

    b = band_report(gen_onehot_1d(10, 0));
    CHECK(b.band_width_observed == 1);

    b = band_report(gen_onehot_1d(20, 5));
    CHECK(b.band_width_observed == 11);
    CHECK(b.violations == 0);
    for (const auto& blk : b.blocks) CHECK(blk.observed_width == 11);

    CHECK_THROWS_AS(band_report(gen_two_envs(5, 1)), ValueError);
}

TEST_CASE("nc1: hand examples") {
    const Matrix h = Matrix::from_rows({{0}, {2}, {4}, {6}});
    const std::vector<std::size_t> labels = {0, 0, 1, 1};
    CHECK(nc1(h, labels) == doctest::Approx(0.25).epsilon(1e-12));

    const Matrix collapsed = Matrix::from_rows({{1, 2}, {1, 2}, {5, 0}, {5, 0}});
    CHECK(nc1(collapsed, labels) == 0.0);

    const Matrix singles = random_matrix(4, 3, 2);
    const std::vector<std::size_t> distinct = {0, 1, 2, 3};
    CHECK(nc1(singles, distinct) == 0.0);

    const Matrix same_means = Matrix::from_rows({{0}, {2}, {0}, {2}});
    CHECK_THROWS_AS(nc1(same_means, labels), DegenerateError);
    const std::vector<std::size_t> one_class = {0, 0, 0, 0};
    CHECK_THROWS_AS(nc1(h, one_class), ValueError);
}

TEST_CASE("nc1: invariant to scaling and translation") {
    const Matrix h = random_matrix(12, 4, 3);
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < 12; ++i) labels.push_back(i % 3);
    Matrix moved = scale(h, 3.5);
    for (std::size_t i = 0; i < moved.rows(); ++i) moved(i, 1) += 10.0;
    CHECK(nc1(moved, labels) == doctest::Approx(nc1(h, labels)).epsilon(1e-10));
}

TEST_CASE("multiclass_margin") {
    const std::vector<std::size_t> first = {0};
    CHECK(multiclass_margin(Matrix::from_rows({{2, 0}}), first).min_margin == 2.0);
    CHECK(multiclass_margin(Matrix::from_rows({{1, 3, 3}}), std::vector<std::size_t>{1}).min_margin == 0.0);

    const Matrix logits = random_matrix(3, 5, 4);
    const std::vector<std::size_t> labels = {4, 0, 2};
    const MarginResult r = multiclass_margin(logits, labels);
    double expected_min = INFINITY;
    for (std::size_t i = 0; i < 3; ++i) {
        double best_wrong = -INFINITY;
        for (std::size_t j = 0; j < 5; ++j)
            if (j != labels[i]) best_wrong = std::max(best_wrong, logits(i, j));
        CHECK(r.per_sample[i] == logits(i, labels[i]) - best_wrong);
        expected_min = std::min(expected_min, r.per_sample[i]);
    }
    CHECK(r.min_margin == expected_min);
}

TEST_CASE("normalized_margin: unit separator and scale invariance") {
    const Dataset d = gen_onehot_1d(3, 0);
    Matrix w(3, 4);
    for (std::size_t i = 0; i < 3; ++i) w(i, i) = 1.0 / std::sqrt(3.0);
    CHECK(normalized_margin(two_layer(w), d, false) == doctest::Approx(1.0 / std::sqrt(3.0)));

    const NetworkParams p = init_network(4, 5, 3, 3, Activation::linear, 1.0, 5);
    NetworkParams scaled = p;
    for (auto& layer : scaled.weights) layer = scale(layer, 2.5);
    CHECK(normalized_margin(scaled, d, false) == doctest::Approx(normalized_margin(p, d, false)));
}

TEST_CASE("pc1_order: exact, independent and rotated states") {
    Matrix states(50, 1), h(50, 3);
    for (std::size_t i = 0; i < 50; ++i) {
        states(i, 0) = static_cast<double>(i % 10);
        h(i, 0) = 5.0 * states(i, 0);
        h(i, 1) = 0.01 * std::sin(static_cast<double>(i));
    }
    CHECK(pc1_order(h, states) == doctest::Approx(1.0));

    Rng rng(17);
    Matrix s500(500, 1);
    for (std::size_t i = 0; i < 500; ++i) s500(i, 0) = static_cast<double>(rng.below(20));
    CHECK(std::abs(pc1_order(random_matrix(500, 16, 18), s500)) <= 0.1);

    Matrix s2(40, 2), rot(40, 2);
    const double c = std::cos(0.7), s = std::sin(0.7);
    for (std::size_t i = 0; i < 40; ++i) {
        s2(i, 0) = static_cast<double>(i % 8);
        s2(i, 1) = static_cast<double>(i / 8);
        rot(i, 0) = c * s2(i, 0) - s * s2(i, 1);
        rot(i, 1) = s * s2(i, 0) + c * s2(i, 1);
    }
    CHECK(pc1_order(rot, s2) == doctest::Approx(1.0));
}

TEST_CASE("alignment: extremes and rotation invariance") {
    const Matrix h1 = random_matrix(60, 5, 20);
    CHECK(alignment(h1, h1) == doctest::Approx(1.0));

    Matrix a(40, 4), b(40, 4);
    Rng rng(21);
    for (std::size_t i = 0; i < 40; ++i) {
        a(i, 0) = rng.normal();
        a(i, 1) = rng.normal();
        b(i, 2) = rng.normal();
        b(i, 3) = rng.normal();
    }
    CHECK(alignment(a, b) == doctest::Approx(0.0).epsilon(1e-12));

    Matrix rotated = a;
    const double c = std::cos(1.1), s = std::sin(1.1);
    for (std::size_t i = 0; i < 40; ++i) {
        rotated(i, 0) = c * a(i, 0) - s * a(i, 1);
        rotated(i, 1) = s * a(i, 0) + c * a(i, 1);
    }
    CHECK(alignment(a, rotated) == doctest::Approx(1.0));
}

TEST_CASE("participation_ratio: formula examples") {
    CHECK(participation_ratio(axis_cloud({1, 1, 1, 1, 1})) == doctest::Approx(5.0).epsilon(1e-12));
    Matrix rank1(10, 3);
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t k = 0; k < 3; ++k) rank1(i, k) = static_cast<double>(i) * (k + 1.0);
    CHECK(participation_ratio(rank1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(participation_ratio(axis_cloud({std::sqrt(2.0), 1, 1})) == doctest::Approx(16.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("participation_ratio: bounds") {
    for (std::uint64_t seed = 30; seed < 35; ++seed) {
        const Matrix h = random_matrix(20, 6, seed);
        const double pr = participation_ratio(h);
        CHECK(pr >= 1.0 - 1e-12);
        CHECK(pr <= 6.0 + 1e-12);
    }
}

TEST_CASE("spectrum_summary") {
    SpectrumSummary s = spectrum_summary(Matrix::identity(4));
    CHECK(s.effective_rank == doctest::Approx(4.0));
    CHECK(s.hard_rank == 4);

    const std::vector<double> d = {3, 1, 0};
    s = spectrum_summary(Matrix::diagonal(d));
    CHECK(s.effective_rank == doctest::Approx(100.0 / 82.0));
    CHECK(s.hard_rank == 2);

    Matrix r1(3, 4);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < 4; ++k) r1(i, k) = (i + 1.0) * (k + 2.0);
    s = spectrum_summary(r1);
    CHECK(s.effective_rank == doctest::Approx(1.0));
    CHECK(s.hard_rank == 1);
}

TEST_CASE("singular_alignment") {
    const Matrix w = random_matrix(3, 5, 40);
    for (double c : singular_alignment(w, w.transpose(), 3)) CHECK(c == doctest::Approx(1.0));
    const std::vector<double> d1 = {2, 1}, d2 = {1, 2};
    CHECK(singular_alignment(Matrix::diagonal(d1), Matrix::diagonal(d2), 1)[0] ==
          doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("schatten_quasinorm") {
    CHECK(schatten_quasinorm(Matrix::identity(5), 1.0) == doctest::Approx(5.0).epsilon(1e-12));
    Matrix r1(2, 2);
    r1(0, 0) = 2.0;
    CHECK(schatten_quasinorm(r1, 0.5) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    const std::vector<double> d = {4, 1};
    CHECK(schatten_quasinorm(Matrix::diagonal(d), 2.0 / 3.0) ==
          doctest::Approx(std::pow(4.0, 2.0 / 3.0) + 1.0).epsilon(1e-12));
    CHECK_THROWS_AS(schatten_quasinorm(r1, 0.0), ValueError);
}

TEST_CASE("analyze: linear classifier report is complete and repeatable") {
    const Dataset d = gen_onehot_1d(8, 3);
    const NetworkParams p = init_network(d.x.cols(), 16, 3, d.y.cols(), Activation::linear, 1.0, 1);
    const MetricsReport r = analyze(p, d);
    for (const char* key : {"accuracy", "alignment", "effective_rank", "hard_rank", "min_margin", "nc1",
                            "normalized_margin", "ols_effective_rank", "ols_hard_rank",
                            "ols_weight_cosine_1", "participation_ratio", "pc1_order_r2",
                            "schatten_quasinorm"}) {
        CAPTURE(key);
        REQUIRE(r.scalars.count(key) == 1);
        CHECK(std::isfinite(r.scalars.at(key)));
    }
    CHECK(r.band.has_value());
    CHECK(r.spectra.count("ols_singular_values") == 1);
    CHECK(analyze(p, d) == r);
}

TEST_CASE("analyze: untrained net shows little state order") {
    const Dataset d = gen_onehot_1d(20, 10);
    const NetworkParams p = init_network(d.x.cols(), 64, 2, d.y.cols(), Activation::linear, 1.0, 0);
    CHECK(analyze(p, d).scalars.at("pc1_order_r2") <= 0.3);
}

TEST_CASE("analyze: continuous task gets representation metrics") {
    const Dataset d = gen_piecewise(80, 0.3, 4, 2, 3);
    const NetworkParams p = init_network(d.x.cols(), 8, 3, d.y.cols(), Activation::relu, 1.0, 2);
    const MetricsReport r = analyze(p, d);
    CHECK(r.scalars.count("pc1_order_r2") == 1);
    CHECK(r.scalars.count("pc1_order_input_state_r2") == 1);
    CHECK(r.scalars.count("final_mse") == 1);
    CHECK(r.scalars.count("nc1") == 0);
    CHECK_FALSE(r.band.has_value());
}

TEST_CASE("alignment_partitions") {
    const auto [e0, e1] = alignment_partitions(gen_two_envs(4, 1));
    CHECK(e0.size() == 10);
    CHECK(e1.size() == 10);
    const Dataset d = gen_onehot_1d(6, 1);
    const auto [lo, hi] = alignment_partitions(d);
    CHECK(lo.size() + hi.size() == d.size());
    for (std::size_t i : lo) CHECK(d.metas[i].state[0] <= 3.5);
}
