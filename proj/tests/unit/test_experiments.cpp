#include "doctest.h"

#include "pclab/errors.hpp"
#include "pclab/experiments.hpp"
#include "pclab/linalg.hpp"

#include <cmath>
#include <set>

using namespace pclab;

namespace {

ExperimentConfig tiny_grid() {
    ExperimentConfig c = default_experiment_config(ExperimentKind::fig2_grid);
    c.states = 6;
    c.actions = {1, 3};
    c.depths = {2, 3};
    c.seeds = 5;
    c.train.max_steps = 40;
    return c;
}

}  // namespace

TEST_CASE("sweep_grid: one record per (A, L, seed)") {
    const ExperimentConfig c = tiny_grid();
    const auto runs = sweep_grid(c);
    CHECK(runs.size() == 20);
    std::set<std::tuple<std::size_t, std::size_t, std::uint64_t>> keys;
    for (const auto& r : runs) keys.insert({r.max_action, r.depth, r.seed});
    CHECK(keys.size() == 20);
    CHECK(runs_to_csv(sweep_grid(c)) == runs_to_csv(runs));
}

TEST_CASE("sweep_grid: worker count does not change results") {
    ExperimentConfig c = tiny_grid();
    c.seeds = 2;
    const std::string serial = runs_to_csv(sweep_grid(c));
    c.workers = 3;
    CHECK(runs_to_csv(sweep_grid(c)) == serial);
}

TEST_CASE("runs_to_csv: long format") {
    ExperimentConfig c = tiny_grid();
    c.actions = {1};
    c.depths = {2};
    c.seeds = 1;
    const auto runs = sweep_grid(c);
    const std::string csv = runs_to_csv(runs);
    std::size_t lines = 0;
    for (char ch : csv) lines += ch == '\n';
    CHECK(lines == 1 + runs[0].metrics.size() + 4);
    CHECK(csv.rfind("experiment,variant,S,A,L,seed,metric,value\n", 0) == 0);
}

TEST_CASE("first_below") {
    const std::vector<std::size_t> a = {1, 2, 3, 4};
    CHECK(first_below(a, {3.1, 2.5, 1.9, 1.7}, 2.0) == 3u);
    CHECK(first_below(a, {1.5, 2.5, 1.9, 1.7}, 2.0) == 1u);
    CHECK_FALSE(first_below(a, {3.0, 2.5, 2.0, 2.1}, 2.0).has_value());
}

TEST_CASE("linear_fit") {
    LinearFit f = linear_fit({10, 15, 20, 25}, {2, 3, 4, 5});
    CHECK(f.slope == doctest::Approx(0.2));
    CHECK(f.intercept == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(f.r2 == doctest::Approx(1.0));
    f = linear_fit({10, 15, 20, 25}, {3, 3, 3, 3});
    CHECK(f.slope == 0.0);
    CHECK(f.r2 == 1.0);
    f = linear_fit({1, 2, 3, 4}, {1, 3, 2, 4});
    CHECK(f.r2 >= 0.0);
    CHECK(f.r2 <= 1.0);
}

TEST_CASE("median and sample_stddev") {
    CHECK(median({3, 1, 2}) == 2.0);
    CHECK(median({4, 1, 3, 2}) == 2.5);
    CHECK(std::isnan(median({})));
    CHECK(sample_stddev({2, 4}) == doctest::Approx(std::sqrt(2.0)));
    CHECK(sample_stddev({5}) == 0.0);
}

TEST_CASE("aggregate: groups and skips unconverged runs") {
    std::vector<RunRecord> runs(3);
    for (std::size_t i = 0; i < 3; ++i) {
        runs[i].experiment = "x";
        runs[i].max_action = 1;
        runs[i].depth = 2;
        runs[i].seed = i;
        runs[i].converged = i != 2;
        runs[i].metrics["m"] = static_cast<double>(i + 1);
    }
    const auto aggs = aggregate(runs);
    REQUIRE(aggs.size() == 1);
    CHECK(aggs[0].median == 1.5);
    CHECK(aggs[0].n_used == 2);
    CHECK(aggs[0].n_total == 3);
    CHECK(median_of(runs, "m", 1, 2) == 1.5);
    CHECK_FALSE(median_of(runs, "m", 5, 2).has_value());
}

TEST_CASE("a_thresh: scan stops at the first qualifying horizon") {
    ExperimentConfig c = default_experiment_config(ExperimentKind::s2_scaling);
    c.seeds = 2;
    c.train.loss_floor = 1e9;  // stop at once; the run counts as converged
    c.pr_threshold = 1e9;      // every horizon qualifies
    const AThreshResult r = a_thresh(6, c);
    CHECK(r.threshold == 1u);
    CHECK(r.actions.size() == 1);
    CHECK(r.runs.size() == 2);

    c.pr_threshold = 0.5;  // no horizon can qualify (PR >= 1)
    const AThreshResult none = a_thresh(6, c);
    CHECK_FALSE(none.threshold.has_value());
    CHECK(none.actions.back() == 4);
}

TEST_CASE("s_scaling: censored scans and output table") {
    ExperimentConfig c = default_experiment_config(ExperimentKind::s2_scaling);
    c.states_list = {4, 5, 6};
    c.seeds = 2;
    c.train.loss_floor = 1e9;
    c.bootstrap_n = 20;
    c.pr_threshold = 1e9;
    ScalingResult r = s_scaling(c);
    CHECK(r.all_found);
    for (double t : r.thresholds) CHECK(t == 1.0);
    for (double s : r.bootstrap_std) CHECK(s == 0.0);
    CHECK(r.fit.slope == 0.0);
    const std::string csv = scaling_to_csv(r);
    CHECK(csv.rfind("S,threshold,bootstrap_mean,bootstrap_std,fit_slope,fit_intercept,fit_r2\n", 0) == 0);
    CHECK(scaling_to_csv(s_scaling(c)) == csv);

    c.pr_threshold = 0.5;
    r = s_scaling(c);
    CHECK_FALSE(r.all_found);
    for (double t : r.thresholds) CHECK(std::isnan(t));
}

TEST_CASE("two_env_experiment: per-seed alignment and block-separated OLS projections") {
    ExperimentConfig c = default_experiment_config(ExperimentKind::fig4_twoenv);
    c.states = 5;
    c.actions = {1, 2};
    c.seeds = 2;
    c.train.max_steps = 30;
    const TwoEnvResult r = two_env_experiment(c);
    CHECK(r.runs.size() == 4);
    for (const auto& run : r.runs) CHECK(run.metrics.count("alignment") == 1);
    for (const auto& [a, proj] : r.ols_projections) {
        const auto& ids = r.env_ids.at(a);
        for (std::size_t k = 0; k < 2; ++k) {
            double n0 = 0.0, n1 = 0.0;
            for (std::size_t i = 0; i < proj.rows(); ++i) (ids[i] == 0 ? n0 : n1) += proj(i, k) * proj(i, k);
            CHECK(std::min(n0, n1) <= 1e-20);
            CHECK(std::max(n0, n1) > 0.0);
        }
    }
}

TEST_CASE("sorted_distance_matrix") {
    const Matrix h = Matrix::from_rows({{0, 0}, {3, 4}, {1, 0}});
    const Matrix d = sorted_distance_matrix(h, {0.0, 2.0, 1.0});
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(d(i, i) == 0.0);
        for (std::size_t j = 0; j < 3; ++j) CHECK(d(i, j) == d(j, i));
    }
    CHECK(d(0, 1) == 1.0);
    CHECK(d(0, 2) == 5.0);
}

TEST_CASE("piecewise_experiment: records and distance matrices") {
    ExperimentConfig c = default_experiment_config(ExperimentKind::fig5_piecewise);
    c.seeds = 2;
    c.n_samples = 40;
    c.train.max_steps = 30;
    c.train.hidden_width = 8;
    const PiecewiseResult r = piecewise_experiment(c);
    CHECK(r.runs.size() == 4);
    CHECK(r.distance_matrices.size() == 2);
    for (const auto& [sigma, d] : r.distance_matrices) {
        CHECK(d.rows() == 40);
        for (std::size_t i = 0; i < d.rows(); ++i) CHECK(d(i, i) == 0.0);
    }
    CHECK(r.runs[0].variant == "sigma=0.05");
}

TEST_CASE("fig3_spectra: OLS spectrum per horizon") {
    ExperimentConfig c = default_experiment_config(ExperimentKind::fig3_spectra);
    c.states = 6;
    c.actions = {1, 3};
    c.depths = {3};
    c.seeds = 1;
    c.train.max_steps = 30;
    const SpectraResult r = fig3_spectra(c);
    CHECK(r.ols_spectrum.size() == 2);
    CHECK(r.weight_spectrum.size() == 2);
}

TEST_CASE("config validation") {
    ExperimentConfig c = default_experiment_config(ExperimentKind::fig2_grid);
    CHECK_NOTHROW(c.validate());
    c.actions = {25};
    CHECK_THROWS_AS(c.validate(), ValueError);
    c = default_experiment_config(ExperimentKind::fig5_piecewise);
    c.sigmas = {0.5, 0.05};
    CHECK_THROWS_AS(c.validate(), ValueError);
    for (ExperimentKind k : all_experiment_kinds()) {
        CHECK(parse_experiment_kind(to_string(k)) == k);
        CHECK_NOTHROW(default_experiment_config(k).validate());
    }
}
