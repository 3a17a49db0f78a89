#pragma once

#include "pclab/matrix.hpp"
#include "pclab/metrics.hpp"
#include "pclab/nets.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pclab {

enum class ExperimentKind { fig2_grid, fig3_spectra, fig4_twoenv, fig5_piecewise, s1_2d, s2_scaling };

std::string_view to_string(ExperimentKind k);
ExperimentKind parse_experiment_kind(std::string_view name);
const std::vector<ExperimentKind>& all_experiment_kinds();

/// Parameters for every experiment kind; fields a kind does not use are ignored.
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::fig2_grid;
    std::size_t states = 20;                ///< S (grid side for s1_2d)
    std::vector<std::size_t> states_list;   ///< s2_scaling
    std::vector<std::size_t> actions;       ///< A values
    std::vector<std::size_t> depths;        ///< L values
    std::size_t seeds = 5;
    std::uint64_t base_seed = 0;
    std::size_t workers = 1;
    TrainConfig train;
    bool restrict_small_actions = true;
    double var_threshold = 0.95;
    // fig5_piecewise
    std::vector<double> sigmas;
    std::size_t n_samples = 500;
    std::size_t d_obs = 8;
    std::size_t n_breaks = 3;
    // s2_scaling
    double pr_threshold = 2.0;
    std::size_t bootstrap_n = 1000;
    /// Scan every A up to ceil(S/2)+1 even after the threshold is found.
    bool full_scan = false;

    void validate() const;
    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Calibrated defaults for one experiment kind.
ExperimentConfig default_experiment_config(ExperimentKind kind);

struct RunRecord {
    std::string experiment;
    std::string variant;  ///< free-form tag, e.g. "sigma=0.5"; empty when unused
    std::size_t states = 0;
    std::size_t max_action = 0;
    std::size_t depth = 0;
    std::uint64_t seed = 0;
    std::map<std::string, double> metrics;
    double final_loss = 0.0;
    std::size_t steps_taken = 0;
    bool converged = false;
    bool diverged = false;
    std::string error;
    /// Top-2 PCA projection of the hidden activations and the first latent
    /// coordinate of each row; kept for the first seed of each configuration.
    Matrix embedding;
    std::vector<double> embedding_color;
    /// Spectra from the metrics report, kept alongside the embedding.
    std::map<std::string, std::vector<double>> spectra;
};

/// Median and sample std of one metric over converged runs of one configuration.
struct Aggregate {
    std::string experiment;
    std::string variant;
    std::size_t states = 0;
    std::size_t max_action = 0;
    std::size_t depth = 0;
    std::string metric;
    double median = 0.0;
    double stddev = 0.0;
    std::size_t n_used = 0;
    std::size_t n_total = 0;
};

double median(std::vector<double> values);
/// Sample standard deviation (n - 1); 0 for fewer than two values.
double sample_stddev(const std::vector<double>& values);

/// Groups by (experiment, variant, S, A, L) in first-appearance order and
/// metrics in name order; only converged runs enter the statistics.
std::vector<Aggregate> aggregate(const std::vector<RunRecord>& runs);

/// Median of `metric` over converged runs matching the coordinates.
std::optional<double> median_of(const std::vector<RunRecord>& runs, std::string_view metric,
                                std::size_t max_action, std::size_t depth,
                                std::string_view variant = "");

/// Runs job(i) for i in [0, n) on up to `workers` threads. Results are
/// written by index so the output order never depends on scheduling.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job);

/// Train a fresh network on `data` and measure it. Divergence is recorded
/// on the returned record instead of thrown. If `hidden_out` is given it
/// receives the trained last-hidden-layer activations.
RunRecord train_and_measure(const Dataset& data, const TrainConfig& train,
                            const AnalyzeOptions& analyze_options, bool keep_embedding,
                            Matrix* hidden_out = nullptr);

// --- individual experiments ------------------------------------------------

/// A x L x seed grid on the one-hot 1D task, seed_i = base_seed + i.
std::vector<RunRecord> sweep_grid(const ExperimentConfig& config);

struct AThreshResult {
    std::size_t states = 0;
    std::vector<std::size_t> actions;           ///< scanned A values, ascending
    std::vector<std::vector<double>> pr_values; ///< per A, converged-run PRs
    std::vector<double> medians;
    std::optional<std::size_t> threshold;       ///< unset when no A qualifies
    std::vector<RunRecord> runs;
};

/// First actions[i] whose median is strictly below `bound`.
std::optional<std::size_t> first_below(const std::vector<std::size_t>& actions,
                                       const std::vector<double>& medians, double bound);

/// Scans A = 1..ceil(S/2)+1 training `config.seeds` networks per A.
AThreshResult a_thresh(std::size_t states, const ExperimentConfig& config);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

/// Least-squares line; R^2 is clamped to [0, 1] and is 1 for an exact fit.
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

struct ScalingResult {
    std::vector<std::size_t> states;
    std::vector<AThreshResult> scans;
    std::vector<double> thresholds;      ///< NaN where not found
    std::vector<double> bootstrap_std;
    std::vector<double> bootstrap_mean;
    LinearFit fit;
    bool all_found = false;
};

/// Bootstrap resamples the per-seed PR values of every scanned A with
/// replacement and recomputes the threshold; a resample that never drops
/// below the bound counts as one past the last scanned A.
ScalingResult s_scaling(const ExperimentConfig& config);

struct TwoEnvResult {
    std::vector<RunRecord> runs;
    /// Inputs of the first seed projected onto the OLS estimator's top-2
    /// input singular vectors, per horizon; rows follow the dataset.
    std::map<std::size_t, Matrix> ols_projections;
    std::map<std::size_t, std::vector<int>> env_ids;
};

TwoEnvResult two_env_experiment(const ExperimentConfig& config);

struct PiecewiseResult {
    std::vector<RunRecord> runs;
    /// Pairwise Euclidean distances between hidden activations of the first
    /// seed, rows sorted by input state, per sigma.
    std::map<double, Matrix> distance_matrices;
};

PiecewiseResult piecewise_experiment(const ExperimentConfig& config);

/// Pairwise distance matrix of the rows of h after sorting them by `key`.
Matrix sorted_distance_matrix(const Matrix& h, const std::vector<double>& key);

struct SpectraResult {
    std::vector<RunRecord> runs;
    std::map<std::size_t, std::vector<double>> ols_spectrum;     ///< per A
    std::map<std::size_t, std::vector<double>> weight_spectrum;  ///< per A, first seed
};

SpectraResult fig3_spectra(const ExperimentConfig& config);

/// Same grid as sweep_grid on the 2D task.
std::vector<RunRecord> s1_2d(const ExperimentConfig& config);

// --- output -----------------------------------------------------------------

/// Long format: experiment,variant,S,A,L,seed,metric,value with %.17g values.
/// Each run contributes its metrics plus final_loss, steps_taken, converged
/// and diverged, in name order.
std::string runs_to_csv(const std::vector<RunRecord>& runs);
std::string aggregates_to_csv(const std::vector<Aggregate>& aggs);
std::string scaling_to_csv(const ScalingResult& result);

/// %.17g
std::string format_double(double v);

}  // namespace pclab
