#pragma once

#include "pclab/envs.hpp"
#include "pclab/matrix.hpp"
#include "pclab/nets.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pclab {

/// Minimum-norm least-squares map Sigma = pinv(X) Y, D_in x D_out.
Matrix ols_estimator(const Dataset& data);

/// One off-diagonal block of X^T X or X^T Y. Every nonzero entry links a row
/// latent and a column latent through a displacement d (the action value for
/// blocks indexed by action, t - s for the state/target block); the observed
/// width is the span max(d) - min(d) + 1 over nonzeros and a violation is a
/// nonzero with |d| > A.
struct BandBlock {
    std::string name;
    std::size_t row_begin = 0, row_end = 0;
    std::size_t col_begin = 0, col_end = 0;
    std::size_t nonzeros = 0;
    std::size_t observed_width = 0;
    std::size_t violations = 0;
};

struct BandReport {
    std::size_t states = 0;
    std::size_t max_action = 0;
    std::size_t band_width_predicted = 0;  ///< 2A + 1
    std::size_t band_width_observed = 0;   ///< max over blocks
    std::size_t violations = 0;            ///< total over blocks
    /// Nonzeros off the main diagonal of the two diagonal blocks of X^T X
    /// (zero for one-hot inputs).
    std::size_t diagonal_block_offdiag_nonzeros = 0;
    std::vector<BandBlock> blocks;
};

/// Requires a one-hot 1D dataset.
BandReport band_report(const Dataset& data);

/// Tr(S_W) / Tr(S_B) with both scatters normalized by M.
/// Throws DegenerateError when Tr(S_B) <= 1e-12.
double nc1(const Matrix& h, std::span<const std::size_t> labels);

struct MarginResult {
    std::vector<double> per_sample;
    double min_margin = 0.0;
};

/// gamma_i = f_{y_i} - max_{j != y_i} f_j and their minimum.
MarginResult multiclass_margin(const Matrix& logits, std::span<const std::size_t> labels);

/// Minimum margin of the effective linear map, divided by its Frobenius norm.
/// With restrict_small_actions only rows with every |a_k| <= 1 are scored.
double normalized_margin(const NetworkParams& params, const Dataset& data,
                         bool restrict_small_actions);

/// Project h onto its top-D principal components (D = states.cols()),
/// regress each state column on the projections with an intercept, and
/// return the mean R^2.
double pc1_order(const Matrix& h, const Matrix& states);

/// Cosine of the smallest principal angle between the principal subspaces of
/// h1 and h2, each truncated to the fewest components reaching var_threshold
/// of its variance.
double alignment(const Matrix& h1, const Matrix& h2, double var_threshold = 0.95);

/// (sum lambda)^2 / sum lambda^2 over covariance eigenvalues.
double participation_ratio(const Matrix& h);

struct SpectrumSummary {
    std::vector<double> singular_values;
    double effective_rank = 0.0;  ///< participation ratio of sigma^2
    std::size_t hard_rank = 0;    ///< #{sigma_i >= 0.01 sigma_1}
    std::vector<double> top_left_vector;
    std::vector<double> top_right_vector;
};

SpectrumSummary spectrum_summary(const Matrix& m);

/// |cos| between the i-th right singular vector of w_eff (d_out x d_in) and
/// the i-th left singular vector of sigma (d_in x d_out), i < k.
std::vector<double> singular_alignment(const Matrix& w_eff, const Matrix& sigma, std::size_t k);

/// sum_i sigma_i^p, 0 < p <= 2.
double schatten_quasinorm(const Matrix& w, double p);

struct MetricsReport {
    std::map<std::string, double> scalars;
    std::map<std::string, std::vector<double>> spectra;
    std::map<std::string, std::vector<double>> vectors;
    std::optional<BandReport> band;

    friend bool operator==(const MetricsReport& a, const MetricsReport& b) {
        return a.scalars == b.scalars && a.spectra == b.spectra && a.vectors == b.vectors &&
               a.band.has_value() == b.band.has_value();
    }
};

struct AnalyzeOptions {
    /// Score NC1, margins and PC1-order on rows with |a| <= 1 (discrete tasks).
    bool restrict_small_actions = true;
    double var_threshold = 0.95;
};

/// Every metric that applies to this (network, dataset) pair. Linear
/// classifiers get the full set; MLPs and the continuous task get the
/// representation metrics only. PC1-order is scored against the target
/// state s + a (the class the hidden layer has to encode); the continuous
/// task also reports it against the input state.
MetricsReport analyze(const NetworkParams& params, const Dataset& data,
                      const AnalyzeOptions& options = {});

/// Two partitions used by the alignment metric: the environments for
/// two-environment data, otherwise the lower and upper half of the state range.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> alignment_partitions(
    const Dataset& data);

}  // namespace pclab
