#include "pclab/metrics.hpp"

#include "pclab/errors.hpp"
#include "pclab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace pclab {

Matrix ols_estimator(const Dataset& data) {
    if (data.size() == 0) throw ValueError("ols_estimator: empty dataset");
    return pinv_lstsq(data.x, data.y);
}

namespace {

struct DisplacementScan {
    long lo = std::numeric_limits<long>::max();
    long hi = std::numeric_limits<long>::min();
    std::size_t nonzeros = 0;
    std::size_t violations = 0;

    void add(long d, long max_action) {
        ++nonzeros;
        lo = std::min(lo, d);
        hi = std::max(hi, d);
        if (std::abs(d) > max_action) ++violations;
    }
    std::size_t width() const { return nonzeros == 0 ? 0 : static_cast<std::size_t>(hi - lo + 1); }
};

// displacement(r, c) receives block-local indices.
template <class F>
BandBlock scan_block(const Matrix& m, std::string name, std::size_t r0, std::size_t r1,
                     std::size_t c0, std::size_t c1, long max_action, F displacement) {
    DisplacementScan scan;
    for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c)
            if (m(r, c) != 0.0) scan.add(displacement(r - r0, c - c0), max_action);
    return {std::move(name), r0, r1, c0, c1, scan.nonzeros, scan.width(), scan.violations};
}

}  // namespace

BandReport band_report(const Dataset& data) {
    if (data.spec.kind != TaskKind::onehot_1d)
        throw ValueError("band_report: requires a one-hot 1D dataset, got " +
                         std::string(to_string(data.spec.kind)));
    const std::size_t S = data.spec.states;
    const long A = static_cast<long>(data.spec.max_action);
    const std::size_t n_act = 2 * data.spec.max_action + 1;
    if (data.x.cols() != S + n_act || data.y.cols() != S)
        throw ShapeError("band_report: dataset shape does not match its spec");

    const Matrix xtx = matmul_tn(data.x, data.x);
    const Matrix xty = matmul_tn(data.x, data.y);
    auto action_of = [A](std::size_t j) { return static_cast<long>(j) - A; };

    BandReport rep;
    rep.states = S;
    rep.max_action = data.spec.max_action;
    rep.band_width_predicted = n_act;
    rep.blocks.push_back(scan_block(xtx, "xtx_state_action", 0, S, S, S + n_act, A,
                                    [&](std::size_t, std::size_t c) { return action_of(c); }));
    rep.blocks.push_back(scan_block(xtx, "xtx_action_state", S, S + n_act, 0, S, A,
                                    [&](std::size_t r, std::size_t) { return action_of(r); }));
    rep.blocks.push_back(scan_block(xty, "xty_state_target", 0, S, 0, S, A,
                                    [](std::size_t r, std::size_t c) {
                                        return static_cast<long>(c) - static_cast<long>(r);
                                    }));
    rep.blocks.push_back(scan_block(xty, "xty_action_target", S, S + n_act, 0, S, A,
                                    [&](std::size_t r, std::size_t) { return action_of(r); }));
    for (const auto& b : rep.blocks) {
        rep.band_width_observed = std::max(rep.band_width_observed, b.observed_width);
        rep.violations += b.violations;
    }
    for (std::size_t r = 0; r < xtx.rows(); ++r) {
        for (std::size_t c = 0; c < xtx.cols(); ++c) {
            const bool same_block = (r < S) == (c < S);
            if (same_block && r != c && xtx(r, c) != 0.0) ++rep.diagonal_block_offdiag_nonzeros;
        }
    }
    return rep;
}

double nc1(const Matrix& h, std::span<const std::size_t> labels) {
    const std::size_t m = h.rows(), n = h.cols();
    if (labels.size() != m) throw ShapeError("nc1: label count does not match rows");
    std::map<std::size_t, std::vector<double>> sums;
    std::map<std::size_t, std::size_t> counts;
    for (std::size_t i = 0; i < m; ++i) {
        auto& s = sums[labels[i]];
        s.resize(n, 0.0);
        for (std::size_t k = 0; k < n; ++k) s[k] += h(i, k);
        ++counts[labels[i]];
    }
    if (sums.size() < 2) throw ValueError("nc1: need at least 2 distinct labels");

    const std::vector<double> mu = column_means(h);
    for (auto& [label, s] : sums)
        for (double& v : s) v /= static_cast<double>(counts[label]);

    double within = 0.0, between = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const auto& mc = sums[labels[i]];
        for (std::size_t k = 0; k < n; ++k) {
            const double d = h(i, k) - mc[k];
            within += d * d;
        }
    }
    for (const auto& [label, mc] : sums) {
        double d2 = 0.0;
        for (std::size_t k = 0; k < n; ++k) d2 += (mc[k] - mu[k]) * (mc[k] - mu[k]);
        between += static_cast<double>(counts[label]) * d2;
    }
    within /= static_cast<double>(m);
    between /= static_cast<double>(m);
    if (between <= 1e-12) throw DegenerateError("nc1: degenerate class means");
    return within / between;
}

MarginResult multiclass_margin(const Matrix& logits, std::span<const std::size_t> labels) {
    if (logits.cols() < 2) throw ValueError("multiclass_margin: need at least 2 classes");
    if (labels.size() != logits.rows()) throw ShapeError("multiclass_margin: label count mismatch");
    MarginResult out;
    out.per_sample.reserve(labels.size());
    out.min_margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        auto row = logits.row(i);
        const std::size_t y = labels[i];
        if (y >= row.size()) throw ValueError("multiclass_margin: label out of range");
        double rival = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < row.size(); ++j)
            if (j != y) rival = std::max(rival, row[j]);
        out.per_sample.push_back(row[y] - rival);
        out.min_margin = std::min(out.min_margin, out.per_sample.back());
    }
    if (out.per_sample.empty()) out.min_margin = 0.0;
    return out;
}

double normalized_margin(const NetworkParams& params, const Dataset& data,
                         bool restrict_small_actions) {
    if (data.labels.size() != data.size())
        throw ValueError("normalized_margin: dataset has no class labels");
    const Matrix w = effective_weight(params);
    const Dataset scored =
        restrict_small_actions ? data.subset(data.small_action_indices(1.0)) : data;
    if (scored.size() == 0) throw ValueError("normalized_margin: empty evaluation subset");
    const double norm = frobenius_norm(w);
    if (norm == 0.0) throw DegenerateError("normalized_margin: effective weight is zero");
    return multiclass_margin(matmul_nt(scored.x, w), scored.labels).min_margin / norm;
}

namespace {

/// R^2 of the least-squares fit of y on [1 | z].
double regression_r2(const Matrix& z, std::span<const double> y) {
    const std::size_t m = z.rows();
    Matrix design(m, z.cols() + 1);
    Matrix target(m, 1);
    for (std::size_t i = 0; i < m; ++i) {
        design(i, 0) = 1.0;
        for (std::size_t k = 0; k < z.cols(); ++k) design(i, k + 1) = z(i, k);
        target(i, 0) = y[i];
    }
    const Matrix beta = pinv_lstsq(design, target);
    const Matrix fit = matmul(design, beta);
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(m);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        ss_res += (y[i] - fit(i, 0)) * (y[i] - fit(i, 0));
        ss_tot += (y[i] - mean) * (y[i] - mean);
    }
    if (ss_tot == 0.0) throw DegenerateError("pc1_order: state has zero variance");
    return std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0);
}

double total_variance(const std::vector<double>& variances) {
    return std::accumulate(variances.begin(), variances.end(), 0.0);
}

/// Leading principal directions (n x r, orthonormal columns) covering
/// var_threshold of the variance.
Matrix principal_subspace(const Matrix& h, double var_threshold, const char* who) {
    const PcaResult p = pca(h, std::min(h.rows(), h.cols()));
    const double total = total_variance(p.all_variances);
    if (!(total > 0.0)) throw DegenerateError(std::string(who) + ": zero-variance activations");
    std::size_t r = 0;
    double acc = 0.0;
    while (r < p.explained_variance.size() && acc < var_threshold * total)
        acc += p.explained_variance[r++];
    Matrix u(h.cols(), r);
    for (std::size_t j = 0; j < r; ++j)
        for (std::size_t i = 0; i < h.cols(); ++i) u(i, j) = p.components(j, i);
    return u;
}

}  // namespace

double pc1_order(const Matrix& h, const Matrix& states) {
    if (h.rows() < 3) throw ValueError("pc1_order: need at least 3 rows");
    if (states.rows() != h.rows()) throw ShapeError("pc1_order: states/rows mismatch");
    const std::size_t d = states.cols();
    if (d == 0) throw ShapeError("pc1_order: empty state matrix");
    const PcaResult p = pca(h, d);
    if (!(total_variance(p.all_variances) > 0.0))
        throw DegenerateError("pc1_order: zero-variance activations");
    double sum = 0.0;
    for (std::size_t k = 0; k < d; ++k) sum += regression_r2(p.projections, states.col(k));
    return sum / static_cast<double>(d);
}

double alignment(const Matrix& h1, const Matrix& h2, double var_threshold) {
    if (h1.rows() < 2 || h2.rows() < 2) throw ValueError("alignment: need at least 2 rows each");
    if (h1.cols() != h2.cols())
        throw ShapeError("alignment: widths differ, " + h1.shape_str() + " vs " + h2.shape_str());
    if (!(var_threshold > 0.0 && var_threshold <= 1.0))
        throw ValueError("alignment: var_threshold must be in (0, 1]");
    const Matrix u1 = principal_subspace(h1, var_threshold, "alignment");
    const Matrix u2 = principal_subspace(h2, var_threshold, "alignment");
    const SvdResult d = svd(matmul_tn(u1, u2));
    return std::clamp(d.singular_values.front(), 0.0, 1.0);
}

double participation_ratio(const Matrix& h) {
    const PcaResult p = pca(h, 1);
    double sum = 0.0, sum_sq = 0.0;
    for (double l : p.all_variances) {
        sum += l;
        sum_sq += l * l;
    }
    if (!(sum > 0.0)) throw DegenerateError("participation_ratio: zero variance");
    return sum * sum / sum_sq;
}

SpectrumSummary spectrum_summary(const Matrix& m) {
    const SvdResult d = svd(m);
    SpectrumSummary out;
    out.singular_values = d.singular_values;
    double s2 = 0.0, s4 = 0.0;
    for (double s : d.singular_values) {
        s2 += s * s;
        s4 += s * s * s * s;
    }
    out.effective_rank = s4 > 0.0 ? s2 * s2 / s4 : 0.0;
    const double top = d.singular_values.front();
    for (double s : d.singular_values)
        if (top > 0.0 && s >= 0.01 * top) ++out.hard_rank;
    out.top_left_vector = d.u.col(0);
    auto v = d.vt.row(0);
    out.top_right_vector.assign(v.begin(), v.end());
    return out;
}

std::vector<double> singular_alignment(const Matrix& w_eff, const Matrix& sigma, std::size_t k) {
    if (w_eff.cols() != sigma.rows())
        throw ShapeError("singular_alignment: input spaces differ, " + w_eff.shape_str() + " vs " +
                         sigma.shape_str());
    const SvdResult dw = svd(w_eff);
    const SvdResult ds = svd(sigma);
    const std::size_t rank = std::min(dw.singular_values.size(), ds.singular_values.size());
    if (k == 0 || k > rank)
        throw ShapeError("singular_alignment: k=" + std::to_string(k) + " exceeds rank " +
                         std::to_string(rank));
    std::vector<double> out(k);
    for (std::size_t i = 0; i < k; ++i) {
        const std::vector<double> left = ds.u.col(i);
        out[i] = std::min(1.0, std::abs(dot(dw.vt.row(i), left)));
    }
    return out;
}

double schatten_quasinorm(const Matrix& w, double p) {
    if (!(p > 0.0 && p <= 2.0)) throw ValueError("schatten_quasinorm: p must be in (0, 2]");
    double sum = 0.0;
    for (double s : svd(w).singular_values)
        if (s > 0.0) sum += std::pow(s, p);
    return sum;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> alignment_partitions(
    const Dataset& data) {
    std::pair<std::vector<std::size_t>, std::vector<std::size_t>> out;
    if (data.spec.kind == TaskKind::two_envs) {
        out.first = data.env_indices(0);
        out.second = data.env_indices(1);
        return out;
    }
    // Split on the first state coordinate at the midpoint of its range.
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& m : data.metas) {
        lo = std::min(lo, m.state.front());
        hi = std::max(hi, m.state.front());
    }
    const double mid = 0.5 * (lo + hi);
    for (std::size_t i = 0; i < data.metas.size(); ++i)
        (data.metas[i].state.front() <= mid ? out.first : out.second).push_back(i);
    return out;
}

MetricsReport analyze(const NetworkParams& params, const Dataset& data,
                      const AnalyzeOptions& options) {
    if (data.size() == 0) throw ValueError("analyze: empty dataset");
    if (data.x.cols() != params.d_in() || data.y.cols() != params.d_out())
        throw ShapeError("analyze: network " + std::to_string(params.d_in()) + "->" +
                         std::to_string(params.d_out()) + " does not fit dataset " +
                         data.x.shape_str() + " -> " + data.y.shape_str());
    MetricsReport rep;
    const ForwardPass pass = forward(params, data.x);
    const Matrix& hidden = pass.last_hidden();

    rep.scalars["participation_ratio"] = participation_ratio(hidden);
    const auto [part_a, part_b] = alignment_partitions(data);
    rep.scalars["alignment"] = alignment(hidden.select_rows(part_a), hidden.select_rows(part_b),
                                         options.var_threshold);

    if (!data.is_discrete()) {
        rep.scalars["pc1_order_r2"] = pc1_order(hidden, data.target_states());
        rep.scalars["pc1_order_input_state_r2"] = pc1_order(hidden, data.input_states());
        rep.scalars["final_mse"] = loss_value(params, data.x, data.y, {}, LossKind::mse);
        return rep;
    }

    std::vector<std::size_t> scored(data.size());
    std::iota(scored.begin(), scored.end(), std::size_t{0});
    if (options.restrict_small_actions) scored = data.small_action_indices(1.0);
    const Dataset sub = data.subset(scored);
    const Matrix sub_hidden = hidden.select_rows(scored);
    const Matrix sub_logits = pass.outputs.select_rows(scored);

    rep.scalars["pc1_order_r2"] = pc1_order(sub_hidden, sub.target_states());
    rep.scalars["nc1"] = nc1(sub_hidden, sub.labels);
    rep.scalars["min_margin"] = multiclass_margin(sub_logits, sub.labels).min_margin;
    rep.scalars["accuracy"] = accuracy(pass.outputs, data.labels);

    if (params.activation == Activation::linear) {
        const Matrix w = effective_weight(params);
        rep.scalars["normalized_margin"] =
            normalized_margin(params, data, options.restrict_small_actions);
        rep.scalars["schatten_quasinorm"] =
            schatten_quasinorm(w, 2.0 / static_cast<double>(params.depth()));
        const SpectrumSummary ws = spectrum_summary(w);
        rep.scalars["effective_rank"] = ws.effective_rank;
        rep.scalars["hard_rank"] = static_cast<double>(ws.hard_rank);
        rep.spectra["weight_singular_values"] = ws.singular_values;
        rep.vectors["weight_top_singular_vector"] = ws.top_right_vector;

        const Matrix sigma = ols_estimator(data);
        const SpectrumSummary os = spectrum_summary(sigma);
        rep.scalars["ols_effective_rank"] = os.effective_rank;
        rep.scalars["ols_hard_rank"] = static_cast<double>(os.hard_rank);
        rep.spectra["ols_singular_values"] = os.singular_values;
        rep.vectors["ols_top_singular_vector"] = os.top_left_vector;
        const auto cos = singular_alignment(w, sigma, 2);
        rep.scalars["ols_weight_cosine_1"] = cos[0];
        rep.scalars["ols_weight_cosine_2"] = cos[1];
    }
    if (data.spec.kind == TaskKind::onehot_1d) rep.band = band_report(data);
    return rep;
}

}  // namespace pclab
