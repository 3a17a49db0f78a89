#include "pclab/envs.hpp"

#include "pclab/errors.hpp"
#include "pclab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pclab {

std::string_view to_string(TaskKind kind) {
    switch (kind) {
        case TaskKind::onehot_1d: return "onehot_1d";
        case TaskKind::onehot_2d: return "onehot_2d";
        case TaskKind::two_envs: return "two_envs";
        case TaskKind::piecewise: return "piecewise";
    }
    return "unknown";
}

TaskKind parse_task_kind(std::string_view name) {
    if (name == "onehot_1d") return TaskKind::onehot_1d;
    if (name == "onehot_2d") return TaskKind::onehot_2d;
    if (name == "two_envs") return TaskKind::two_envs;
    if (name == "piecewise") return TaskKind::piecewise;
    throw ValueError("unknown generator kind '" + std::string(name) + "'");
}

std::size_t valid_pair_count(std::size_t states, std::size_t max_action) {
    return states * (2 * max_action + 1) - max_action * (max_action + 1);
}

namespace {

void check_discrete_args(const char* who, std::size_t states, std::size_t max_action) {
    if (states < 2) {
        throw ValueError(std::string(who) + ": need at least 2 states, got " +
                         std::to_string(states));
    }
    if (max_action >= states) {
        throw ValueError(std::string(who) + ": max action " + std::to_string(max_action) +
                         " must be below the state count " + std::to_string(states));
    }
}

Matrix rows_to_matrix(const std::vector<std::vector<double>>& rows, std::size_t cols) {
    std::vector<double> flat;
    flat.reserve(rows.size() * cols);
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    return Matrix(rows.size(), cols, std::move(flat));
}

Matrix latent_matrix(const std::vector<SampleMeta>& metas, bool target) {
    if (metas.empty()) return {};
    const std::size_t d = metas.front().state.size();
    Matrix out(metas.size(), d);
    for (std::size_t i = 0; i < metas.size(); ++i) {
        const auto& v = target ? metas[i].target_state : metas[i].state;
        for (std::size_t k = 0; k < d; ++k) out(i, k) = v[k];
    }
    return out;
}

}  // namespace

Matrix Dataset::target_states() const { return latent_matrix(metas, true); }
Matrix Dataset::input_states() const { return latent_matrix(metas, false); }

std::vector<std::size_t> Dataset::small_action_indices(double bound) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < metas.size(); ++i) {
        const auto& a = metas[i].action;
        if (std::all_of(a.begin(), a.end(), [&](double v) { return std::abs(v) <= bound; }))
            out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> Dataset::env_indices(int env_id) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < metas.size(); ++i)
        if (metas[i].env_id == env_id) out.push_back(i);
    return out;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
    Dataset out;
    out.x = x.select_rows(indices);
    out.y = y.select_rows(indices);
    out.spec = spec;
    out.metas.reserve(indices.size());
    for (std::size_t i : indices) {
        out.metas.push_back(metas.at(i));
        if (!labels.empty()) out.labels.push_back(labels.at(i));
    }
    return out;
}

Dataset gen_onehot_1d(std::size_t states, std::size_t max_action) {
    check_discrete_args("gen_onehot_1d", states, max_action);
    const long S = static_cast<long>(states);
    const long A = static_cast<long>(max_action);
    const std::size_t n_actions = 2 * max_action + 1;
    const std::size_t d_in = states + n_actions;

    std::vector<std::vector<double>> xs, ys;
    Dataset ds;
    for (long s = 1; s <= S; ++s) {
        for (long a = -A; a <= A; ++a) {
            const long t = s + a;
            if (t < 1 || t > S) continue;
            std::vector<double> x(d_in, 0.0), y(states, 0.0);
            x[static_cast<std::size_t>(s - 1)] = 1.0;
            x[states + static_cast<std::size_t>(a + A)] = 1.0;
            y[static_cast<std::size_t>(t - 1)] = 1.0;
            xs.push_back(std::move(x));
            ys.push_back(std::move(y));
            const auto label = static_cast<std::size_t>(t - 1);
            ds.labels.push_back(label);
            ds.metas.push_back({{double(s)}, {double(a)}, {double(t)}, 0, label});
        }
    }
    ds.x = rows_to_matrix(xs, d_in);
    ds.y = rows_to_matrix(ys, states);
    ds.spec.kind = TaskKind::onehot_1d;
    ds.spec.states = states;
    ds.spec.max_action = max_action;
    return ds;
}

Dataset gen_onehot_2d(std::size_t side, std::size_t max_action) {
    check_discrete_args("gen_onehot_2d", side, max_action);
    const long n = static_cast<long>(side);
    const long A = static_cast<long>(max_action);
    const std::size_t width = 2 * max_action + 1;
    const std::size_t n_cells = side * side;
    const std::size_t d_in = n_cells + width * width;

    std::vector<std::vector<double>> xs, ys;
    Dataset ds;
    for (long r = 1; r <= n; ++r) {
        for (long c = 1; c <= n; ++c) {
            for (long ar = -A; ar <= A; ++ar) {
                for (long ac = -A; ac <= A; ++ac) {
                    const long tr = r + ar, tc = c + ac;
                    if (tr < 1 || tr > n || tc < 1 || tc > n) continue;
                    std::vector<double> x(d_in, 0.0), y(n_cells, 0.0);
                    x[static_cast<std::size_t>((r - 1) * n + (c - 1))] = 1.0;
                    x[n_cells + static_cast<std::size_t>((ar + A) * long(width) + (ac + A))] = 1.0;
                    const auto label = static_cast<std::size_t>((tr - 1) * n + (tc - 1));
                    y[label] = 1.0;
                    xs.push_back(std::move(x));
                    ys.push_back(std::move(y));
                    ds.labels.push_back(label);
                    ds.metas.push_back({{double(r), double(c)},
                                        {double(ar), double(ac)},
                                        {double(tr), double(tc)},
                                        0,
                                        label});
                }
            }
        }
    }
    ds.x = rows_to_matrix(xs, d_in);
    ds.y = rows_to_matrix(ys, n_cells);
    ds.spec.kind = TaskKind::onehot_2d;
    ds.spec.states = side;
    ds.spec.max_action = max_action;
    return ds;
}

Dataset gen_two_envs(std::size_t states, std::size_t max_action) {
    check_discrete_args("gen_two_envs", states, max_action);
    const Dataset single = gen_onehot_1d(states, max_action);
    const std::size_t block_in = single.x.cols();
    const std::size_t block_out = single.y.cols();
    const std::size_t m = single.size();

    Dataset ds;
    ds.x = Matrix(2 * m, 2 * block_in);
    ds.y = Matrix(2 * m, 2 * block_out);
    for (int env = 0; env < 2; ++env) {
        const std::size_t row0 = static_cast<std::size_t>(env) * m;
        const std::size_t in0 = static_cast<std::size_t>(env) * block_in;
        const std::size_t out0 = static_cast<std::size_t>(env) * block_out;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t c = 0; c < block_in; ++c) ds.x(row0 + i, in0 + c) = single.x(i, c);
            for (std::size_t c = 0; c < block_out; ++c) ds.y(row0 + i, out0 + c) = single.y(i, c);
            SampleMeta meta = single.metas[i];
            meta.env_id = env;
            meta.class_label = single.labels[i] + out0;
            ds.labels.push_back(*meta.class_label);
            ds.metas.push_back(std::move(meta));
        }
    }
    ds.spec.kind = TaskKind::two_envs;
    ds.spec.states = states;
    ds.spec.max_action = max_action;
    ds.spec.env_count = 2;
    return ds;
}

PiecewiseMap::PiecewiseMap(std::size_t d_obs, std::size_t n_breaks, std::uint64_t seed)
    : n_breaks_(n_breaks) {
    if (d_obs < 2) throw ValueError("piecewise map: d_obs must be >= 2");
    if (n_breaks < 1) throw ValueError("piecewise map: n_breaks must be >= 1");
    Rng rng(derive_seed(seed, 0));
    slopes_.assign(d_obs, std::vector<double>(n_breaks + 1));
    offsets_.assign(d_obs, std::vector<double>(n_breaks + 1));
    for (std::size_t k = 0; k < d_obs; ++k) {
        for (std::size_t j = 0; j <= n_breaks; ++j) {
            slopes_[k][j] = rng.normal();
            offsets_[k][j] = rng.normal();
        }
    }
}

std::size_t PiecewiseMap::segment_of(double s) const {
    const double width = 2.0 / static_cast<double>(n_breaks_ + 1);
    const double pos = std::floor((s + 1.0) / width);
    if (pos <= 0.0) return 0;
    return std::min(static_cast<std::size_t>(pos), n_breaks_);
}

std::vector<double> PiecewiseMap::operator()(double s) const {
    const std::size_t j = segment_of(s);
    std::vector<double> out(dim());
    for (std::size_t k = 0; k < dim(); ++k) out[k] = slopes_[k][j] * s + offsets_[k][j];
    return out;
}

Dataset gen_piecewise(std::size_t n_samples, double action_sigma, std::size_t d_obs,
                      std::size_t n_breaks, std::uint64_t seed) {
    if (n_samples < 1) throw ValueError("gen_piecewise: n_samples must be >= 1");
    if (!(action_sigma > 0.0) || !std::isfinite(action_sigma))
        throw ValueError("gen_piecewise: action_sigma must be > 0");
    const PiecewiseMap obs(d_obs, n_breaks, seed);
    Rng rng(derive_seed(seed, 1));

    Dataset ds;
    ds.x = Matrix(n_samples, d_obs + 1);
    ds.y = Matrix(n_samples, d_obs);
    for (std::size_t i = 0; i < n_samples; ++i) {
        double s, a;
        do {
            s = rng.uniform(-1.0, 1.0);
            a = rng.normal(0.0, action_sigma);
        } while (std::abs(s + a) > 1.0);
        const auto os = obs(s);
        const auto ot = obs(s + a);
        for (std::size_t k = 0; k < d_obs; ++k) {
            ds.x(i, k) = os[k];
            ds.y(i, k) = ot[k];
        }
        ds.x(i, d_obs) = a;
        ds.metas.push_back({{s}, {a}, {s + a}, 0, std::nullopt});
    }
    ds.spec.kind = TaskKind::piecewise;
    ds.spec.n_samples = n_samples;
    ds.spec.action_sigma = action_sigma;
    ds.spec.d_obs = d_obs;
    ds.spec.n_breaks = n_breaks;
    ds.spec.seed = seed;
    return ds;
}

Dataset generate(const GeneratorSpec& spec) {
    switch (spec.kind) {
        case TaskKind::onehot_1d: return gen_onehot_1d(spec.states, spec.max_action);
        case TaskKind::onehot_2d: return gen_onehot_2d(spec.states, spec.max_action);
        case TaskKind::two_envs: return gen_two_envs(spec.states, spec.max_action);
        case TaskKind::piecewise:
            return gen_piecewise(spec.n_samples, spec.action_sigma, spec.d_obs, spec.n_breaks,
                                 spec.seed);
    }
    throw ValueError("generate: unknown task kind");
}

}  // namespace pclab
