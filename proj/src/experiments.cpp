#include "pclab/experiments.hpp"

#include "pclab/errors.hpp"
#include "pclab/linalg.hpp"
#include "pclab/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <set>
#include <numeric>
#include <sstream>
#include <thread>

namespace pclab {

std::string_view to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::fig2_grid: return "fig2_grid";
        case ExperimentKind::fig3_spectra: return "fig3_spectra";
        case ExperimentKind::fig4_twoenv: return "fig4_twoenv";
        case ExperimentKind::fig5_piecewise: return "fig5_piecewise";
        case ExperimentKind::s1_2d: return "s1_2d";
        case ExperimentKind::s2_scaling: return "s2_scaling";
    }
    return "unknown";
}

const std::vector<ExperimentKind>& all_experiment_kinds() {
    static const std::vector<ExperimentKind> kinds = {
        ExperimentKind::fig2_grid,      ExperimentKind::fig3_spectra, ExperimentKind::fig4_twoenv,
        ExperimentKind::fig5_piecewise, ExperimentKind::s1_2d,        ExperimentKind::s2_scaling};
    return kinds;
}

ExperimentKind parse_experiment_kind(std::string_view name) {
    for (ExperimentKind k : all_experiment_kinds())
        if (to_string(k) == name) return k;
    throw ValueError("unknown experiment kind '" + std::string(name) + "'");
}

ExperimentConfig default_experiment_config(ExperimentKind kind) {
    ExperimentConfig c;
    c.kind = kind;
    switch (kind) {
        case ExperimentKind::fig2_grid:
            c.actions = {1, 10};
            c.depths = {2, 5, 9};
            break;
        case ExperimentKind::fig3_spectra:
            c.actions = {1, 10};
            c.depths = {9};
            break;
        case ExperimentKind::fig4_twoenv:
            c.states = 10;
            c.actions = {1, 5};
            c.depths = {5};
            break;
        case ExperimentKind::fig5_piecewise:
            c.sigmas = {0.05, 0.5};
            c.depths = {4};
            c.train.loss = LossKind::mse;
            c.train.activation = Activation::relu;
            c.train.init_scale = 0.3;
            c.train.max_steps = 20'000;
            break;
        case ExperimentKind::s1_2d:
            c.states = 5;
            c.actions = {1, 2};
            c.depths = {2, 5};
            c.seeds = 3;
            break;
        case ExperimentKind::s2_scaling:
            c.states_list = {10, 15, 20, 25};
            c.depths = {5};
            c.seeds = 10;
            c.train.loss = LossKind::mse;
            c.train.activation = Activation::relu;
            c.train.init_scale = 0.2;
            c.train.max_steps = 20'000;
            break;
    }
    c.train.depth = c.depths.front();
    return c;
}

void ExperimentConfig::validate() const {
    train.validate();
    if (seeds < 1) throw ValueError("seeds must be >= 1");
    if (workers < 1) throw ValueError("workers must be >= 1");
    if (depths.empty()) throw ValueError("depths must be nonempty");
    for (std::size_t l : depths)
        if (l < 2) throw ValueError("every depth must be >= 2");
    if (!(var_threshold > 0.0 && var_threshold <= 1.0))
        throw ValueError("var_threshold must be in (0, 1]");
    switch (kind) {
        case ExperimentKind::fig5_piecewise:
            if (sigmas.size() != 2 || !(sigmas[0] > 0.0) || !(sigmas[1] > sigmas[0]))
                throw ValueError("sigmas must be [narrow, wide] with wide > narrow > 0");
            if (n_samples < 3) throw ValueError("n_samples must be >= 3");
            break;
        case ExperimentKind::s2_scaling:
            if (states_list.size() < 3) throw ValueError("states_list needs at least 3 entries");
            for (std::size_t s : states_list)
                if (s < 4) throw ValueError("every entry of states_list must be >= 4");
            if (bootstrap_n < 1) throw ValueError("bootstrap_n must be >= 1");
            break;
        case ExperimentKind::fig4_twoenv:
            if (actions.size() != 2 || actions[1] <= actions[0])
                throw ValueError("actions must be [single, multi] with multi > single");
            [[fallthrough]];
        default:
            if (actions.empty()) throw ValueError("actions must be nonempty");
            for (std::size_t a : actions)
                if (a >= states) throw ValueError("every action must be below states");
            if (states < 2) throw ValueError("states must be >= 2");
            break;
    }
}

double median(std::vector<double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double sample_stddev(const std::vector<double>& values) {
    const std::size_t n = values.size();
    if (n < 2) return 0.0;
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / double(n);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / double(n - 1));
}

std::vector<Aggregate> aggregate(const std::vector<RunRecord>& runs) {
    struct Group {
        const RunRecord* first;
        std::map<std::string, std::vector<double>> values;
        std::set<std::string> names;
        std::size_t total = 0;
    };
    std::vector<Group> groups;
    auto same = [](const RunRecord& a, const RunRecord& b) {
        return a.experiment == b.experiment && a.variant == b.variant && a.states == b.states &&
               a.max_action == b.max_action && a.depth == b.depth;
    };
    for (const auto& r : runs) {
        auto it = std::find_if(groups.begin(), groups.end(),
                               [&](const Group& g) { return same(*g.first, r); });
        if (it == groups.end()) {
            groups.push_back({&r, {}, {}, 0});
            it = std::prev(groups.end());
        }
        ++it->total;
        for (const auto& [name, v] : r.metrics) {
            it->names.insert(name);
            if (r.converged && !r.diverged) it->values[name].push_back(v);
        }
    }
    std::vector<Aggregate> out;
    for (const auto& g : groups) {
        for (const auto& name : g.names) {
            const auto found = g.values.find(name);
            const std::vector<double> vals = found == g.values.end() ? std::vector<double>{} : found->second;
            out.push_back({g.first->experiment, g.first->variant, g.first->states,
                           g.first->max_action, g.first->depth, name, median(vals),
                           sample_stddev(vals), vals.size(), g.total});
        }
    }
    return out;
}

std::optional<double> median_of(const std::vector<RunRecord>& runs, std::string_view metric,
                                std::size_t max_action, std::size_t depth,
                                std::string_view variant) {
    std::vector<double> vals;
    for (const auto& r : runs) {
        if (r.max_action != max_action || r.depth != depth || r.variant != variant) continue;
        if (!r.converged || r.diverged) continue;
        const auto it = r.metrics.find(std::string(metric));
        if (it != r.metrics.end()) vals.push_back(it->second);
    }
    if (vals.empty()) return std::nullopt;
    return median(vals);
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) {
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

RunRecord train_and_measure(const Dataset& data, const TrainConfig& train_cfg,
                            const AnalyzeOptions& analyze_options, bool keep_embedding,
                            Matrix* hidden_out) {
    RunRecord rec;
    rec.depth = train_cfg.depth;
    rec.seed = train_cfg.seed;
    TrainResult result;
    try {
        result = train(data, train_cfg);
    } catch (const DivergenceError& e) {
        rec.diverged = true;
        rec.steps_taken = e.step();
        rec.error = e.what();
        return rec;
    }
    rec.final_loss = result.trace.final_loss();
    rec.steps_taken = result.trace.steps_taken;
    rec.converged = result.trace.converged;
    try {
        const MetricsReport rep = analyze(result.params, data, analyze_options);
        rec.metrics = rep.scalars;
        if (keep_embedding || hidden_out) {
            Matrix hidden = hidden_representation(result.params, data.x);
            if (keep_embedding) {
                rec.embedding = pca(hidden, std::min<std::size_t>(2, hidden.cols())).projections;
                rec.embedding_color = data.target_states().col(0);
                rec.spectra = rep.spectra;
            }
            if (hidden_out) *hidden_out = std::move(hidden);
        }
    } catch (const DegenerateError& e) {
        rec.error = e.what();
    }
    return rec;
}

namespace {

AnalyzeOptions analyze_options(const ExperimentConfig& c) {
    AnalyzeOptions o;
    o.restrict_small_actions = c.restrict_small_actions;
    o.var_threshold = c.var_threshold;
    return o;
}

/// Shared A x L x seed loop; make_data(A) builds the dataset for a horizon.
std::vector<RunRecord> grid(const ExperimentConfig& config,
                            const std::function<Dataset(std::size_t)>& make_data) {
    struct Job {
        std::size_t a_index, depth, seed_index;
    };
    std::vector<Dataset> datasets;
    for (std::size_t a : config.actions) datasets.push_back(make_data(a));
    std::vector<Job> jobs;
    for (std::size_t ai = 0; ai < config.actions.size(); ++ai)
        for (std::size_t l : config.depths)
            for (std::size_t i = 0; i < config.seeds; ++i) jobs.push_back({ai, l, i});

    std::vector<RunRecord> out(jobs.size());
    parallel_for(jobs.size(), config.workers, [&](std::size_t j) {
        const Job& job = jobs[j];
        TrainConfig tc = config.train;
        tc.depth = job.depth;
        tc.seed = config.base_seed + job.seed_index;
        RunRecord rec = train_and_measure(datasets[job.a_index], tc, analyze_options(config),
                                          job.seed_index == 0);
        rec.experiment = std::string(to_string(config.kind));
        rec.states = config.states;
        rec.max_action = config.actions[job.a_index];
        out[j] = std::move(rec);
    });
    return out;
}

}  // namespace

std::vector<RunRecord> sweep_grid(const ExperimentConfig& config) {
    config.validate();
    return grid(config, [&](std::size_t a) { return gen_onehot_1d(config.states, a); });
}

std::vector<RunRecord> s1_2d(const ExperimentConfig& config) {
    config.validate();
    return grid(config, [&](std::size_t a) { return gen_onehot_2d(config.states, a); });
}

std::optional<std::size_t> first_below(const std::vector<std::size_t>& actions,
                                       const std::vector<double>& medians, double bound) {
    if (actions.size() != medians.size()) throw ShapeError("first_below: length mismatch");
    for (std::size_t i = 0; i < actions.size(); ++i)
        if (medians[i] < bound) return actions[i];
    return std::nullopt;
}

AThreshResult a_thresh(std::size_t states, const ExperimentConfig& config) {
    if (states < 4) throw ValueError("a_thresh: S must be >= 4");
    AThreshResult res;
    res.states = states;
    const std::size_t a_max = (states + 1) / 2 + 1;
    for (std::size_t a = 1; a <= a_max; ++a) {
        const Dataset data = gen_onehot_1d(states, a);
        std::vector<RunRecord> runs(config.seeds);
        parallel_for(config.seeds, config.workers, [&](std::size_t i) {
            TrainConfig tc = config.train;
            tc.depth = config.depths.front();
            tc.seed = config.base_seed + i;
            AnalyzeOptions opts = analyze_options(config);
            RunRecord rec = train_and_measure(data, tc, opts, false);
            rec.experiment = std::string(to_string(ExperimentKind::s2_scaling));
            rec.states = states;
            rec.max_action = a;
            runs[i] = std::move(rec);
        });
        std::vector<double> prs;
        std::size_t diverged = 0;
        for (const auto& r : runs) {
            diverged += r.diverged;
            const auto it = r.metrics.find("participation_ratio");
            if (r.converged && it != r.metrics.end()) prs.push_back(it->second);
        }
        if (diverged == runs.size())
            throw Error("a_thresh: every run diverged at S=" + std::to_string(states) +
                        " A=" + std::to_string(a));
        res.actions.push_back(a);
        res.medians.push_back(prs.empty() ? std::numeric_limits<double>::quiet_NaN() : median(prs));
        res.pr_values.push_back(std::move(prs));
        res.runs.insert(res.runs.end(), runs.begin(), runs.end());
        if (!res.threshold && res.medians.back() < config.pr_threshold) {
            res.threshold = a;
            if (!config.full_scan) break;
        }
    }
    return res;
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ValueError("linear_fit: need >= 2 paired points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw ValueError("linear_fit: x values are all equal");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - (f.intercept + f.slope * x[i]);
        ss_res += e * e;
    }
    f.r2 = syy == 0.0 ? (ss_res == 0.0 ? 1.0 : 0.0) : std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
    return f;
}

ScalingResult s_scaling(const ExperimentConfig& config) {
    config.validate();
    ScalingResult out;
    out.states = config.states_list;
    for (std::size_t s : config.states_list) {
        AThreshResult scan = a_thresh(s, config);

        Rng rng(derive_seed(config.base_seed, 0xB0075700 + s));
        std::vector<double> boot(config.bootstrap_n);
        std::vector<double> medians(scan.actions.size());
        for (double& b : boot) {
            for (std::size_t k = 0; k < scan.actions.size(); ++k) {
                const auto& vals = scan.pr_values[k];
                if (vals.empty()) {
                    medians[k] = std::numeric_limits<double>::quiet_NaN();
                    continue;
                }
                std::vector<double> draw(vals.size());
                for (double& v : draw) v = vals[rng.below(vals.size())];
                medians[k] = median(std::move(draw));
            }
            const auto t = first_below(scan.actions, medians, config.pr_threshold);
            b = static_cast<double>(t ? *t : scan.actions.back() + 1);
        }
        out.bootstrap_mean.push_back(std::accumulate(boot.begin(), boot.end(), 0.0) /
                                     static_cast<double>(boot.size()));
        out.bootstrap_std.push_back(sample_stddev(boot));
        out.thresholds.push_back(scan.threshold ? static_cast<double>(*scan.threshold)
                                                : std::numeric_limits<double>::quiet_NaN());
        out.scans.push_back(std::move(scan));
    }
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < out.states.size(); ++i) {
        if (std::isnan(out.thresholds[i])) continue;
        xs.push_back(static_cast<double>(out.states[i]));
        ys.push_back(out.thresholds[i]);
    }
    out.all_found = xs.size() == out.states.size();
    if (xs.size() >= 2) out.fit = linear_fit(xs, ys);
    return out;
}

TwoEnvResult two_env_experiment(const ExperimentConfig& config) {
    config.validate();
    TwoEnvResult out;
    out.runs = grid(config, [&](std::size_t a) { return gen_two_envs(config.states, a); });
    for (std::size_t a : config.actions) {
        const Dataset data = gen_two_envs(config.states, a);
        const SvdResult d = svd(ols_estimator(data));
        Matrix top2(d.u.rows(), 2);
        for (std::size_t i = 0; i < d.u.rows(); ++i)
            for (std::size_t k = 0; k < 2; ++k) top2(i, k) = d.u(i, k);
        out.ols_projections[a] = matmul(data.x, top2);
        std::vector<int> ids;
        for (const auto& m : data.metas) ids.push_back(m.env_id);
        out.env_ids[a] = std::move(ids);
    }
    return out;
}

Matrix sorted_distance_matrix(const Matrix& h, const std::vector<double>& key) {
    if (key.size() != h.rows()) throw ShapeError("sorted_distance_matrix: key length mismatch");
    std::vector<std::size_t> order(h.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
    const Matrix sorted = h.select_rows(order);
    const std::size_t m = sorted.rows();
    Matrix d(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            double ss = 0.0;
            for (std::size_t k = 0; k < sorted.cols(); ++k) {
                const double diff = sorted(i, k) - sorted(j, k);
                ss += diff * diff;
            }
            d(i, j) = d(j, i) = std::sqrt(ss);
        }
    }
    return d;
}

namespace {

std::string sigma_tag(double sigma) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "sigma=%g", sigma);
    return buf;
}

}  // namespace

PiecewiseResult piecewise_experiment(const ExperimentConfig& config) {
    config.validate();
    PiecewiseResult out;
    const std::size_t n_jobs = config.sigmas.size() * config.seeds;
    out.runs.resize(n_jobs);
    std::vector<Matrix> first_hidden(config.sigmas.size());
    std::vector<std::vector<double>> first_states(config.sigmas.size());
    parallel_for(n_jobs, config.workers, [&](std::size_t j) {
        const std::size_t si = j / config.seeds, i = j % config.seeds;
        const double sigma = config.sigmas[si];
        const std::uint64_t seed = config.base_seed + i;
        const Dataset data =
            gen_piecewise(config.n_samples, sigma, config.d_obs, config.n_breaks, seed);
        TrainConfig tc = config.train;
        tc.depth = config.depths.front();
        tc.seed = seed;
        RunRecord rec = train_and_measure(data, tc, analyze_options(config), i == 0,
                                          i == 0 ? &first_hidden[si] : nullptr);
        rec.experiment = std::string(to_string(ExperimentKind::fig5_piecewise));
        rec.variant = sigma_tag(sigma);
        rec.states = config.n_samples;
        if (i == 0) first_states[si] = data.input_states().col(0);
        out.runs[j] = std::move(rec);
    });
    for (std::size_t si = 0; si < config.sigmas.size(); ++si)
        if (!first_hidden[si].empty())
            out.distance_matrices[config.sigmas[si]] =
                sorted_distance_matrix(first_hidden[si], first_states[si]);
    return out;
}

SpectraResult fig3_spectra(const ExperimentConfig& config) {
    config.validate();
    SpectraResult out;
    out.runs = grid(config, [&](std::size_t a) { return gen_onehot_1d(config.states, a); });
    for (std::size_t a : config.actions)
        out.ols_spectrum[a] = svd(ols_estimator(gen_onehot_1d(config.states, a))).singular_values;
    for (const auto& r : out.runs) {
        const auto it = r.spectra.find("weight_singular_values");
        if (r.depth == config.depths.back() && r.seed == config.base_seed && it != r.spectra.end())
            out.weight_spectrum[r.max_action] = it->second;
    }
    return out;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string runs_to_csv(const std::vector<RunRecord>& runs) {
    std::ostringstream os;
    os << "experiment,variant,S,A,L,seed,metric,value\n";
    for (const auto& r : runs) {
        std::map<std::string, double> all = r.metrics;
        all["final_loss"] = r.final_loss;
        all["steps_taken"] = static_cast<double>(r.steps_taken);
        all["converged"] = r.converged ? 1.0 : 0.0;
        all["diverged"] = r.diverged ? 1.0 : 0.0;
        for (const auto& [name, v] : all) {
            os << r.experiment << ',' << r.variant << ',' << r.states << ',' << r.max_action << ','
               << r.depth << ',' << r.seed << ',' << name << ',' << format_double(v) << '\n';
        }
    }
    return os.str();
}

std::string aggregates_to_csv(const std::vector<Aggregate>& aggs) {
    std::ostringstream os;
    os << "experiment,variant,S,A,L,metric,median,std,n_used,n_total\n";
    for (const auto& a : aggs) {
        os << a.experiment << ',' << a.variant << ',' << a.states << ',' << a.max_action << ','
           << a.depth << ',' << a.metric << ',' << format_double(a.median) << ','
           << format_double(a.stddev) << ',' << a.n_used << ',' << a.n_total << '\n';
    }
    return os.str();
}

std::string scaling_to_csv(const ScalingResult& r) {
    std::ostringstream os;
    os << "S,threshold,bootstrap_mean,bootstrap_std,fit_slope,fit_intercept,fit_r2\n";
    for (std::size_t i = 0; i < r.states.size(); ++i) {
        os << r.states[i] << ',' << format_double(r.thresholds[i]) << ','
           << format_double(r.bootstrap_mean[i]) << ',' << format_double(r.bootstrap_std[i]) << ','
           << format_double(r.fit.slope) << ',' << format_double(r.fit.intercept) << ','
           << format_double(r.fit.r2) << '\n';
    }
    return os.str();
}

}  // namespace pclab
