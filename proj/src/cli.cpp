#include "pclab/cli.hpp"

#include "pclab/errors.hpp"
#include "pclab/io.hpp"
#include "pclab/svg.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <set>
#include <ostream>
#include <thread>

namespace pclab::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::string> overrides;
    bool no_timestamp = false;
};

/// Collects artifacts and writes the manifest last.
class Output {
public:
    Output(std::string command, std::vector<std::string> argv, const std::string& dir)
        : command_(std::move(command)), argv_(std::move(argv)), dir_(dir),
          start_(std::chrono::steady_clock::now()) {
        if (dir_.empty()) throw ConfigError("out", "an output directory is required");
        fs::create_directories(dir_);
    }

    void write(const std::string& name, const std::string& content) {
        write_text_file(dir_ / name, content);
        artifacts_.push_back(name);
    }

    json& extra() { return extra_; }

    void manifest(const json& config, std::optional<std::uint64_t> seed, const json& inputs,
                  bool complete, const std::string& error) {
        json m;
        m["schema_version"] = kSchemaVersion;
        m["type"] = "manifest";
        m["tool"] = kToolName;
        m["version"] = kVersion;
        m["command"] = command_;
        m["argv"] = argv_;
        m["inputs"] = inputs;
        m["config"] = config;
        m["seed"] = seed ? json(*seed) : json(nullptr);
        m["artifacts"] = artifacts_;
        m["wall_clock_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        m["complete"] = complete;
        m["error"] = error.empty() ? json(nullptr) : json(error);
        for (auto it = extra_.begin(); it != extra_.end(); ++it) m[it.key()] = it.value();
        write_text_file(dir_ / "manifest.json", dump_json(m));
    }

private:
    std::string command_;
    std::vector<std::string> argv_;
    fs::path dir_;
    std::chrono::steady_clock::time_point start_;
    std::vector<std::string> artifacts_;
    json extra_ = json::object();
};

bool is_manifest(const json& j) {
    return j.is_object() && j.contains("type") && j["type"] == "manifest";
}

/// Loads --config; a manifest contributes its resolved config and inputs.
json load_config(const std::string& path, json* inputs = nullptr) {
    if (path.empty()) return json::object();
    json j = read_json_file(path);
    if (is_manifest(j)) {
        if (inputs && j.contains("inputs") && j["inputs"].is_object()) *inputs = j["inputs"];
        if (!j.contains("config")) throw ConfigError("config", "manifest has no config");
        return j["config"];
    }
    return j;
}

void apply_overrides(json& cfg, const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) apply_override(cfg, o);
}

std::string input_path(const std::string& flag, const json& inputs, const char* key) {
    if (!flag.empty()) return flag;
    if (inputs.contains(key) && inputs[key].is_string()) return inputs[key].get<std::string>();
    throw ConfigError(key, "input file is required");
}

template <class F>
auto load_input(const std::string& path, const char* what, F parse) {
    try {
        return parse(read_json_file(path));
    } catch (const ConfigError& e) {
        throw ConfigError(e.field(), std::string(what) + " '" + path + "': " + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("", std::string(what) + " '" + path + "': " + e.what());
    }
}

// --- gen -------------------------------------------------------------------

void cmd_gen(const Common& c, Output& out, json& resolved, std::optional<std::uint64_t>& seed) {
    if (c.config_path.empty() && c.overrides.empty())
        throw ConfigError("config", "a generator config is required");
    json cfg = load_config(c.config_path);
    apply_overrides(cfg, c.overrides);
    if (c.seed) cfg["seed"] = *c.seed;
    const GeneratorSpec spec = generator_spec_from_json(cfg);
    resolved = to_json(spec);
    seed = spec.seed;
    const Dataset data = generate(spec);
    out.write("dataset.json", dump_json(to_json(data)));
    out.write("samples.csv", metas_to_csv(data));
}

// --- train -----------------------------------------------------------------

void cmd_train(const Common& c, const std::string& dataset_flag, Output& out, json& resolved,
               json& inputs, std::optional<std::uint64_t>& seed) {
    json cfg = load_config(c.config_path, &inputs);
    const std::string dataset_path = input_path(dataset_flag, inputs, "dataset");
    inputs = json::object();
    inputs["dataset"] = dataset_path;
    const Dataset data = load_input(dataset_path, "dataset", dataset_from_json);
    apply_overrides(cfg, c.overrides);
    if (c.seed) cfg["seed"] = *c.seed;
    if (!data.is_discrete() && !cfg.contains("loss")) cfg["loss"] = "mse";
    const TrainConfig tc = train_config_from_json(cfg);
    resolved = to_json(tc);
    seed = tc.seed;
    const TrainResult r = train(data, tc);
    out.write("params.json", dump_json(to_json(r.params)));
    out.write("trace.csv", trace_to_csv(r.trace));
    out.extra()["trace"] = to_json(r.trace);
}

// --- analyze ---------------------------------------------------------------

void cmd_analyze(const Common& c, const std::string& dataset_flag, const std::string& params_flag,
                 Output& out, json& resolved, json& inputs) {
    json cfg = load_config(c.config_path, &inputs);
    const std::string dataset_path = input_path(dataset_flag, inputs, "dataset");
    const std::string params_path = input_path(params_flag, inputs, "params");
    inputs = json::object();
    inputs["dataset"] = dataset_path;
    inputs["params"] = params_path;
    apply_overrides(cfg, c.overrides);
    AnalyzeOptions opts;
    {
        const std::set<std::string> known = {"restrict_small_actions", "var_threshold"};
        for (auto it = cfg.begin(); it != cfg.end(); ++it)
            if (!known.count(it.key())) throw ConfigError(it.key(), "unknown field");
        if (cfg.contains("restrict_small_actions")) {
            if (!cfg["restrict_small_actions"].is_boolean())
                throw ConfigError("restrict_small_actions", "expected true or false");
            opts.restrict_small_actions = cfg["restrict_small_actions"].get<bool>();
        }
        if (cfg.contains("var_threshold")) {
            if (!cfg["var_threshold"].is_number())
                throw ConfigError("var_threshold", "expected a number");
            opts.var_threshold = cfg["var_threshold"].get<double>();
            if (!(opts.var_threshold > 0.0 && opts.var_threshold <= 1.0))
                throw ConfigError("var_threshold", "must be in (0, 1]");
        }
    }
    resolved = json::object();
    resolved["restrict_small_actions"] = opts.restrict_small_actions;
    resolved["var_threshold"] = opts.var_threshold;

    const Dataset data = load_input(dataset_path, "dataset", dataset_from_json);
    const NetworkParams params = load_input(params_path, "params", params_from_json);
    if (params.d_in() != data.x.cols() || params.d_out() != data.y.cols())
        throw ConfigError("params", "network maps " + std::to_string(params.d_in()) + " -> " +
                                        std::to_string(params.d_out()) + " but the dataset is " +
                                        std::to_string(data.x.cols()) + " -> " +
                                        std::to_string(data.y.cols()));
    const MetricsReport report = analyze(params, data, opts);
    out.write("metrics.json", dump_json(to_json(report)));
    out.write("metrics.csv", metrics_to_csv(report));
}

// --- experiment --------------------------------------------------------------

std::string number_tag(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

svg::Style style(const Common& c, std::string title, std::string x = {}, std::string y = {}) {
    svg::Style s;
    s.title = std::move(title);
    s.x_label = std::move(x);
    s.y_label = std::move(y);
    s.timestamp = !c.no_timestamp;
    return s;
}

void write_embedding(const Common& c, Output& out, const std::string& name, const RunRecord& r,
                     const std::string& title) {
    if (r.embedding.empty()) return;
    std::vector<double> x = r.embedding.col(0);
    std::vector<double> y = r.embedding.cols() > 1 ? r.embedding.col(1) : std::vector<double>(x.size(), 0.0);
    out.write(name, svg::scatter(x, y, r.embedding_color, style(c, title, "PC1", "PC2")));
}

void write_runs(Output& out, const std::vector<RunRecord>& runs) {
    out.write("runs.csv", runs_to_csv(runs));
    out.write("summary.csv", aggregates_to_csv(aggregate(runs)));
    json bad = json::array();
    for (const auto& r : runs) {
        if (r.converged && !r.diverged) continue;
        json e;
        e["variant"] = r.variant;
        e["S"] = r.states;
        e["A"] = r.max_action;
        e["L"] = r.depth;
        e["seed"] = r.seed;
        e["diverged"] = r.diverged;
        e["error"] = r.error;
        bad.push_back(std::move(e));
    }
    out.extra()["non_converged"] = std::move(bad);
}

void grid_outputs(const Common& c, Output& out, const std::vector<RunRecord>& runs,
                  const ExperimentConfig& cfg) {
    write_runs(out, runs);
    for (const auto& r : runs)
        write_embedding(c, out,
                        "embedding_A" + std::to_string(r.max_action) + "_L" + std::to_string(r.depth) + ".svg",
                        r, "A=" + std::to_string(r.max_action) + " L=" + std::to_string(r.depth));
    for (const char* metric : {"pc1_order_r2", "nc1", "normalized_margin"}) {
        std::vector<svg::BarGroup> groups;
        std::vector<std::string> names;
        for (std::size_t l : cfg.depths) names.push_back("L=" + std::to_string(l));
        for (std::size_t a : cfg.actions) {
            svg::BarGroup g{"A=" + std::to_string(a), {}};
            for (std::size_t l : cfg.depths)
                g.values.push_back(median_of(runs, metric, a, l).value_or(std::nan("")));
            groups.push_back(std::move(g));
        }
        out.write(std::string("median_") + metric + ".svg",
                  svg::grouped_bars(groups, names, style(c, metric)));
    }
}

void spectra_outputs(const Common& c, Output& out, const SpectraResult& r) {
    write_runs(out, r.runs);
    std::string csv = "A,source,index,value\n";
    for (const auto& [a, values] : r.ols_spectrum)
        for (std::size_t i = 0; i < values.size(); ++i)
            csv += std::to_string(a) + ",ols," + std::to_string(i) + ',' + format_double(values[i]) + '\n';
    for (const auto& [a, values] : r.weight_spectrum)
        for (std::size_t i = 0; i < values.size(); ++i)
            csv += std::to_string(a) + ",weights," + std::to_string(i) + ',' + format_double(values[i]) + '\n';
    out.write("spectra.csv", csv);
    for (const auto& [a, ols] : r.ols_spectrum) {
        const auto w = r.weight_spectrum.find(a);
        const double ols_top = ols.empty() || ols[0] == 0.0 ? 1.0 : ols[0];
        const double w_top = w == r.weight_spectrum.end() || w->second.empty() || w->second[0] == 0.0
                                 ? 1.0
                                 : w->second[0];
        std::vector<svg::BarGroup> groups;
        const std::size_t k = std::min<std::size_t>(ols.size(), 20);
        for (std::size_t i = 0; i < k; ++i) {
            svg::BarGroup g{std::to_string(i + 1), {ols[i] / ols_top}};
            g.values.push_back(w != r.weight_spectrum.end() && i < w->second.size() ? w->second[i] / w_top
                                                                                    : std::nan(""));
            groups.push_back(std::move(g));
        }
        out.write("spectrum_A" + std::to_string(a) + ".svg",
                  svg::grouped_bars(groups, {"OLS", "W_eff"},
                                    style(c, "normalized singular values, A=" + std::to_string(a))));
    }
}

void twoenv_outputs(const Common& c, Output& out, const TwoEnvResult& r, const ExperimentConfig& cfg) {
    write_runs(out, r.runs);
    for (const auto& run : r.runs) {
        if (run.embedding.empty()) continue;
        std::string name = run.max_action == cfg.actions.front() ? "single_step" : "multi_step";
        if (cfg.depths.size() > 1) name += "_L" + std::to_string(run.depth);
        write_embedding(c, out, "embedding_" + name + ".svg", run,
                        name + " A=" + std::to_string(run.max_action));
    }
    for (const auto& [a, proj] : r.ols_projections) {
        std::string csv = "row,env_id,u1,u2\n";
        const auto& ids = r.env_ids.at(a);
        for (std::size_t i = 0; i < proj.rows(); ++i)
            csv += std::to_string(i) + ',' + std::to_string(ids[i]) + ',' + format_double(proj(i, 0)) + ',' +
                   format_double(proj(i, 1)) + '\n';
        out.write("ols_projection_A" + std::to_string(a) + ".csv", csv);
    }
}

void piecewise_outputs(const Common& c, Output& out, const PiecewiseResult& r) {
    write_runs(out, r.runs);
    for (const auto& run : r.runs) {
        if (run.embedding.empty()) continue;
        write_embedding(c, out, "embedding_" + run.variant + ".svg", run, run.variant);
    }
    for (const auto& [sigma, d] : r.distance_matrices) {
        const std::string tag = "sigma=" + number_tag(sigma);
        out.write("distance_" + tag + ".svg", svg::heatmap(d, style(c, "hidden distances, " + tag)));
    }
}

void scaling_outputs(const Common& c, Output& out, const ScalingResult& r) {
    std::vector<RunRecord> runs;
    for (const auto& scan : r.scans) runs.insert(runs.end(), scan.runs.begin(), scan.runs.end());
    write_runs(out, runs);
    out.write("scaling.csv", scaling_to_csv(r));
    svg::Series s{"A_thresh", {}, {}, {}};
    for (std::size_t i = 0; i < r.states.size(); ++i) {
        s.x.push_back(static_cast<double>(r.states[i]));
        s.y.push_back(r.thresholds[i]);
        s.err.push_back(r.bootstrap_std[i]);
    }
    out.write("scaling.svg", svg::line_chart({s}, style(c, "A_thresh vs S", "S", "A_thresh"),
                                             &r.fit.slope, &r.fit.intercept));
    out.extra()["fit"] = {{"slope", r.fit.slope}, {"intercept", r.fit.intercept}, {"r2", r.fit.r2},
                          {"all_found", r.all_found}};
}

void cmd_experiment(const Common& c, const std::string& kind_name, Output& out, json& resolved,
                    std::optional<std::uint64_t>& seed) {
    ExperimentKind kind;
    try {
        kind = parse_experiment_kind(kind_name);
    } catch (const ValueError& e) {
        throw ConfigError("kind", e.what());
    }
    json cfg = load_config(c.config_path);
    if (!cfg.is_object()) throw ConfigError("config", "expected a JSON object");
    if (cfg.contains("kind") && cfg["kind"] != kind_name)
        throw ConfigError("kind", "config is for '" + cfg["kind"].dump() + "', command asks for '" +
                                      kind_name + "'");
    cfg["kind"] = kind_name;
    apply_overrides(cfg, c.overrides);
    if (c.seed) cfg["base_seed"] = *c.seed;
    ExperimentConfig ec = experiment_config_from_json(cfg);
    ec.workers = c.workers;
    resolved = to_json(ec);
    seed = ec.base_seed;
    out.extra()["workers"] = ec.workers;

    switch (kind) {
        case ExperimentKind::fig2_grid: grid_outputs(c, out, sweep_grid(ec), ec); break;
        case ExperimentKind::s1_2d: grid_outputs(c, out, s1_2d(ec), ec); break;
        case ExperimentKind::fig3_spectra: spectra_outputs(c, out, fig3_spectra(ec)); break;
        case ExperimentKind::fig4_twoenv: twoenv_outputs(c, out, two_env_experiment(ec), ec); break;
        case ExperimentKind::fig5_piecewise: piecewise_outputs(c, out, piecewise_experiment(ec)); break;
        case ExperimentKind::s2_scaling: scaling_outputs(c, out, s_scaling(ec)); break;
    }
}

void add_common(CLI::App* sub, Common& c, bool needs_config) {
    auto* opt = sub->add_option("--config", c.config_path, "JSON config or a manifest from an earlier run");
    if (needs_config) opt->check(CLI::ExistingFile);
    sub->add_option("--out", c.out_dir, "output directory")->required();
    sub->add_option("--seed", c.seed, "top-level seed (overrides the config)");
    sub->add_option("--workers", c.workers, "parallel workers")->check(CLI::PositiveNumber);
    sub->add_option("--set", c.overrides, "override a config field, key=value (repeatable)");
    sub->add_flag("--no-timestamp", c.no_timestamp, "omit the timestamp comment from SVG files");
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const DivergenceError*>(&e)) return kExitDivergence;
    if (dynamic_cast<const ValueError*>(&e) || dynamic_cast<const ShapeError*>(&e) ||
        dynamic_cast<const nlohmann::json::exception*>(&e) ||
        dynamic_cast<const fs::filesystem_error*>(&e))
        return kExitConfig;
    return kExitFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Predictive-coding representation laboratory", kToolName};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    Common common;
    std::string dataset_path, params_path, kind;

    auto* gen = app.add_subcommand("gen", "generate a dataset");
    add_common(gen, common, false);

    auto* tr = app.add_subcommand("train", "train a network on a dataset");
    add_common(tr, common, false);
    tr->add_option("--dataset", dataset_path, "dataset JSON");

    auto* an = app.add_subcommand("analyze", "measure a trained network");
    add_common(an, common, false);
    an->add_option("--dataset", dataset_path, "dataset JSON");
    an->add_option("--params", params_path, "network params JSON");

    auto* ex = app.add_subcommand("experiment", "run a figure-level experiment");
    add_common(ex, common, false);
    ex->add_option("kind", kind, "fig2_grid | fig3_spectra | fig4_twoenv | fig5_piecewise | s1_2d | s2_scaling")
        ->required();

    std::vector<const char*> argv{kToolName};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    std::string command = gen->parsed() ? "gen" : tr->parsed() ? "train" : an->parsed() ? "analyze" : "experiment";
    std::optional<Output> output;
    json resolved = json::object();
    json inputs = json::object();
    std::optional<std::uint64_t> seed;
    try {
        output.emplace(command, args, common.out_dir);
        if (gen->parsed()) cmd_gen(common, *output, resolved, seed);
        else if (tr->parsed()) cmd_train(common, dataset_path, *output, resolved, inputs, seed);
        else if (an->parsed()) cmd_analyze(common, dataset_path, params_path, *output, resolved, inputs);
        else cmd_experiment(common, kind, *output, resolved, seed);
        output->manifest(resolved, seed, inputs, true, "");
        out << command << ": wrote " << common.out_dir << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        err << kToolName << ' ' << command << ": error: " << e.what() << '\n';
        if (output) {
            try {
                output->manifest(resolved, seed, inputs, false, e.what());
            } catch (const std::exception& e2) {
                err << kToolName << ": could not write manifest: " << e2.what() << '\n';
            }
        }
        return exit_code_for(e);
    }
}

}  // namespace pclab::cli
