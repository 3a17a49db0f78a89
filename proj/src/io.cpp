#include "pclab/io.hpp"

#include "pclab/errors.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace pclab {

namespace {

std::string join_path(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

/// Strict reader over one JSON object: every key must be consumed.
class Fields {
public:
    Fields(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
        if (!j.is_object()) throw ConfigError(prefix_, "expected a JSON object");
    }

    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) throw ConfigError(path(key), "missing required field");
        return j_.at(key);
    }

    std::size_t count(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_number_integer() || v.get<long long>() < 0)
            throw ConfigError(path(key), "expected a nonnegative integer");
        return v.get<std::size_t>();
    }
    std::size_t count(const std::string& key, std::size_t fallback) {
        return optional(key) ? count(key) : fallback;
    }

    std::uint64_t u64(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
            throw ConfigError(path(key), "expected a nonnegative integer");
        return v.get<std::uint64_t>();
    }
    std::uint64_t u64(const std::string& key, std::uint64_t fallback) {
        return optional(key) ? u64(key) : fallback;
    }

    double real(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_number()) throw ConfigError(path(key), "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ConfigError(path(key), "expected a finite number");
        return d;
    }
    double real(const std::string& key, double fallback) {
        return optional(key) ? real(key) : fallback;
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!optional(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_boolean()) throw ConfigError(path(key), "expected true or false");
        return v.get<bool>();
    }

    std::string text(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_string()) throw ConfigError(path(key), "expected a string");
        return v.get<std::string>();
    }

    std::vector<std::size_t> counts(const std::string& key, std::vector<std::size_t> fallback) {
        if (!optional(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_array()) throw ConfigError(path(key), "expected an array of integers");
        std::vector<std::size_t> out;
        for (const auto& e : v) {
            if (!e.is_number_integer() || e.get<long long>() < 0)
                throw ConfigError(path(key), "expected an array of nonnegative integers");
            out.push_back(e.get<std::size_t>());
        }
        return out;
    }

    std::vector<double> reals(const std::string& key, std::vector<double> fallback) {
        if (!optional(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_array()) throw ConfigError(path(key), "expected an array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) throw ConfigError(path(key), "expected an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    /// Marks an optional key as consumed; true if present and not null.
    bool optional(const std::string& key) {
        seen_.insert(key);
        return has(key);
    }

    std::string path(const std::string& key) const { return join_path(prefix_, key); }

    /// Throws on any key that was never read.
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(path(it.key()), "unknown field");
    }

private:
    const json& j_;
    std::string prefix_;
    std::set<std::string> seen_;
};

void expect_document(Fields& f, const char* type) {
    if (f.has("schema_version")) {
        const std::size_t v = f.count("schema_version");
        if (v != static_cast<std::size_t>(kSchemaVersion))
            throw ConfigError(f.path("schema_version"),
                              "unsupported version " + std::to_string(v));
    } else {
        f.optional("schema_version");
    }
    if (f.has("type")) {
        const std::string t = f.text("type");
        if (t != type) throw ConfigError(f.path("type"), "expected '" + std::string(type) + "', got '" + t + "'");
    } else {
        f.optional("type");
    }
}

json header(const char* type) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["type"] = type;
    return j;
}

template <class E, class Parse>
E parse_enum(Fields& f, const std::string& key, E fallback, Parse parse) {
    if (!f.optional(key)) return fallback;
    const std::string name = f.text(key);
    try {
        return parse(name);
    } catch (const ValueError& e) {
        throw ConfigError(f.path(key), e.what());
    }
}

std::vector<double> real_vector(const json& j, const std::string& field) {
    if (!j.is_array()) throw ConfigError(field, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : j) {
        if (!e.is_number()) throw ConfigError(field, "expected an array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

}  // namespace

json matrix_to_json(const Matrix& m) {
    json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    j["data"] = std::vector<double>(m.data().begin(), m.data().end());
    return j;
}

Matrix matrix_from_json(const json& j, const std::string& field) {
    Fields f(j, field);
    const std::size_t rows = f.count("rows");
    const std::size_t cols = f.count("cols");
    std::vector<double> data = real_vector(f.raw("data"), f.path("data"));
    f.finish();
    if (data.size() != rows * cols)
        throw ConfigError(f.path("data"), "expected " + std::to_string(rows * cols) +
                                              " values, got " + std::to_string(data.size()));
    try {
        return Matrix(rows, cols, std::move(data));
    } catch (const Error& e) {
        throw ConfigError(field, e.what());
    }
}

json to_json(const GeneratorSpec& spec) {
    json j;
    j["kind"] = std::string(to_string(spec.kind));
    if (spec.kind == TaskKind::piecewise) {
        j["n_samples"] = spec.n_samples;
        j["action_sigma"] = spec.action_sigma;
        j["d_obs"] = spec.d_obs;
        j["n_breaks"] = spec.n_breaks;
        j["seed"] = spec.seed;
    } else {
        j["states"] = spec.states;
        j["max_action"] = spec.max_action;
    }
    return j;
}

GeneratorSpec generator_spec_from_json(const json& j) {
    Fields f(j, "");
    GeneratorSpec spec;
    spec.kind = parse_enum(f, "kind", TaskKind::onehot_1d, parse_task_kind);
    if (!f.has("kind")) f.raw("kind");
    f.optional("env_count");
    if (spec.kind == TaskKind::piecewise) {
        spec.n_samples = f.count("n_samples");
        spec.action_sigma = f.real("action_sigma");
        spec.d_obs = f.count("d_obs", 8);
        spec.n_breaks = f.count("n_breaks", 3);
        spec.seed = f.u64("seed", 0);
    } else {
        spec.states = f.count("states");
        spec.max_action = f.count("max_action");
        f.optional("seed");
    }
    spec.env_count = spec.kind == TaskKind::two_envs ? 2 : 1;
    f.finish();
    return spec;
}

json to_json(const Dataset& data) {
    json j = header("dataset");
    j["spec"] = to_json(data.spec);
    j["x"] = matrix_to_json(data.x);
    j["y"] = matrix_to_json(data.y);
    j["labels"] = data.labels;
    json metas = json::array();
    for (const auto& m : data.metas) {
        json e;
        e["state"] = m.state;
        e["action"] = m.action;
        e["target_state"] = m.target_state;
        e["env_id"] = m.env_id;
        e["class_label"] = m.class_label ? json(*m.class_label) : json(nullptr);
        metas.push_back(std::move(e));
    }
    j["metas"] = std::move(metas);
    return j;
}

Dataset dataset_from_json(const json& j) {
    Fields f(j, "");
    expect_document(f, "dataset");
    Dataset d;
    d.spec = generator_spec_from_json(f.raw("spec"));
    d.x = matrix_from_json(f.raw("x"), "x");
    d.y = matrix_from_json(f.raw("y"), "y");
    if (d.x.rows() != d.y.rows()) throw ConfigError("y", "row count differs from x");
    const json& labels = f.raw("labels");
    if (!labels.is_array()) throw ConfigError("labels", "expected an array");
    for (const auto& l : labels) {
        if (!l.is_number_integer() || l.get<long long>() < 0 ||
            l.get<std::size_t>() >= d.y.cols())
            throw ConfigError("labels", "expected class indices below " + std::to_string(d.y.cols()));
        d.labels.push_back(l.get<std::size_t>());
    }
    if (!d.labels.empty() && d.labels.size() != d.x.rows())
        throw ConfigError("labels", "expected one label per row");
    const json& metas = f.raw("metas");
    if (!metas.is_array() || metas.size() != d.x.rows())
        throw ConfigError("metas", "expected one entry per row");
    for (std::size_t i = 0; i < metas.size(); ++i) {
        Fields m(metas[i], "metas[" + std::to_string(i) + "]");
        SampleMeta meta;
        meta.state = real_vector(m.raw("state"), m.path("state"));
        meta.action = real_vector(m.raw("action"), m.path("action"));
        meta.target_state = real_vector(m.raw("target_state"), m.path("target_state"));
        const json& env = m.raw("env_id");
        if (!env.is_number_integer()) throw ConfigError(m.path("env_id"), "expected an integer");
        meta.env_id = env.get<int>();
        if (m.optional("class_label")) meta.class_label = m.count("class_label");
        m.finish();
        d.metas.push_back(std::move(meta));
    }
    f.finish();
    return d;
}

json to_json(const NetworkParams& params) {
    json j = header("network_params");
    j["activation"] = std::string(to_string(params.activation));
    json layers = json::array();
    for (const auto& w : params.weights) layers.push_back(matrix_to_json(w));
    j["layers"] = std::move(layers);
    j["biases"] = params.biases;
    return j;
}

NetworkParams params_from_json(const json& j) {
    Fields f(j, "");
    expect_document(f, "network_params");
    NetworkParams p;
    p.activation = parse_enum(f, "activation", Activation::linear, parse_activation);
    const json& layers = f.raw("layers");
    if (!layers.is_array() || layers.empty()) throw ConfigError("layers", "expected a nonempty array");
    for (std::size_t l = 0; l < layers.size(); ++l)
        p.weights.push_back(matrix_from_json(layers[l], "layers[" + std::to_string(l) + "]"));
    if (f.optional("biases")) {
        const json& biases = f.raw("biases");
        if (!biases.is_array()) throw ConfigError("biases", "expected an array");
        for (std::size_t l = 0; l < biases.size(); ++l)
            p.biases.push_back(real_vector(biases[l], "biases[" + std::to_string(l) + "]"));
    }
    f.finish();
    try {
        p.validate();
    } catch (const Error& e) {
        throw ConfigError("layers", e.what());
    }
    return p;
}

json to_json(const TrainConfig& c) {
    json j;
    j["loss"] = std::string(to_string(c.loss));
    j["optimizer"] = std::string(to_string(c.optimizer));
    j["activation"] = std::string(to_string(c.activation));
    j["learning_rate"] = c.learning_rate ? json(*c.learning_rate) : json(nullptr);
    j["max_steps"] = c.max_steps;
    j["loss_floor"] = c.loss_floor;
    j["init_scale"] = c.init_scale;
    j["seed"] = c.seed;
    j["hidden_width"] = c.hidden_width;
    j["depth"] = c.depth;
    j["adam_beta1"] = c.adam_beta1;
    j["adam_beta2"] = c.adam_beta2;
    j["adam_epsilon"] = c.adam_epsilon;
    j["divergence_threshold"] = c.divergence_threshold;
    return j;
}

namespace {

TrainConfig train_config_from_fields(Fields& f, TrainConfig c) {
    c.loss = parse_enum(f, "loss", c.loss, parse_loss);
    c.optimizer = parse_enum(f, "optimizer", c.optimizer, parse_optimizer);
    c.activation = parse_enum(f, "activation", c.activation, parse_activation);
    if (f.optional("learning_rate")) c.learning_rate = f.real("learning_rate");
    c.max_steps = f.count("max_steps", c.max_steps);
    if (f.optional("loss_floor")) {
        // Accept a huge floor written as a string so "stop at once" stays expressible.
        const json& v = f.raw("loss_floor");
        if (v.is_string() && (v == "inf" || v == "infinity"))
            c.loss_floor = std::numeric_limits<double>::infinity();
        else
            c.loss_floor = f.real("loss_floor");
    }
    c.init_scale = f.real("init_scale", c.init_scale);
    c.seed = f.u64("seed", c.seed);
    c.hidden_width = f.count("hidden_width", c.hidden_width);
    c.depth = f.count("depth", c.depth);
    c.adam_beta1 = f.real("adam_beta1", c.adam_beta1);
    c.adam_beta2 = f.real("adam_beta2", c.adam_beta2);
    c.adam_epsilon = f.real("adam_epsilon", c.adam_epsilon);
    c.divergence_threshold = f.real("divergence_threshold", c.divergence_threshold);
    f.finish();
    try {
        c.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const ValueError& e) {
        throw ConfigError(f.path(""), e.what());
    }
    return c;
}

}  // namespace

TrainConfig train_config_from_json(const json& j) {
    Fields f(j, "");
    return train_config_from_fields(f, TrainConfig{});
}

json to_json(const TrainTrace& t) {
    json j;
    j["steps_taken"] = t.steps_taken;
    j["converged"] = t.converged;
    j["final_loss"] = t.final_loss();
    if (!t.accuracy_history.empty()) j["final_accuracy"] = t.final_accuracy();
    return j;
}

json to_json(const BandReport& b) {
    json j;
    j["states"] = b.states;
    j["max_action"] = b.max_action;
    j["band_width_predicted"] = b.band_width_predicted;
    j["band_width_observed"] = b.band_width_observed;
    j["violations"] = b.violations;
    j["diagonal_block_offdiag_nonzeros"] = b.diagonal_block_offdiag_nonzeros;
    json blocks = json::array();
    for (const auto& blk : b.blocks) {
        json e;
        e["name"] = blk.name;
        e["rows"] = {blk.row_begin, blk.row_end};
        e["cols"] = {blk.col_begin, blk.col_end};
        e["nonzeros"] = blk.nonzeros;
        e["observed_width"] = blk.observed_width;
        e["violations"] = blk.violations;
        blocks.push_back(std::move(e));
    }
    j["blocks"] = std::move(blocks);
    return j;
}

json to_json(const MetricsReport& r) {
    json j = header("metrics_report");
    j["scalars"] = r.scalars;
    j["spectra"] = r.spectra;
    j["vectors"] = r.vectors;
    j["band"] = r.band ? to_json(*r.band) : json(nullptr);
    return j;
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["kind"] = std::string(to_string(c.kind));
    j["states"] = c.states;
    j["states_list"] = c.states_list;
    j["actions"] = c.actions;
    j["depths"] = c.depths;
    j["seeds"] = c.seeds;
    j["base_seed"] = c.base_seed;
    j["restrict_small_actions"] = c.restrict_small_actions;
    j["var_threshold"] = c.var_threshold;
    j["sigmas"] = c.sigmas;
    j["n_samples"] = c.n_samples;
    j["d_obs"] = c.d_obs;
    j["n_breaks"] = c.n_breaks;
    j["pr_threshold"] = c.pr_threshold;
    j["bootstrap_n"] = c.bootstrap_n;
    j["full_scan"] = c.full_scan;
    j["train"] = to_json(c.train);
    return j;
}

ExperimentConfig experiment_config_from_json(const json& j) {
    Fields f(j, "");
    ExperimentKind kind;
    try {
        kind = parse_experiment_kind(f.text("kind"));
    } catch (const ConfigError&) {
        throw;
    } catch (const ValueError& e) {
        throw ConfigError("kind", e.what());
    }
    ExperimentConfig c = default_experiment_config(kind);
    c.states = f.count("states", c.states);
    c.states_list = f.counts("states_list", c.states_list);
    c.actions = f.counts("actions", c.actions);
    c.depths = f.counts("depths", c.depths);
    c.seeds = f.count("seeds", c.seeds);
    c.base_seed = f.u64("base_seed", c.base_seed);
    c.restrict_small_actions = f.boolean("restrict_small_actions", c.restrict_small_actions);
    c.var_threshold = f.real("var_threshold", c.var_threshold);
    c.sigmas = f.reals("sigmas", c.sigmas);
    c.n_samples = f.count("n_samples", c.n_samples);
    c.d_obs = f.count("d_obs", c.d_obs);
    c.n_breaks = f.count("n_breaks", c.n_breaks);
    c.pr_threshold = f.real("pr_threshold", c.pr_threshold);
    c.bootstrap_n = f.count("bootstrap_n", c.bootstrap_n);
    c.full_scan = f.boolean("full_scan", c.full_scan);
    if (f.optional("train")) {
        Fields t(f.raw("train"), "train");
        c.train = train_config_from_fields(t, c.train);
    }
    if (!c.depths.empty()) c.train.depth = c.depths.front();
    f.finish();
    try {
        c.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const ValueError& e) {
        throw ConfigError("", e.what());
    }
    return c;
}

void apply_override(json& target, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0)
        throw ConfigError("", "override '" + std::string(assignment) + "' is not key=value");
    const std::string key(assignment.substr(0, eq));
    const std::string raw(assignment.substr(eq + 1));
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    json* node = &target;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
        if (part.empty()) throw ConfigError(key, "empty path component in override");
        if (!node->is_object()) throw ConfigError(key, "cannot descend into a non-object");
        if (dot == std::string::npos) {
            (*node)[part] = std::move(value);
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

std::string trace_to_csv(const TrainTrace& t) {
    std::ostringstream os;
    const bool acc = !t.accuracy_history.empty();
    os << (acc ? "step,loss,accuracy\n" : "step,loss\n");
    for (std::size_t i = 0; i < t.loss_history.size(); ++i) {
        os << i << ',' << format_double(t.loss_history[i]);
        if (acc) os << ',' << format_double(t.accuracy_history[i]);
        os << '\n';
    }
    return os.str();
}

std::string metas_to_csv(const Dataset& data) {
    std::ostringstream os;
    const std::size_t d = data.state_dim();
    const std::size_t da = data.metas.empty() ? 0 : data.metas.front().action.size();
    os << "row";
    for (std::size_t k = 0; k < d; ++k) os << ",state_" << k;
    for (std::size_t k = 0; k < da; ++k) os << ",action_" << k;
    for (std::size_t k = 0; k < d; ++k) os << ",target_" << k;
    os << ",env_id,class_label\n";
    for (std::size_t i = 0; i < data.metas.size(); ++i) {
        const auto& m = data.metas[i];
        os << i;
        for (double v : m.state) os << ',' << format_double(v);
        for (double v : m.action) os << ',' << format_double(v);
        for (double v : m.target_state) os << ',' << format_double(v);
        os << ',' << m.env_id << ',';
        if (m.class_label) os << *m.class_label;
        os << '\n';
    }
    return os.str();
}

std::string metrics_to_csv(const MetricsReport& r) {
    std::ostringstream os;
    os << "metric,value\n";
    for (const auto& [name, v] : r.scalars) os << name << ',' << format_double(v) << '\n';
    return os.str();
}

std::string matrix_to_csv(const Matrix& m) {
    std::ostringstream os;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t k = 0; k < m.cols(); ++k) {
            if (k) os << ',';
            os << format_double(m(i, k));
        }
        os << '\n';
    }
    return os.str();
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("", "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json_file(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ConfigError("", "'" + path.string() + "' is not valid JSON");
    return j;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

}  // namespace pclab
