#include "pclab/nets.hpp"

#include "pclab/errors.hpp"
#include "pclab/linalg.hpp"
#include "pclab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pclab {

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::linear: return "linear";
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
    }
    return "unknown";
}

std::string_view to_string(LossKind k) {
    return k == LossKind::cross_entropy ? "cross_entropy" : "mse";
}

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::gd ? "gd" : "adam"; }

Activation parse_activation(std::string_view name) {
    if (name == "linear") return Activation::linear;
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    throw ValueError("unknown activation '" + std::string(name) + "'");
}

LossKind parse_loss(std::string_view name) {
    if (name == "cross_entropy") return LossKind::cross_entropy;
    if (name == "mse") return LossKind::mse;
    throw ValueError("unknown loss '" + std::string(name) + "'");
}

OptimizerKind parse_optimizer(std::string_view name) {
    if (name == "gd") return OptimizerKind::gd;
    if (name == "adam") return OptimizerKind::adam;
    throw ValueError("unknown optimizer '" + std::string(name) + "'");
}

void NetworkParams::validate() const {
    if (weights.empty()) throw ValueError("network has no layers");
    for (std::size_t l = 1; l < weights.size(); ++l) {
        if (weights[l].cols() != weights[l - 1].rows()) {
            throw ShapeError("layer " + std::to_string(l) + " expects fan_in " +
                             std::to_string(weights[l].cols()) + " but previous layer emits " +
                             std::to_string(weights[l - 1].rows()));
        }
    }
    if (activation == Activation::linear && !biases.empty())
        throw ValueError("linear networks carry no biases");
    if (!biases.empty()) {
        if (biases.size() != weights.size()) throw ShapeError("one bias vector per layer expected");
        for (std::size_t l = 0; l < weights.size(); ++l)
            if (biases[l].size() != weights[l].rows())
                throw ShapeError("bias " + std::to_string(l) + " length mismatch");
    }
}

NetworkParams init_network(std::size_t d_in, std::size_t hidden_width, std::size_t depth,
                           std::size_t d_out, Activation activation, double init_scale,
                           std::uint64_t seed) {
    if (depth < 2) throw ValueError("init_network: depth must be >= 2, got " + std::to_string(depth));
    if (d_in == 0 || d_out == 0 || hidden_width == 0)
        throw ValueError("init_network: dimensions must be positive");
    if (!(init_scale >= 0.0) || !std::isfinite(init_scale))
        throw ValueError("init_network: init_scale must be finite and >= 0");

    Rng rng(seed);
    NetworkParams p;
    p.activation = activation;
    for (std::size_t l = 0; l < depth; ++l) {
        const std::size_t fan_in = l == 0 ? d_in : hidden_width;
        const std::size_t fan_out = l + 1 == depth ? d_out : hidden_width;
        const double stddev = init_scale / std::sqrt(static_cast<double>(fan_in));
        Matrix w(fan_out, fan_in);
        for (double& v : w.data()) v = stddev * rng.normal();
        p.weights.push_back(std::move(w));
        if (activation != Activation::linear) p.biases.emplace_back(fan_out, 0.0);
    }
    return p;
}

namespace {

void apply_activation(Matrix& z, Activation a) {
    switch (a) {
        case Activation::linear: return;
        case Activation::relu:
            for (double& v : z.data()) v = v > 0.0 ? v : 0.0;
            return;
        case Activation::tanh:
            for (double& v : z.data()) v = std::tanh(v);
            return;
    }
}

Matrix affine(const Matrix& x, const Matrix& w, const std::vector<double>* bias) {
    Matrix z = matmul_nt(x, w);
    if (bias) {
        for (std::size_t r = 0; r < z.rows(); ++r) {
            auto row = z.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) row[c] += (*bias)[c];
        }
    }
    return z;
}

void check_input(const NetworkParams& params, const Matrix& x) {
    params.validate();
    if (x.cols() != params.d_in()) {
        throw ShapeError("network expects " + std::to_string(params.d_in()) +
                         " input columns, got " + x.shape_str());
    }
}

/// Loss value and dLoss/dOutputs.
double output_loss(const Matrix& out, const Matrix& y, std::span<const std::size_t> labels,
                   LossKind kind, Matrix* grad) {
    const std::size_t m = out.rows(), k = out.cols();
    if (grad) *grad = Matrix(m, k);
    double total = 0.0;
    if (kind == LossKind::cross_entropy) {
        if (labels.size() != m)
            throw ShapeError("cross-entropy needs one label per row: " + std::to_string(labels.size()) +
                             " labels for " + std::to_string(m) + " rows");
        std::vector<double> prob(k);
        for (std::size_t i = 0; i < m; ++i) {
            auto row = out.row(i);
            const std::size_t label = labels[i];
            if (label >= k) throw ValueError("label " + std::to_string(label) + " out of range");
            const double top = *std::max_element(row.begin(), row.end());
            double sum = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                prob[c] = std::exp(row[c] - top);
                sum += prob[c];
            }
            total += std::log(sum) + top - row[label];
            if (grad) {
                auto g = grad->row(i);
                for (std::size_t c = 0; c < k; ++c) g[c] = prob[c] / sum / static_cast<double>(m);
                g[label] -= 1.0 / static_cast<double>(m);
            }
        }
        total /= static_cast<double>(m);
    } else {
        if (y.rows() != m || y.cols() != k)
            throw ShapeError("mse: targets " + y.shape_str() + " vs outputs " + out.shape_str());
        const double n = static_cast<double>(m * k);
        for (std::size_t i = 0; i < m; ++i) {
            auto row = out.row(i);
            auto t = y.row(i);
            for (std::size_t c = 0; c < k; ++c) {
                const double e = row[c] - t[c];
                total += e * e;
                if (grad) (*grad)(i, c) = 2.0 * e / n;
            }
        }
        total /= n;
    }
    if (!std::isfinite(total)) throw NonFiniteError("loss is not finite");
    return total;
}

/// Gradient for linear, bias-free networks using dL/dW_eff = G = dZ^T X and
/// dL/dW_l = (W_L..W_{l+1})^T G (W_{l-1}..W_1)^T. Cheaper than layerwise
/// backprop whenever the sample count exceeds the input width.
LossGrad linear_loss_and_grad(const NetworkParams& params, const Matrix& x, const Matrix& y,
                              std::span<const std::size_t> labels, LossKind kind) {
    const std::size_t depth = params.depth();
    // prefix[l] = W_{l-1} ... W_0, with prefix[0] standing for the identity.
    std::vector<Matrix> prefix(depth + 1);
    prefix[1] = params.weights[0];
    for (std::size_t l = 1; l < depth; ++l) prefix[l + 1] = matmul(params.weights[l], prefix[l]);
    const Matrix& w_eff = prefix[depth];

    LossGrad result;
    result.outputs = matmul_nt(x, w_eff);
    Matrix d_out;
    result.loss = output_loss(result.outputs, y, labels, kind, &d_out);
    const Matrix g = matmul_tn(d_out, x);  // d_out x d_in

    result.grads.activation = Activation::linear;
    result.grads.weights.resize(depth);
    Matrix suffix_t_g = g;  // (W_L..W_{l+1})^T G
    for (std::size_t l = depth; l-- > 0;) {
        result.grads.weights[l] = l == 0 ? suffix_t_g : matmul_nt(suffix_t_g, prefix[l]);
        if (l > 0) suffix_t_g = matmul_tn(params.weights[l], suffix_t_g);
    }
    return result;
}

}  // namespace

ForwardPass forward(const NetworkParams& params, const Matrix& x) {
    check_input(params, x);
    ForwardPass pass;
    const Matrix* input = &x;
    for (std::size_t l = 0; l < params.depth(); ++l) {
        Matrix z = affine(*input, params.weights[l], params.has_biases() ? &params.biases[l] : nullptr);
        if (l + 1 < params.depth()) apply_activation(z, params.activation);
        pass.activations.push_back(std::move(z));
        input = &pass.activations.back();
    }
    pass.outputs = pass.activations.back();
    return pass;
}

Matrix hidden_representation(const NetworkParams& params, const Matrix& x) {
    check_input(params, x);
    Matrix h = x;
    for (std::size_t l = 0; l + 1 < params.depth(); ++l) {
        h = affine(h, params.weights[l], params.has_biases() ? &params.biases[l] : nullptr);
        apply_activation(h, params.activation);
    }
    return h;
}

Matrix effective_weight(const NetworkParams& params) {
    params.validate();
    if (params.activation != Activation::linear)
        throw ValueError("effective_weight is only defined for linear networks");
    Matrix w = params.weights.front();
    for (std::size_t l = 1; l < params.depth(); ++l) w = matmul(params.weights[l], w);
    return w;
}

LossGrad loss_and_grad(const NetworkParams& params, const Matrix& x, const Matrix& y,
                       std::span<const std::size_t> labels, LossKind kind) {
    check_input(params, x);
    if (params.activation == Activation::linear && x.rows() > x.cols())
        return linear_loss_and_grad(params, x, y, labels, kind);

    const ForwardPass pass = forward(params, x);
    Matrix delta;
    LossGrad result;
    result.loss = output_loss(pass.outputs, y, labels, kind, &delta);
    result.outputs = pass.outputs;

    const std::size_t depth = params.depth();
    result.grads.activation = params.activation;
    result.grads.weights.resize(depth);
    if (params.has_biases()) result.grads.biases.resize(depth);
    for (std::size_t l = depth; l-- > 0;) {
        const Matrix& input = l == 0 ? x : pass.activations[l - 1];
        result.grads.weights[l] = matmul_tn(delta, input);
        if (params.has_biases()) {
            std::vector<double> gb(delta.cols(), 0.0);
            for (std::size_t r = 0; r < delta.rows(); ++r) {
                auto row = delta.row(r);
                for (std::size_t c = 0; c < gb.size(); ++c) gb[c] += row[c];
            }
            result.grads.biases[l] = std::move(gb);
        }
        if (l == 0) break;
        Matrix back = matmul(delta, params.weights[l]);
        const Matrix& a = pass.activations[l - 1];
        auto bv = back.data();
        auto av = a.data();
        switch (params.activation) {
            case Activation::linear: break;
            case Activation::relu:
                for (std::size_t i = 0; i < bv.size(); ++i)
                    if (av[i] <= 0.0) bv[i] = 0.0;
                break;
            case Activation::tanh:
                for (std::size_t i = 0; i < bv.size(); ++i) bv[i] *= 1.0 - av[i] * av[i];
                break;
        }
        delta = std::move(back);
    }
    return result;
}

LossGrad loss_and_grad(const NetworkParams& params, const Dataset& data, LossKind loss) {
    return loss_and_grad(params, data.x, data.y, data.labels, loss);
}

double loss_value(const NetworkParams& params, const Matrix& x, const Matrix& y,
                  std::span<const std::size_t> labels, LossKind loss) {
    const ForwardPass pass = forward(params, x);
    return output_loss(pass.outputs, y, labels, loss, nullptr);
}

double accuracy(const Matrix& outputs, std::span<const std::size_t> labels) {
    if (labels.size() != outputs.rows()) throw ShapeError("accuracy: label count mismatch");
    if (labels.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < outputs.rows(); ++i) {
        auto row = outputs.row(i);
        const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
        if (best == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double default_learning_rate(OptimizerKind optimizer, LossKind loss) {
    if (optimizer == OptimizerKind::adam) return 1e-3;
    return loss == LossKind::cross_entropy ? 0.05 : 0.01;
}

double TrainConfig::effective_learning_rate() const {
    return learning_rate.value_or(default_learning_rate(optimizer, loss));
}

void TrainConfig::validate() const {
    const double lr = effective_learning_rate();
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ValueError("learning_rate must be > 0");
    if (max_steps < 1) throw ValueError("max_steps must be >= 1");
    if (!(loss_floor >= 0.0)) throw ValueError("loss_floor must be >= 0");
    if (depth < 2) throw ValueError("depth must be >= 2");
    if (hidden_width < 1) throw ValueError("hidden_width must be >= 1");
    if (!(init_scale >= 0.0) || !std::isfinite(init_scale)) throw ValueError("init_scale must be >= 0");
}

namespace {

class AdamState {
public:
    explicit AdamState(const NetworkParams& shape) {
        for (const auto& w : shape.weights) {
            m_.emplace_back(w.size(), 0.0);
            v_.emplace_back(w.size(), 0.0);
        }
        for (const auto& b : shape.biases) {
            m_.emplace_back(b.size(), 0.0);
            v_.emplace_back(b.size(), 0.0);
        }
    }

    void step(NetworkParams& params, const NetworkParams& grads, const TrainConfig& cfg,
              double lr) {
        ++t_;
        const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t_));
        std::size_t slot = 0;
        auto update = [&](std::span<double> p, std::span<const double> g) {
            auto& m = m_[slot];
            auto& v = v_[slot];
            for (std::size_t i = 0; i < p.size(); ++i) {
                m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
                v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.adam_epsilon);
            }
            ++slot;
        };
        for (std::size_t l = 0; l < params.weights.size(); ++l)
            update(params.weights[l].data(), grads.weights[l].data());
        for (std::size_t l = 0; l < params.biases.size(); ++l)
            update(params.biases[l], grads.biases[l]);
    }

private:
    std::vector<std::vector<double>> m_, v_;
    std::size_t t_ = 0;
};

void gd_step(NetworkParams& params, const NetworkParams& grads, double lr) {
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        auto p = params.weights[l].data();
        auto g = grads.weights[l].data();
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
    }
    for (std::size_t l = 0; l < params.biases.size(); ++l)
        for (std::size_t i = 0; i < params.biases[l].size(); ++i)
            params.biases[l][i] -= lr * grads.biases[l][i];
}

}  // namespace

TrainResult train(const Dataset& data, const TrainConfig& config) {
    config.validate();
    if (data.size() == 0) throw ValueError("train: empty dataset");
    if (config.loss == LossKind::cross_entropy && data.labels.size() != data.size())
        throw ValueError("train: cross-entropy needs class labels (discrete dataset)");

    TrainResult result;
    result.params = init_network(data.x.cols(), config.hidden_width, config.depth, data.y.cols(),
                                 config.activation, config.init_scale, config.seed);
    const double lr = config.effective_learning_rate();
    const bool classify = config.loss == LossKind::cross_entropy;
    AdamState adam(result.params);
    TrainTrace& trace = result.trace;

    for (std::size_t step = 0; step < config.max_steps; ++step) {
        LossGrad lg;
        try {
            lg = loss_and_grad(result.params, data, config.loss);
        } catch (const NonFiniteError&) {
            throw DivergenceError("training diverged (non-finite values)", step);
        }
        if (lg.loss > config.divergence_threshold)
            throw DivergenceError("training diverged (loss " + std::to_string(lg.loss) + ")", step);

        trace.loss_history.push_back(lg.loss);
        if (classify) {
            trace.accuracy_history.push_back(accuracy(lg.outputs, data.labels));
        }
        trace.steps_taken = step + 1;
        if (lg.loss <= config.loss_floor) {
            trace.converged = true;
            break;
        }
        if (step + 1 == config.max_steps) break;

        if (config.optimizer == OptimizerKind::adam) {
            adam.step(result.params, lg.grads, config, lr);
        } else {
            gd_step(result.params, lg.grads, lr);
        }
    }
    return result;
}

}  // namespace pclab
