#pragma once

#include "pclab/envs.hpp"
#include "pclab/matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace pclab {

enum class Activation { linear, relu, tanh };
enum class LossKind { cross_entropy, mse };
enum class OptimizerKind { gd, adam };

std::string_view to_string(Activation a);
std::string_view to_string(LossKind k);
std::string_view to_string(OptimizerKind k);
Activation parse_activation(std::string_view name);
LossKind parse_loss(std::string_view name);
OptimizerKind parse_optimizer(std::string_view name);

/// Layer weights W_l (fan_out x fan_in), applied in order. The activation
/// follows every layer except the last. Biases exist only for nonlinear nets.
struct NetworkParams {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
    Activation activation = Activation::linear;

    std::size_t depth() const noexcept { return weights.size(); }
    std::size_t d_in() const noexcept { return weights.empty() ? 0 : weights.front().cols(); }
    std::size_t d_out() const noexcept { return weights.empty() ? 0 : weights.back().rows(); }
    bool has_biases() const noexcept { return !biases.empty(); }

    /// Throws ShapeError/ValueError if layers do not chain or biases are
    /// inconsistent with the activation.
    void validate() const;

    friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

/// Weights i.i.d. N(0, init_scale^2 / fan_in); biases (nonlinear nets) zero.
NetworkParams init_network(std::size_t d_in, std::size_t hidden_width, std::size_t depth,
                           std::size_t d_out, Activation activation, double init_scale,
                           std::uint64_t seed);

struct ForwardPass {
    /// Output of every layer; entry l is post-nonlinearity for hidden layers.
    std::vector<Matrix> activations;
    /// Final-layer pre-activation (logits or predictions).
    Matrix outputs;

    const Matrix& last_hidden() const { return activations.at(activations.size() - 2); }
};

ForwardPass forward(const NetworkParams& params, const Matrix& x);

/// Activation of the last hidden layer, M x hidden_width.
Matrix hidden_representation(const NetworkParams& params, const Matrix& x);

/// W_L * ... * W_1 (d_out x d_in). Only defined for linear networks.
Matrix effective_weight(const NetworkParams& params);

struct LossGrad {
    double loss = 0.0;
    NetworkParams grads;
    Matrix outputs;  ///< network outputs the loss was measured on
};

/// Mean cross-entropy over samples (labels index the true class) or mean
/// squared error over samples and output dimensions, with exact full-batch
/// gradients. Throws NonFiniteError if the loss is not finite.
LossGrad loss_and_grad(const NetworkParams& params, const Matrix& x, const Matrix& y,
                       std::span<const std::size_t> labels, LossKind loss);
LossGrad loss_and_grad(const NetworkParams& params, const Dataset& data, LossKind loss);

/// Loss only, no gradients.
double loss_value(const NetworkParams& params, const Matrix& x, const Matrix& y,
                  std::span<const std::size_t> labels, LossKind loss);

/// Fraction of rows whose argmax output equals the label.
double accuracy(const Matrix& outputs, std::span<const std::size_t> labels);

struct TrainConfig {
    LossKind loss = LossKind::cross_entropy;
    OptimizerKind optimizer = OptimizerKind::adam;
    Activation activation = Activation::linear;
    /// Unset means the per-optimizer default (see default_learning_rate).
    std::optional<double> learning_rate;
    std::size_t max_steps = 50'000;
    double loss_floor = 1e-4;
    double init_scale = 1.0;
    std::uint64_t seed = 0;
    std::size_t hidden_width = 64;
    std::size_t depth = 2;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    /// Loss magnitude treated as divergence.
    double divergence_threshold = 1e6;

    double effective_learning_rate() const;
    void validate() const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// 0.05 (cross-entropy) / 0.01 (MSE) for gradient descent, 1e-3 for Adam.
double default_learning_rate(OptimizerKind optimizer, LossKind loss);

struct TrainTrace {
    std::vector<double> loss_history;
    std::vector<double> accuracy_history;  ///< cross-entropy runs only
    std::size_t steps_taken = 0;
    bool converged = false;

    double final_loss() const { return loss_history.empty() ? 0.0 : loss_history.back(); }
    double final_accuracy() const {
        return accuracy_history.empty() ? 0.0 : accuracy_history.back();
    }
};

struct TrainResult {
    NetworkParams params;
    TrainTrace trace;
};

/// Full-batch training. Each step evaluates the loss on the current
/// parameters and records it; training stops once the loss is at or below
/// loss_floor (converged) or after max_steps evaluations, and the returned
/// parameters are the ones the last recorded loss was measured on.
/// Throws DivergenceError carrying the step index on NaN/Inf or exploding loss.
TrainResult train(const Dataset& data, const TrainConfig& config);

}  // namespace pclab
