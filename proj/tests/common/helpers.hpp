#pragma once

#include "pclab/matrix.hpp"
#include "pclab/nets.hpp"
#include "pclab/rng.hpp"

#include <algorithm>
#include <span>

#include <cmath>
#include <cstdint>

namespace testing {

inline pclab::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                   double scale = 1.0) {
    pclab::Rng rng(seed);
    pclab::Matrix m(rows, cols);
    for (double& v : m.data()) v = scale * rng.normal();
    return m;
}

inline pclab::Matrix naive_matmul(const pclab::Matrix& a, const pclab::Matrix& b) {
    pclab::Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

inline double max_abs_diff(const pclab::Matrix& a, const pclab::Matrix& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
    return d;
}

/// Largest elementwise relative error between analytic gradients and central
/// differences, |g - n| / max(|g|, |n|, floor).
inline double gradient_check(const pclab::NetworkParams& params, const pclab::Matrix& x,
                             const pclab::Matrix& y, std::span<const std::size_t> labels,
                             pclab::LossKind loss, double h = 1e-5, double floor = 1e-6) {
    const pclab::LossGrad lg = pclab::loss_and_grad(params, x, y, labels, loss);
    pclab::NetworkParams p = params;
    double worst = 0.0;
    auto probe = [&](double& slot, double analytic) {
        const double saved = slot;
        slot = saved + h;
        const double up = pclab::loss_value(p, x, y, labels, loss);
        slot = saved - h;
        const double down = pclab::loss_value(p, x, y, labels, loss);
        slot = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
    };
    for (std::size_t l = 0; l < p.weights.size(); ++l)
        for (std::size_t i = 0; i < p.weights[l].size(); ++i)
            probe(p.weights[l].data()[i], lg.grads.weights[l].data()[i]);
    for (std::size_t l = 0; l < p.biases.size(); ++l)
        for (std::size_t i = 0; i < p.biases[l].size(); ++i) probe(p.biases[l][i], lg.grads.biases[l][i]);
    return worst;
}

}  // namespace testing
