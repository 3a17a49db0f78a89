#pragma once

#include "pclab/matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pclab {

enum class TaskKind { onehot_1d, onehot_2d, two_envs, piecewise };

std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view name);

/// Generator parameters. Fields not used by a task keep their defaults.
struct GeneratorSpec {
    TaskKind kind = TaskKind::onehot_1d;
    std::size_t states = 0;   ///< S for 1D tasks, grid side for the 2D task
    std::size_t max_action = 0;  ///< A
    std::size_t env_count = 1;
    // piecewise only
    std::size_t n_samples = 0;
    double action_sigma = 0.0;
    std::size_t d_obs = 0;
    std::size_t n_breaks = 0;
    std::uint64_t seed = 0;

    friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

/// Latent coordinates of one sample. Discrete tasks store integers exactly;
/// states are 1-based (s in [1, S]).
struct SampleMeta {
    std::vector<double> state;
    std::vector<double> action;
    std::vector<double> target_state;
    int env_id = 0;
    std::optional<std::size_t> class_label;

    friend bool operator==(const SampleMeta&, const SampleMeta&) = default;
};

struct Dataset {
    Matrix x;
    Matrix y;
    std::vector<std::size_t> labels;  ///< empty for the continuous task
    std::vector<SampleMeta> metas;
    GeneratorSpec spec;

    std::size_t size() const noexcept { return x.rows(); }
    bool is_discrete() const noexcept { return spec.kind != TaskKind::piecewise; }
    std::size_t state_dim() const noexcept { return metas.empty() ? 0 : metas.front().state.size(); }

    /// M x D matrix of target states (s + a), one row per sample.
    Matrix target_states() const;
    /// M x D matrix of input states s.
    Matrix input_states() const;

    /// Row indices whose every action component satisfies |a_k| <= bound.
    std::vector<std::size_t> small_action_indices(double bound = 1.0) const;
    std::vector<std::size_t> env_indices(int env_id) const;

    Dataset subset(const std::vector<std::size_t>& indices) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Number of valid (s, a) pairs for S states and actions in [-A, A]:
/// S(2A+1) - A(A+1).
std::size_t valid_pair_count(std::size_t states, std::size_t max_action);

/// One-hot 1D task: x = [onehot(s) | onehot(a)], y = onehot(s + a).
/// Rows ordered by s ascending, then a ascending.
Dataset gen_onehot_1d(std::size_t states, std::size_t max_action);

/// One-hot task on a side x side grid with actions in [-A, A]^2.
Dataset gen_onehot_2d(std::size_t side, std::size_t max_action);

/// Two disjoint copies of the 1D task. Input layout is
/// [state_0 | action_0 | state_1 | action_1], output layout [out_0 | out_1].
/// All env-0 rows precede env-1 rows.
Dataset gen_two_envs(std::size_t states, std::size_t max_action);

/// Fixed random piecewise-linear observation map on [-1, 1].
///
/// [-1, 1] is split into n_breaks + 1 equal segments; in segment j,
/// O_k(s) = slope[k][j] * s + offset[k][j] with coefficients drawn from N(0, 1).
class PiecewiseMap {
public:
    PiecewiseMap(std::size_t d_obs, std::size_t n_breaks, std::uint64_t seed);

    std::size_t dim() const noexcept { return slopes_.size(); }
    std::size_t segments() const noexcept { return n_breaks_ + 1; }
    std::size_t segment_of(double s) const;
    std::vector<double> operator()(double s) const;

private:
    std::size_t n_breaks_;
    std::vector<std::vector<double>> slopes_;
    std::vector<std::vector<double>> offsets_;
};

/// Continuous task: s ~ U(-1, 1), a ~ N(0, sigma^2) rejection-resampled until
/// s + a lies in [-1, 1]. x = [O(s) | a], y = O(s + a).
Dataset gen_piecewise(std::size_t n_samples, double action_sigma, std::size_t d_obs,
                      std::size_t n_breaks, std::uint64_t seed);

/// Dispatches on spec.kind.
Dataset generate(const GeneratorSpec& spec);

}  // namespace pclab
