#include "doctest.h"

#include "pclab/envs.hpp"
#include "pclab/errors.hpp"
#include "pclab/linalg.hpp"
#include "pclab/rng.hpp"

#include <cmath>
#include <set>
#include <tuple>

using namespace pclab;

namespace {

/// Every (s, a) with s in [1, S], a in [-A, A], 1 <= s + a <= S, in s-major order.
std::vector<std::pair<int, int>> enumerate_pairs(int s_count, int a_max) {
    std::vector<std::pair<int, int>> out;
    for (int s = 1; s <= s_count; ++s)
        for (int a = -a_max; a <= a_max; ++a)
            if (s + a >= 1 && s + a <= s_count) out.emplace_back(s, a);
    return out;
}

std::size_t argmax(std::span<const double> row) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < row.size(); ++i)
        if (row[i] > row[best]) best = i;
    return best;
}

}  // namespace

TEST_CASE("onehot_1d: small cases") {
    Dataset d = gen_onehot_1d(3, 1);
    CHECK(d.size() == 7);
    for (const auto& m : d.metas) {
        const bool low = m.state[0] == 1 && m.action[0] == -1;
        const bool high = m.state[0] == 3 && m.action[0] == 1;
        CHECK_FALSE(low);
        CHECK_FALSE(high);
    }
    CHECK(gen_onehot_1d(5, 1).size() == 13);

    d = gen_onehot_1d(5, 0);
    CHECK(d.size() == 5);
    CHECK(d.x.slice_cols(0, 5) == d.y);
}

TEST_CASE("onehot_1d: matches brute-force enumeration") {
    for (int s = 3; s <= 12; ++s) {
        for (int a = 0; a <= (s + 1) / 2; ++a) {
            const Dataset d = gen_onehot_1d(s, a);
            const auto pairs = enumerate_pairs(s, a);
            REQUIRE(d.size() == pairs.size());
            CHECK(d.size() == valid_pair_count(s, a));
            const std::size_t n_act = 2 * a + 1;
            REQUIRE(d.x.cols() == static_cast<std::size_t>(s) + n_act);
            REQUIRE(d.y.cols() == static_cast<std::size_t>(s));
            for (std::size_t i = 0; i < pairs.size(); ++i) {
                const auto [ps, pa] = pairs[i];
                double row_sum = 0.0;
                for (double v : d.x.row(i)) row_sum += v;
                CHECK(row_sum == 2.0);
                CHECK(d.x(i, ps - 1) == 1.0);
                CHECK(d.x(i, s + pa + a) == 1.0);
                CHECK(argmax(d.y.row(i)) == static_cast<std::size_t>(ps + pa - 1));
                CHECK(d.labels[i] == static_cast<std::size_t>(ps + pa - 1));
                CHECK(d.metas[i].target_state[0] == ps + pa);
            }
        }
    }
}

TEST_CASE("onehot_1d: invalid horizon") {
    CHECK_THROWS_AS(gen_onehot_1d(1, 0), ValueError);
    CHECK_THROWS_AS(gen_onehot_1d(4, 4), ValueError);
}

TEST_CASE("onehot_2d: counts") {
    CHECK(gen_onehot_2d(2, 1).size() == 16);
    const Dataset d = gen_onehot_2d(3, 0);
    CHECK(d.size() == 9);
    CHECK(gen_onehot_2d(4, 2).size() == 196);
    std::set<std::size_t> labels(d.labels.begin(), d.labels.end());
    CHECK(labels.size() == 9);
}

TEST_CASE("two_envs: shapes and block disjointness") {
    const Dataset d = gen_two_envs(4, 1);
    CHECK(d.size() == 20);
    CHECK(d.x.cols() == 14);
    CHECK(d.y.cols() == 8);
    CHECK(d.env_indices(0).size() == 10);
    CHECK(d.env_indices(1).size() == 10);
    for (std::size_t i : d.env_indices(0))
        for (std::size_t j : d.env_indices(1)) CHECK(dot(d.x.row(i), d.x.row(j)) == 0.0);
}

TEST_CASE("piecewise: rejection rule and determinism") {
    const Dataset d = gen_piecewise(300, 0.5, 8, 3, 7);
    CHECK(d.size() == 300);
    CHECK(d.x.cols() == 9);
    CHECK(d.y.cols() == 8);
    for (const auto& m : d.metas) {
        CHECK(std::abs(m.target_state[0]) <= 1.0);
        CHECK(std::abs(m.state[0]) <= 1.0);
    }
    CHECK(gen_piecewise(300, 0.5, 8, 3, 7) == d);
    CHECK_FALSE(gen_piecewise(300, 0.5, 8, 3, 8) == d);

    const PiecewiseMap map(8, 3, 7);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto o = map(d.metas[i].state[0]);
        for (std::size_t k = 0; k < 8; ++k) CHECK(d.x(i, k) == o[k]);
        const auto t = map(d.metas[i].target_state[0]);
        for (std::size_t k = 0; k < 8; ++k) CHECK(d.y(i, k) == t[k]);
    }
}

TEST_CASE("piecewise: three breaks give three jumps") {
    const PiecewiseMap map(8, 3, 123);
    const int n = 20000;
    const double step = 2.0 / n;
    std::vector<double> inc;
    std::vector<std::size_t> seg;
    auto prev = map(-1.0);
    double within = 0.0;
    for (int i = 1; i <= n; ++i) {
        const double s = -1.0 + step * i;
        const auto cur = map(s);
        double ss = 0.0;
        for (std::size_t k = 0; k < cur.size(); ++k) ss += (cur[k] - prev[k]) * (cur[k] - prev[k]);
        inc.push_back(std::sqrt(ss));
        const bool same = map.segment_of(s) == map.segment_of(s - step);
        if (same) within = std::max(within, inc.back());
        prev = cur;
    }
    int jumps = 0;
    for (double v : inc)
        if (v > 10.0 * within) ++jumps;
    CHECK(jumps == 3);
}

TEST_CASE("dataset helpers") {
    const Dataset d = gen_onehot_1d(6, 3);
    const auto small = d.small_action_indices();
    for (std::size_t i : small) CHECK(std::abs(d.metas[i].action[0]) <= 1.0);
    CHECK(small.size() == valid_pair_count(6, 1));
    const Dataset sub = d.subset(small);
    CHECK(sub.size() == small.size());
    CHECK(sub.x.cols() == d.x.cols());
    const Matrix t = d.target_states();
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(t(i, 0) == d.metas[i].state[0] + d.metas[i].action[0]);
}

TEST_CASE("generate dispatches on kind") {
    GeneratorSpec spec;
    spec.kind = TaskKind::two_envs;
    spec.states = 4;
    spec.max_action = 1;
    CHECK(generate(spec) == gen_two_envs(4, 1));
    CHECK(parse_task_kind(to_string(TaskKind::piecewise)) == TaskKind::piecewise);
    CHECK_THROWS_AS(parse_task_kind("grid"), ValueError);
}
