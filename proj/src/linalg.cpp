#include "pclab/linalg.hpp"

#include "pclab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace pclab {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
    }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: cannot multiply " + a.shape_str() + " by " + b.shape_str());
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Matrix out(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = out.row(i).data();
        const double* arow = a.row(i).data();
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b.row(p).data();
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    require_finite(out, "matmul");
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("matmul_tn: cannot multiply transpose of " + a.shape_str() + " by " +
                         b.shape_str());
    }
    const std::size_t m = a.rows(), p = a.cols(), q = b.cols();
    Matrix out(p, q);
    for (std::size_t r = 0; r < m; ++r) {
        const double* arow = a.row(r).data();
        const double* brow = b.row(r).data();
        for (std::size_t i = 0; i < p; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* orow = out.row(i).data();
            for (std::size_t j = 0; j < q; ++j) orow[j] += av * brow[j];
        }
    }
    require_finite(out, "matmul_tn");
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_nt: cannot multiply " + a.shape_str() + " by transpose of " +
                         b.shape_str());
    }
    // Row-times-row dot products do not vectorize under strict FP semantics;
    // the transposed i-k-j product does.
    return matmul(a, b.transpose());
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix out = a;
    auto o = out.data();
    auto bv = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
    require_finite(out, "add");
    return out;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "subtract");
    Matrix out = a;
    auto o = out.data();
    auto bv = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
    require_finite(out, "subtract");
    return out;
}

Matrix scale(const Matrix& a, double factor) {
    Matrix out = a;
    for (double& v : out.data()) v *= factor;
    require_finite(out, "scale");
    return out;
}

double frobenius_norm(const Matrix& a) {
    // Scaled accumulation avoids overflow for large entries.
    double largest = 0.0;
    for (double v : a.data()) largest = std::max(largest, std::abs(v));
    if (largest == 0.0) return 0.0;
    double acc = 0.0;
    for (double v : a.data()) {
        const double s = v / largest;
        acc += s * s;
    }
    return largest * std::sqrt(acc);
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ShapeError("dot: length mismatch " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

std::vector<double> column_means(const Matrix& a) {
    std::vector<double> mean(a.cols(), 0.0);
    if (a.rows() == 0) return mean;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        auto row = a.row(r);
        for (std::size_t c = 0; c < a.cols(); ++c) mean[c] += row[c];
    }
    for (double& m : mean) m /= static_cast<double>(a.rows());
    return mean;
}

Matrix center_columns(const Matrix& a) {
    const auto mean = column_means(a);
    Matrix out = a;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        for (std::size_t c = 0; c < out.cols(); ++c) row[c] -= mean[c];
    }
    return out;
}

bool canonicalize_sign(std::span<double> v) {
    if (v.empty()) return false;
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (std::abs(v[i]) > std::abs(v[best])) best = i;
    if (v[best] < 0.0) {
        for (double& x : v) x = -x;
        return true;
    }
    return false;
}

namespace {

/// Orthonormal completion: fills columns of `basis` (stored as rows, each of
/// length dim) flagged in `missing` using standard basis vectors.
void complete_basis(std::vector<std::vector<double>>& basis, const std::vector<bool>& missing,
                    std::size_t dim) {
    std::size_t candidate = 0;
    for (std::size_t j = 0; j < basis.size(); ++j) {
        if (!missing[j]) continue;
        while (candidate < dim) {
            std::vector<double> v(dim, 0.0);
            v[candidate++] = 1.0;
            // Two Gram-Schmidt passes against every accepted vector.
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t k = 0; k < basis.size(); ++k) {
                    if (k == j || (missing[k] && k > j)) continue;
                    const double proj = dot(v, basis[k]);
                    for (std::size_t i = 0; i < dim; ++i) v[i] -= proj * basis[k][i];
                }
            }
            double norm = std::sqrt(dot(v, v));
            if (norm > 0.5) {
                for (double& x : v) x /= norm;
                basis[j] = std::move(v);
                break;
            }
        }
    }
}

SvdResult svd_tall(const Matrix& a, const SvdOptions& options) {
    const std::size_t m = a.rows(), n = a.cols();
    // Columns of A and of V, each stored contiguously.
    std::vector<std::vector<double>> g(n, std::vector<double>(m));
    std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < m; ++i) g[j][i] = a(i, j);
        v[j][j] = 1.0;
    }

    // Columns at rounding-noise level never settle under rotation; treat them
    // as zero.
    const double negligible =
        static_cast<double>(n) * std::numeric_limits<double>::epsilon() * frobenius_norm(a);
    const double negligible_sq = negligible * negligible;

    bool converged = n < 2;
    std::size_t sweep = 0;
    while (!converged) {
        if (sweep == options.max_sweeps) {
            throw ConvergenceError("svd: one-sided Jacobi did not converge", sweep);
        }
        ++sweep;
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                const double* gp = g[p].data();
                const double* gq = g[q].data();
                for (std::size_t i = 0; i < m; ++i) {
                    alpha += gp[i] * gp[i];
                    beta += gq[i] * gq[i];
                    gamma += gp[i] * gq[i];
                }
                if (gamma == 0.0 || alpha <= negligible_sq || beta <= negligible_sq ||
                    std::abs(gamma) <= options.tolerance * std::sqrt(alpha * beta)) {
                    continue;
                }
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                double* wp = g[p].data();
                double* wq = g[q].data();
                for (std::size_t i = 0; i < m; ++i) {
                    const double x = wp[i], y = wq[i];
                    wp[i] = c * x - s * y;
                    wq[i] = s * x + c * y;
                }
                double* vp = v[p].data();
                double* vq = v[q].data();
                for (std::size_t i = 0; i < n; ++i) {
                    const double x = vp[i], y = vq[i];
                    vp[i] = c * x - s * y;
                    vq[i] = s * x + c * y;
                }
            }
        }
        converged = !rotated;
    }

    std::vector<double> sigma(n);
    for (std::size_t j = 0; j < n; ++j) sigma[j] = std::sqrt(dot(g[j], g[j]));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

    const double top = n == 0 ? 0.0 : sigma[order[0]];
    const double zero_cut = std::max(top * 1e-14, negligible);

    std::vector<std::vector<double>> ucols(n, std::vector<double>(m, 0.0));
    std::vector<std::vector<double>> vrows(n);
    std::vector<bool> missing(n, false);
    SvdResult out;
    out.singular_values.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        vrows[k] = v[j];
        if (sigma[j] <= zero_cut || sigma[j] == 0.0) {
            out.singular_values[k] = 0.0;
            missing[k] = true;
            continue;
        }
        out.singular_values[k] = sigma[j];
        for (std::size_t i = 0; i < m; ++i) ucols[k][i] = g[j][i] / sigma[j];
    }
    complete_basis(ucols, missing, m);

    for (std::size_t k = 0; k < n; ++k) {
        if (canonicalize_sign(ucols[k])) {
            for (double& x : vrows[k]) x = -x;
        }
    }

    out.u = Matrix(m, n);
    out.vt = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < m; ++i) out.u(i, k) = ucols[k][i];
        for (std::size_t i = 0; i < n; ++i) out.vt(k, i) = vrows[k][i];
    }
    return out;
}

}  // namespace

SvdResult svd(const Matrix& a, const SvdOptions& options) {
    if (a.empty()) throw ShapeError("svd: empty matrix " + a.shape_str());
    require_finite(a, "svd input");
    if (a.rows() >= a.cols()) return svd_tall(a, options);

    // Wide case: decompose the transpose, then swap the factors.
    SvdResult t = svd_tall(a.transpose(), options);
    SvdResult out;
    out.singular_values = std::move(t.singular_values);
    out.u = t.vt.transpose();
    out.vt = t.u.transpose();
    for (std::size_t k = 0; k < out.u.cols(); ++k) {
        std::vector<double> col = out.u.col(k);
        if (canonicalize_sign(col)) {
            for (std::size_t i = 0; i < out.u.rows(); ++i) out.u(i, k) = col[i];
            for (double& x : out.vt.row(k)) x = -x;
        }
    }
    return out;
}

Matrix pinv_lstsq(const Matrix& x, const Matrix& y, double rcond) {
    if (x.rows() != y.rows()) {
        throw ShapeError("pinv_lstsq: row mismatch between x " + x.shape_str() + " and y " +
                         y.shape_str());
    }
    const SvdResult d = svd(x);
    const std::size_t r = d.singular_values.size();
    const double cutoff = rcond * (r == 0 ? 0.0 : d.singular_values[0]);

    Matrix uty = matmul_tn(d.u, y);  // r x q
    for (std::size_t k = 0; k < r; ++k) {
        const double s = d.singular_values[k];
        const double inv = (s > cutoff && s > 0.0) ? 1.0 / s : 0.0;
        for (double& v : uty.row(k)) v *= inv;
    }
    return matmul_tn(d.vt, uty);  // n x q
}

PcaResult pca(const Matrix& h, std::size_t k) {
    const std::size_t m = h.rows(), n = h.cols();
    if (m < 2) throw ShapeError("pca: need at least 2 rows, got " + h.shape_str());
    if (k > std::min(m, n)) {
        throw ShapeError("pca: k=" + std::to_string(k) + " exceeds min dimension of " +
                         h.shape_str());
    }
    const Matrix centered = center_columns(h);
    const SvdResult d = svd(centered);

    PcaResult out;
    out.all_variances.resize(d.singular_values.size());
    for (std::size_t i = 0; i < d.singular_values.size(); ++i) {
        const double s = d.singular_values[i];
        out.all_variances[i] = s * s / static_cast<double>(m);
    }
    out.explained_variance.assign(out.all_variances.begin(),
                                  out.all_variances.begin() + static_cast<std::ptrdiff_t>(k));
    out.components = Matrix(k, n);
    for (std::size_t i = 0; i < k; ++i) {
        std::vector<double> comp(d.vt.row(i).begin(), d.vt.row(i).end());
        canonicalize_sign(comp);
        std::copy(comp.begin(), comp.end(), out.components.row(i).begin());
    }
    out.projections = matmul_nt(centered, out.components);
    return out;
}

}  // namespace pclab
