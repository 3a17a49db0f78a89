#pragma once

#include "pclab/matrix.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace pclab {

// ---------------------------------------------------------------------------
// Products and elementwise helpers
// ---------------------------------------------------------------------------

/// a * b. Throws ShapeError naming both shapes when a.cols != b.rows.
Matrix matmul(const Matrix& a, const Matrix& b);

/// a^T * b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);

/// a * b^T without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double factor);

double frobenius_norm(const Matrix& a);
double dot(std::span<const double> a, std::span<const double> b);

std::vector<double> column_means(const Matrix& a);

/// Subtracts the column means from every row.
Matrix center_columns(const Matrix& a);

// ---------------------------------------------------------------------------
// Decompositions
// ---------------------------------------------------------------------------

/// Thin SVD of an m x n matrix, r = min(m, n).
struct SvdResult {
    Matrix u;                             ///< m x r, orthonormal columns
    std::vector<double> singular_values;  ///< length r, descending, >= 0
    Matrix vt;                            ///< r x n, orthonormal rows
};

struct SvdOptions {
    std::size_t max_sweeps = 100;
    double tolerance = 1e-12;  ///< relative off-diagonal threshold
};

/// One-sided Jacobi SVD.
///
/// Each left singular vector is signed so that its largest-magnitude entry is
/// nonnegative (lowest index wins ties); the matching row of vt is flipped
/// with it. Left vectors for zero singular values are completed to an
/// orthonormal set. Throws ConvergenceError after `max_sweeps` sweeps.
SvdResult svd(const Matrix& a, const SvdOptions& options = {});

/// Relative cutoff below which singular values are treated as zero.
inline constexpr double kPinvRcond = 1e-10;

/// Minimum-norm least-squares solution of x * sigma ~= y via the SVD
/// pseudo-inverse. Returns sigma with shape x.cols x y.cols.
Matrix pinv_lstsq(const Matrix& x, const Matrix& y, double rcond = kPinvRcond);

struct PcaResult {
    Matrix components;                       ///< k x n, orthonormal rows
    Matrix projections;                      ///< m x k, centered(h) * components^T
    std::vector<double> explained_variance;  ///< length k, descending
    std::vector<double> all_variances;       ///< every covariance eigenvalue, descending
};

/// Principal components of the rows of h (population covariance, 1/m).
/// Each component is signed so its largest-magnitude entry is nonnegative.
PcaResult pca(const Matrix& h, std::size_t k);

/// Flips v in place so its largest-magnitude entry is nonnegative.
/// Returns true if the vector was negated.
bool canonicalize_sign(std::span<double> v);

}  // namespace pclab
