#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace pclab {

/// Dense row-major matrix of doubles.
///
/// Every constructor rejects non-finite entries, and the linear-algebra
/// routines check their outputs, so a Matrix that escapes a public call is
/// always finite.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    static Matrix identity(std::size_t n);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix column(std::span<const double> values);
    static Matrix diagonal(std::span<const double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const noexcept {
        return {values_.data() + r * cols_, cols_};
    }
    std::span<double> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }

    std::span<const double> data() const noexcept { return values_; }
    std::span<double> data() noexcept { return values_; }
    const std::vector<double>& values() const noexcept { return values_; }

    std::vector<double> col(std::size_t c) const;

    Matrix transpose() const;

    /// Rows picked by index, in the given order.
    Matrix select_rows(std::span<const std::size_t> indices) const;

    /// Contiguous column range [begin, end).
    Matrix slice_cols(std::size_t begin, std::size_t end) const;

    bool all_finite() const noexcept;

    /// "rows x cols", used in error messages.
    std::string shape_str() const;

    friend bool operator==(const Matrix& a, const Matrix& b) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

/// Throws NonFiniteError naming `where` if any entry is NaN or infinite.
void require_finite(const Matrix& m, const char* where);

}  // namespace pclab
