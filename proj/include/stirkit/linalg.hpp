#pragma once

// Dense 64-bit linear algebra sized for desk-scale experiments: row-major
// matrices, products, centering, a one-sided Jacobi thin SVD and a
// least-squares line fit.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace stirkit {

class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    /// Takes ownership of row-major `data`; throws on size mismatch or
    /// non-finite entries.
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    bool all_finite() const;

    /// Rows selected by index, in the given order.
    Matrix select_rows(std::span<const std::size_t> indices) const;
    /// First `count` columns.
    Matrix left_columns(std::size_t count) const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ·b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a·bᵀ without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double factor);

double frobenius_norm(const Matrix& a);
/// Σ_ij a_ij·b_ij.
double frobenius_inner(const Matrix& a, const Matrix& b);

std::vector<double> column_means(const Matrix& a);
/// Subtracts each column's mean. Requires rows ≥ 1.
Matrix center_columns(const Matrix& a);
/// H·K·H with H = I − (1/n)·11ᵀ. Requires a square matrix.
Matrix center_gram(const Matrix& k);

/// Thin SVD, a = u·diag(s)·vt with k = min(rows, cols).
struct SvdResult {
    Matrix u;               // rows × k, orthonormal columns
    std::vector<double> s;  // non-increasing, non-negative
    Matrix vt;              // k × cols, orthonormal rows

    Matrix reconstruct() const;
};

/// One-sided Jacobi. Gives up with NumericalError after 100 sweeps.
SvdResult svd_thin(const Matrix& a);

/// Number of singular values above `rel_tol`·s_max (0 for an all-zero s).
std::size_t effective_rank(std::span<const double> s, double rel_tol = 1e-10);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;

    double operator()(double x) const { return slope * x + intercept; }
};

/// Ordinary least squares line through (xs, ys). Needs ≥ 2 points and at
/// least two distinct xs.
LineFit ols_fit(std::span<const double> xs, std::span<const double> ys);

}  // namespace stirkit
