#include "stirkit/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "stirkit/error.hpp"

namespace stirkit {

namespace {

std::string shape(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (!std::isfinite(fill)) throw InvalidArgument("Matrix: non-finite fill value");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols)
        throw DimensionError("Matrix: " + std::to_string(data_.size()) + " values for shape " +
                             std::to_string(rows) + "x" + std::to_string(cols));
    if (!all_finite()) throw InvalidArgument("Matrix: non-finite entry");
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("Matrix::from_rows: ragged rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= rows_) throw DimensionError("select_rows: index out of range");
        std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(indices[i] * cols_), cols_,
                    out.data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
    }
    return out;
}

Matrix Matrix::left_columns(std::size_t count) const {
    if (count > cols_) throw DimensionError("left_columns: too many columns requested");
    Matrix out(rows_, count);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < count; ++j) out(i, j) = (*this)(i, j);
    return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul: " + shape(a) + " times " + shape(b));
    Matrix c(a.rows(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* ci = c.row(i).data();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            const double* bk = b.row(k).data();
            for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw DimensionError("matmul_tn: " + shape(a) + "^T times " + shape(b));
    Matrix c(a.cols(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* bk = b.row(k).data();
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a(k, i);
            if (aki == 0.0) continue;
            double* ci = c.row(i).data();
            for (std::size_t j = 0; j < n; ++j) ci[j] += aki * bk[j];
        }
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw DimensionError("matmul_nt: " + shape(a) + " times " + shape(b) + "^T");
    Matrix c(a.rows(), b.rows());
    const std::size_t inner = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row(i).data();
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* bj = b.row(j).data();
            double acc = 0.0;
            for (std::size_t k = 0; k < inner; ++k) acc += ai[k] * bj[k];
            c(i, j) = acc;
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.values()[i] += b.values()[i];
    return c;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "subtract");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.values()[i] -= b.values()[i];
    return c;
}

Matrix scale(const Matrix& a, double factor) {
    Matrix c = a;
    for (double& v : c.values()) v *= factor;
    return c;
}

double frobenius_norm(const Matrix& a) { return std::sqrt(frobenius_inner(a, a)); }

double frobenius_inner(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "frobenius_inner");
    return std::inner_product(a.values().begin(), a.values().end(), b.values().begin(), 0.0);
}

std::vector<double> column_means(const Matrix& a) {
    std::vector<double> means(a.cols(), 0.0);
    if (a.rows() == 0) return means;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) means[j] += a(i, j);
    for (double& m : means) m /= static_cast<double>(a.rows());
    return means;
}

Matrix center_columns(const Matrix& a) {
    if (a.rows() == 0) throw InvalidArgument("center_columns: matrix has no rows");
    const auto means = column_means(a);
    Matrix c = a;
    for (std::size_t i = 0; i < c.rows(); ++i)
        for (std::size_t j = 0; j < c.cols(); ++j) c(i, j) -= means[j];
    return c;
}

Matrix center_gram(const Matrix& k) {
    if (k.rows() != k.cols()) throw DimensionError("center_gram: matrix not square " + shape(k));
    const std::size_t n = k.rows();
    if (n == 0) return k;
    // H K H = K − row means − column means + grand mean.
    std::vector<double> row_mean(n, 0.0), col_mean(n, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            row_mean[i] += k(i, j);
            col_mean[j] += k(i, j);
        }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        row_mean[i] *= inv_n;
        col_mean[i] *= inv_n;
        grand += row_mean[i];
    }
    grand *= inv_n;
    Matrix c(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) c(i, j) = k(i, j) - row_mean[i] - col_mean[j] + grand;
    return c;
}

Matrix SvdResult::reconstruct() const {
    Matrix us = u;
    for (std::size_t i = 0; i < us.rows(); ++i)
        for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= s[j];
    return matmul(us, vt);
}

namespace {

constexpr int kMaxSweeps = 100;
constexpr double kRotationTol = 1e-12;

// Orthonormal-column Jacobi on a tall (or square) matrix. `w` holds the
// columns being orthogonalized (rows × n), `v` accumulates the rotations.
void jacobi_sweeps(Matrix& w, Matrix& v) {
    const std::size_t m = w.rows();
    const std::size_t n = w.cols();
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    const double wp = w(i, p), wq = w(i, q);
                    alpha += wp * wp;
                    beta += wq * wq;
                    gamma += wp * wq;
                }
                if (gamma == 0.0 || std::abs(gamma) <= kRotationTol * std::sqrt(alpha * beta))
                    continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double wp = w(i, p), wq = w(i, q);
                    w(i, p) = c * wp - s * wq;
                    w(i, q) = s * wp + c * wq;
                }
                for (std::size_t i = 0; i < v.rows(); ++i) {
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
        if (!rotated) return;
    }
    throw NumericalError("svd_thin: Jacobi iteration did not converge in " +
                         std::to_string(kMaxSweeps) + " sweeps");
}

// Replaces columns [first, cols) of `u` with unit vectors orthogonal to all
// preceding columns (Gram-Schmidt against the canonical basis).
void complete_orthonormal(Matrix& u, std::size_t first) {
    const std::size_t m = u.rows();
    std::size_t candidate = 0;
    for (std::size_t col = first; col < u.cols(); ++col) {
        for (; candidate < m; ++candidate) {
            std::vector<double> e(m, 0.0);
            e[candidate] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t k = 0; k < col; ++k) {
                    double dot = 0.0;
                    for (std::size_t i = 0; i < m; ++i) dot += u(i, k) * e[i];
                    for (std::size_t i = 0; i < m; ++i) e[i] -= dot * u(i, k);
                }
            }
            double norm = 0.0;
            for (double x : e) norm += x * x;
            norm = std::sqrt(norm);
            if (norm > 1e-8) {
                for (std::size_t i = 0; i < m; ++i) u(i, col) = e[i] / norm;
                ++candidate;
                break;
            }
        }
    }
}

SvdResult svd_tall(const Matrix& a) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    Matrix w = a;
    Matrix v = Matrix::identity(n);
    jacobi_sweeps(w, v);

    std::vector<double> norms(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += w(i, j) * w(i, j);
        norms[j] = std::sqrt(acc);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

    SvdResult r{Matrix(m, n), std::vector<double>(n), Matrix(n, n)};
    const double s_max = n > 0 ? norms[order[0]] : 0.0;
    std::size_t nonzero = 0;
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        r.s[j] = norms[src];
        for (std::size_t i = 0; i < n; ++i) r.vt(j, i) = v(i, src);
        // Columns whose norm is lost in rounding are rebuilt below.
        if (norms[src] > 0.0 && norms[src] > 1e-14 * s_max) {
            for (std::size_t i = 0; i < m; ++i) r.u(i, j) = w(i, src) / norms[src];
            ++nonzero;
        }
    }
    complete_orthonormal(r.u, nonzero);
    return r;
}

}  // namespace

SvdResult svd_thin(const Matrix& a) {
    if (!a.all_finite()) throw InvalidArgument("svd_thin: non-finite input");
    if (a.rows() >= a.cols()) return svd_tall(a);
    SvdResult t = svd_tall(transpose(a));
    return SvdResult{transpose(t.vt), std::move(t.s), transpose(t.u)};
}

std::size_t effective_rank(std::span<const double> s, double rel_tol) {
    if (s.empty() || s[0] <= 0.0) return 0;
    const double cutoff = rel_tol * s[0];
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [cutoff](double v) { return v >= cutoff; }));
}

LineFit ols_fit(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw DimensionError("ols_fit: xs and ys differ in length");
    if (xs.size() < 2) throw InvalidArgument("ols_fit: need at least two points");
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs[0]; }) || sxx == 0.0)
        throw InvalidArgument("ols_fit: degenerate xs (all equal)");
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    return fit;
}

}  // namespace stirkit
