#include "volcal/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "volcal/error.hpp"

namespace volcal {

namespace {

std::string shape(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_square(const Matrix& a, const char* op) {
    if (a.rows() != a.cols())
        throw DimensionError(std::string(op) + ": expected a square matrix, got " + shape(a));
}

bool try_cholesky(const Matrix& a, double jitter, Matrix& out) {
    const std::size_t n = a.rows();
    out = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double pivot = a(j, j) + jitter;
        for (std::size_t k = 0; k < j; ++k) pivot -= out(j, k) * out(j, k);
        if (!(pivot > 0.0) || !std::isfinite(pivot)) return false;
        const double ljj = std::sqrt(pivot);
        out(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= out(i, k) * out(j, k);
            out(i, j) = s / ljj;
        }
    }
    return true;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols)
        throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                             " does not match " + std::to_string(rows) + "x" +
                             std::to_string(cols));
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw DimensionError("ragged matrix initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool Matrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul: " + shape(a) + " times " + shape(b));
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ci = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            auto bk = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
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

std::vector<double> matvec(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size())
        throw DimensionError("matvec: " + shape(a) + " times vector of length " +
                             std::to_string(x.size()));
    std::vector<double> y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ai = a.row(i);
        y[i] = std::inner_product(ai.begin(), ai.end(), x.begin(), 0.0);
    }
    return y;
}

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.data()) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError("max_abs_diff: " + shape(a) + " vs " + shape(b));
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

SymEigen sym_eigen(const Matrix& input) {
    require_square(input, "sym_eigen");
    const std::size_t n = input.rows();
    const double scale = max_abs(input);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(input(i, j) - input(j, i)) > 1e-12 * scale)
                throw ValidationError("sym_eigen: matrix is not symmetric at (" +
                                      std::to_string(i) + "," + std::to_string(j) + ")");

    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (input(i, j) + input(j, i));
    Matrix v = Matrix::identity(n);

    constexpr int kMaxSweeps = 100;
    constexpr double eps = std::numeric_limits<double>::epsilon();
    bool converged = false;
    for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                // Relative-accuracy threshold: off-diagonal negligible against
                // the geometric mean of the two pivots.
                if (std::abs(apq) <= eps * std::sqrt(std::abs(a(p, p)) * std::abs(a(q, q)))) {
                    a(p, q) = a(q, p) = 0.0;
                    continue;
                }
                rotated = true;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                double t;
                if (std::abs(theta) > 1e150) {
                    t = 0.5 / theta;
                } else {
                    t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                    if (theta < 0.0) t = -t;
                }
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = a(p, k) = c * akp - s * akq;
                    a(k, q) = a(q, k) = s * akp + c * akq;
                }
                a(p, p) -= t * apq;
                a(q, q) += t * apq;
                a(p, q) = a(q, p) = 0.0;

                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
        converged = !rotated;
    }
    if (!converged) throw NoConvergence("sym_eigen: Jacobi did not converge in 100 sweeps");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

    SymEigen out{std::vector<double>(n), Matrix(n, n)};
    for (std::size_t c = 0; c < n; ++c) {
        out.values[c] = a(order[c], order[c]);
        for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = v(r, order[c]);
    }
    return out;
}

Matrix cholesky(const Matrix& a) {
    require_square(a, "cholesky");
    const std::size_t n = a.rows();
    if (n == 0) return Matrix();
    double mean_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean_diag += a(i, i);
    mean_diag /= static_cast<double>(n);

    Matrix out;
    for (double rel : {0.0, 1e-12, 1e-10, 1e-8}) {
        if (try_cholesky(a, rel * mean_diag, out)) return out;
    }
    throw NotPositiveDefinite("cholesky: matrix is not positive definite (" + shape(a) +
                              ", mean diagonal " + std::to_string(mean_diag) + ")");
}

std::vector<double> cholesky_solve(const Matrix& lower, std::span<const double> b) {
    const std::size_t n = lower.rows();
    if (lower.cols() != n || b.size() != n)
        throw DimensionError("cholesky_solve: factor " + shape(lower) + ", rhs length " +
                             std::to_string(b.size()));
    std::vector<double> y(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
        double s = y[i];
        for (std::size_t k = 0; k < i; ++k) s -= lower(i, k) * y[k];
        y[i] = s / lower(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = y[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= lower(k, i) * y[k];
        y[i] = s / lower(i, i);
    }
    return y;
}

std::vector<double> solve_spd(const Matrix& a, std::span<const double> b) {
    if (a.rows() != b.size())
        throw DimensionError("solve_spd: matrix " + shape(a) + ", rhs length " +
                             std::to_string(b.size()));
    return cholesky_solve(cholesky(a), b);
}

}  // namespace volcal
