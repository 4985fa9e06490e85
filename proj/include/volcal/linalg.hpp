#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace volcal {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool all_finite() const noexcept;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
std::vector<double> matvec(const Matrix& a, std::span<const double> x);
double max_abs(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);

/// Eigen-decomposition of a symmetric matrix. Eigenvalues descending; the
/// columns of `vectors` are the matching orthonormal eigenvectors.
struct SymEigen {
    std::vector<double> values;
    Matrix vectors;
};

/// Cyclic Jacobi rotations, capped at 100 sweeps.
SymEigen sym_eigen(const Matrix& a);

/// Lower-triangular Cholesky factor. Retries with diagonal jitter of 1e-12,
/// 1e-10 and 1e-8 times the mean diagonal before giving up.
Matrix cholesky(const Matrix& a);

/// Solves L·Lᵀ·x = b given the Cholesky factor L.
std::vector<double> cholesky_solve(const Matrix& lower, std::span<const double> b);

std::vector<double> solve_spd(const Matrix& a, std::span<const double> b);

}  // namespace volcal
