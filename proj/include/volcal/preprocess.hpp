#pragma once

#include <cstddef>

#include "volcal/dataset.hpp"
#include "volcal/linalg.hpp"

namespace volcal {

/// Centering plus ZCA-Mahalanobis whitening z = W (x - mean), W = C^(-1/2).
struct Whitener {
    std::vector<double> mean;
    Matrix w;      // C^(-1/2), symmetric
    Matrix w_inv;  // C^(1/2)
    double eig_floor = 0.0;

    std::size_t dim() const { return mean.size(); }
    bool operator==(const Whitener&) const = default;
};

/// Sample covariance with denominator n - 1.
Matrix sample_covariance(const Matrix& x);

/// Fits on the rows of `train`. Eigenvalues of the covariance are floored at
/// max(1e-10 * trace / dim, rel_floor * largest eigenvalue) before the inverse
/// square root is taken.
Whitener fit_whitener(const Matrix& train, double rel_floor = 0.0);

Matrix whiten_apply(const Whitener& w, const Matrix& x);
Matrix whiten_invert(const Whitener& w, const Matrix& z);

/// Affine map between parameter boxes and the unit cube.
struct ParameterScaler {
    ParamBounds bounds;

    std::size_t dim() const { return bounds.size(); }
    /// (y - lb) / (ub - lb); throws OutOfBoundsError naming the column.
    Matrix scale(const Matrix& y) const;
    /// u (ub - lb) + lb; u must lie in [0, 1].
    Matrix unscale(const Matrix& u) const;
    std::vector<double> unscale(std::span<const double> u) const;

    bool operator==(const ParameterScaler&) const = default;
};

}  // namespace volcal
