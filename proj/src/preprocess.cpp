#include "volcal/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "volcal/error.hpp"

namespace volcal {

Matrix sample_covariance(const Matrix& x) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    if (n < 2) throw ValidationError("covariance needs at least 2 rows");
    std::vector<double> mean(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) mean[c] += x(r, c);
    for (double& m : mean) m /= static_cast<double>(n);
    Matrix cov(d, d);
    std::vector<double> centered(d);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < d; ++c) centered[c] = x(r, c) - mean[c];
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j <= i; ++j) cov(i, j) += centered[i] * centered[j];
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j <= i; ++j) cov(j, i) = cov(i, j) /= static_cast<double>(n - 1);
    return cov;
}

Whitener fit_whitener(const Matrix& train, double rel_floor) {
    const std::size_t n = train.rows();
    const std::size_t d = train.cols();
    if (n < 2) throw ValidationError("whitening needs at least 2 training rows");
    if (d == 0) throw ValidationError("whitening needs at least one column");
    if (!train.all_finite()) throw NonFiniteError("training inputs contain non-finite values");
    if (!(rel_floor >= 0.0 && rel_floor < 1.0)) throw ValidationError("rel_floor must lie in [0, 1)");

    Whitener wh;
    wh.mean.assign(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) wh.mean[c] += train(r, c);
    for (double& m : wh.mean) m /= static_cast<double>(n);

    const Matrix cov = sample_covariance(train);
    double trace = 0.0;
    for (std::size_t i = 0; i < d; ++i) trace += cov(i, i);
    wh.eig_floor = trace > 0.0 ? 1e-10 * trace / static_cast<double>(d) : 1.0;

    // Second pass on the covariance of the data rotated into the first
    // eigenbasis: that matrix is nearly diagonal and graded, where Jacobi
    // keeps the small eigenvalues and their vectors to relative accuracy.
    SymEigen eig = sym_eigen(cov);
    {
        Matrix rotated(n, d);
        std::vector<double> centered(d);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < d; ++c) centered[c] = train(r, c) - wh.mean[c];
            for (std::size_t k = 0; k < d; ++k) {
                double acc = 0.0;
                for (std::size_t c = 0; c < d; ++c) acc += centered[c] * eig.vectors(c, k);
                rotated(r, k) = acc;
            }
        }
        const SymEigen second = sym_eigen(sample_covariance(rotated));
        eig.vectors = matmul(eig.vectors, second.vectors);
        eig.values = second.values;
    }
    wh.eig_floor = std::max(wh.eig_floor, rel_floor * eig.values.front());
    wh.w = Matrix(d, d);
    wh.w_inv = Matrix(d, d);
    std::vector<double> inv_root(d), root(d);
    for (std::size_t k = 0; k < d; ++k) {
        const double lam = std::max(eig.values[k], wh.eig_floor);
        root[k] = std::sqrt(lam);
        inv_root[k] = 1.0 / root[k];
    }
    const Matrix& q = eig.vectors;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double a = 0.0, b = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double qq = q(i, k) * q(j, k);
                a += qq * inv_root[k];
                b += qq * root[k];
            }
            wh.w(i, j) = wh.w(j, i) = a;
            wh.w_inv(i, j) = wh.w_inv(j, i) = b;
        }
    }
    return wh;
}

Matrix whiten_apply(const Whitener& w, const Matrix& x) {
    const std::size_t d = w.dim();
    if (x.cols() != d)
        throw DimensionError("whitener expects " + std::to_string(d) + " columns, got " + std::to_string(x.cols()));
    Matrix out(x.rows(), d);
    std::vector<double> centered(d);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = 0; c < d; ++c) centered[c] = x(r, c) - w.mean[c];
        for (std::size_t i = 0; i < d; ++i) {
            const auto wi = w.w.row(i);
            double acc = 0.0;
            for (std::size_t c = 0; c < d; ++c) acc += wi[c] * centered[c];
            out(r, i) = acc;
        }
    }
    return out;
}

Matrix whiten_invert(const Whitener& w, const Matrix& z) {
    const std::size_t d = w.dim();
    if (z.cols() != d)
        throw DimensionError("whitener expects " + std::to_string(d) + " columns, got " + std::to_string(z.cols()));
    Matrix out(z.rows(), d);
    for (std::size_t r = 0; r < z.rows(); ++r) {
        const auto zr = z.row(r);
        for (std::size_t i = 0; i < d; ++i) {
            const auto wi = w.w_inv.row(i);
            double acc = 0.0;
            for (std::size_t c = 0; c < d; ++c) acc += wi[c] * zr[c];
            out(r, i) = acc + w.mean[i];
        }
    }
    return out;
}

Matrix ParameterScaler::scale(const Matrix& y) const {
    const std::size_t p = dim();
    if (y.cols() != p)
        throw DimensionError("scaler expects " + std::to_string(p) + " columns, got " + std::to_string(y.cols()));
    Matrix out(y.rows(), p);
    for (std::size_t r = 0; r < y.rows(); ++r) {
        for (std::size_t c = 0; c < p; ++c) {
            const double v = y(r, c);
            if (!(v >= bounds.lower[c] && v <= bounds.upper[c]))
                throw OutOfBoundsError("row " + std::to_string(r) + ", parameter " + std::to_string(c) + ": " +
                                           std::to_string(v) + " outside [" + std::to_string(bounds.lower[c]) +
                                           ", " + std::to_string(bounds.upper[c]) + "]",
                                       c);
            out(r, c) = (v - bounds.lower[c]) / (bounds.upper[c] - bounds.lower[c]);
        }
    }
    return out;
}

Matrix ParameterScaler::unscale(const Matrix& u) const {
    const std::size_t p = dim();
    if (u.cols() != p)
        throw DimensionError("scaler expects " + std::to_string(p) + " columns, got " + std::to_string(u.cols()));
    Matrix out(u.rows(), p);
    for (std::size_t r = 0; r < u.rows(); ++r) {
        const auto row = unscale(u.row(r));
        std::copy(row.begin(), row.end(), out.row(r).begin());
    }
    return out;
}

std::vector<double> ParameterScaler::unscale(std::span<const double> u) const {
    const std::size_t p = dim();
    if (u.size() != p)
        throw DimensionError("scaler expects " + std::to_string(p) + " values, got " + std::to_string(u.size()));
    std::vector<double> out(p);
    for (std::size_t c = 0; c < p; ++c) {
        if (!(u[c] >= 0.0 && u[c] <= 1.0))
            throw OutOfBoundsError("parameter " + std::to_string(c) + ": unit value " + std::to_string(u[c]) +
                                       " outside [0, 1]",
                                   c);
        out[c] = u[c] * (bounds.upper[c] - bounds.lower[c]) + bounds.lower[c];
    }
    return out;
}

}  // namespace volcal
