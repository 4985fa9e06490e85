#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "volcal/linalg.hpp"
#include "volcal/vol_surface.hpp"

namespace volcal {

/// Piecewise-constant, right-continuous forward variance. `boundaries` holds
/// the interior breakpoints, so values.size() == boundaries.size() + 1 and
/// xi(t) = values[#{b <= t}].
struct ForwardVarianceCurve {
    std::vector<double> boundaries;
    std::vector<double> values;

    static ForwardVarianceCurve flat(double xi0);
    /// Eight buckets ending at the standard maturities 0.1, 0.3, ..., 1.8, 2.0
    /// (the last bucket extends to infinity).
    static ForwardVarianceCurve piecewise(std::span<const double> values);

    double operator()(double t) const;
    void validate() const;
};

struct RBergomiParams {
    ForwardVarianceCurve xi = ForwardVarianceCurve::flat(0.04);
    double eta = 1.5;
    double rho = -0.7;
    double hurst = 0.1;

    static constexpr std::size_t kFlatCount = 4;
    static constexpr std::size_t kPiecewiseCount = 11;

    /// (xi0, eta, rho, H) or (xi_1..xi_8, eta, rho, H).
    static RBergomiParams from_span(std::span<const double> p);
    void validate() const;
};

/// Log-vol X follows dX = nu dW^H - alpha (X - m) dt, sigma = exp(X).
struct FouParams {
    double nu = 0.5;
    double alpha = 0.5;
    double m = -1.6;
    double x0 = -1.6;
    double hurst = 0.3;
    double rho = -0.5;

    static constexpr std::size_t kCount = 6;

    static FouParams from_span(std::span<const double> p);
    std::array<double, kCount> to_array() const { return {nu, alpha, m, x0, hurst, rho}; }
    void validate() const;
};

enum class McEstimator {
    payoff,       // average of simulated payoffs
    conditional,  // Black-Scholes conditional on the vol driver (mixing formula)
};

struct McConfig {
    std::size_t n_paths = 20000;
    double steps_per_year = 25.0;
    std::uint64_t seed = 1;
    bool antithetic = true;
    McEstimator estimator = McEstimator::conditional;
    std::size_t workers = 0;  // 0 = all cores; results do not depend on it

    void validate() const;
};

struct McSurface {
    VolSurface surface;
    Matrix price;         // undiscounted out-of-the-money prices
    Matrix price_std_err;
    Matrix vol_std_err;
    std::vector<double> forward_mean;  // E[S_T] per maturity
    std::vector<double> forward_std_err;
};

/// Simulated paths on `times` (times[0] == 0). Rows are paths; with
/// antithetic sampling rows 2j and 2j+1 are mirror images.
struct McPaths {
    std::vector<double> times;
    Matrix log_spot;
    Matrix variance;  // instantaneous variance at the left end of each step
    Matrix driver;  // Volterra process for rough Bergomi, log-vol X for fOU
};

/// Union of the maturities with an equispaced refinement of every gap, at
/// least `steps_per_year` steps per year. Starts at 0.
std::vector<double> simulation_times(std::span<const double> maturities, double steps_per_year);

/// Cov(W^H_s, W^H_t) = (s^2H + t^2H - |t-s|^2H) / 2.
Matrix fbm_covariance(std::span<const double> times, double hurst);

/// Fractional Brownian paths at `times` (all > 0) by Cholesky factorization.
Matrix fbm_paths(std::span<const double> times, double hurst, std::size_t n_paths, std::uint64_t seed);

/// Joint covariance of (V_t1..V_tn, W_t1..W_tn) where
/// V_t = int_0^t (t-s)^(H-1/2) dW_s.
Matrix volterra_joint_covariance(std::span<const double> times, double hurst);

McPaths rbergomi_paths(const RBergomiParams& p, std::span<const double> maturities, const McConfig& mc);
McSurface rbergomi_price(const RBergomiParams& p, const VolGrid& grid, const McConfig& mc);
VolSurface rbergomi_surface(const RBergomiParams& p, const VolGrid& grid, const McConfig& mc);

McPaths fou_paths(const FouParams& p, std::span<const double> maturities, const McConfig& mc);
McSurface fou_price(const FouParams& p, const VolGrid& grid, const McConfig& mc);
VolSurface fou_surface(const FouParams& p, const VolGrid& grid, const McConfig& mc);

}  // namespace volcal
