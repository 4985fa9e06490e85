#pragma once

#include <array>
#include <complex>
#include <span>

#include "volcal/vol_surface.hpp"

namespace volcal {

struct HestonParams {
    double v0 = 0.04;
    double kappa = 1.0;
    double theta = 0.04;
    double xi = 0.3;  // vol of vol
    double rho = -0.5;

    static constexpr std::size_t kCount = 5;

    static HestonParams from_span(std::span<const double> p);
    std::array<double, kCount> to_array() const { return {v0, kappa, theta, xi, rho}; }
    void validate() const;
};

/// Log of E[exp(iu·ln(S_T/S_0))] under zero rates. Uses the rotation-free
/// ("little trap") branch with the vol-of-vol divisions rewritten so the
/// xi -> 0 limit stays exact.
std::complex<double> heston_log_cf(const HestonParams& p, std::complex<double> u, double maturity);

/// First time at which E[S_T^power] becomes infinite (+inf if never).
double heston_explosion_time(const HestonParams& p, double power);

/// Undiscounted price of the out-of-the-money option (call if strike >= 1,
/// put otherwise), spot 1 and zero rates.
double heston_otm_price(const HestonParams& p, double strike, double maturity);

double heston_call(const HestonParams& p, double strike, double maturity);

VolSurface heston_surface(const HestonParams& p, const VolGrid& grid);

}  // namespace volcal
