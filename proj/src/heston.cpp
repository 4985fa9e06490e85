#include "volcal/heston.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "volcal/black_scholes.hpp"
#include "volcal/error.hpp"

namespace volcal {

namespace {

using cplx = std::complex<double>;

struct GaussLegendre {
    std::vector<double> nodes;  // on (0, 1)
    std::vector<double> weights;
};

// Nodes by Newton iteration on P_n, mapped from (-1, 1) to (0, 1).
GaussLegendre make_gauss_legendre(int n) {
    GaussLegendre gl{std::vector<double>(n), std::vector<double>(n)};
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p1 = 1.0;
            double p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
            }
            dp = n * (z * p1 - p2) / (z * z - 1.0);
            const double step = p1 / dp;
            z -= step;
            if (std::abs(step) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        gl.nodes[i] = 0.5 * (1.0 - z);
        gl.nodes[n - 1 - i] = 0.5 * (1.0 + z);
        gl.weights[i] = gl.weights[n - 1 - i] = 0.5 * w;
    }
    return gl;
}

const GaussLegendre& quadrature_rule() {
    static const GaussLegendre rule = make_gauss_legendre(128);
    return rule;
}

// log1p(z)/z, accurate for small |z|.
cplx log1p_over_z(cplx z) {
    if (std::abs(z) < 0.05) {
        cplx sum = 0.0;
        cplx term = 1.0;
        for (int k = 1; k <= 14; ++k) {
            sum += term / static_cast<double>(k);
            term *= -z;
        }
        return sum;
    }
    return std::log(1.0 + z) / z;
}

// Mean variance over [0, T] of the deterministic (xi = 0) variance path.
double mean_variance(const HestonParams& p, double maturity) {
    const double kt = p.kappa * maturity;
    const double decay = kt > 1e-8 ? -std::expm1(-kt) / kt : 1.0 - 0.5 * kt;
    return p.theta + (p.v0 - p.theta) * decay;
}

}  // namespace

HestonParams HestonParams::from_span(std::span<const double> p) {
    if (p.size() != kCount)
        throw DimensionError("heston expects 5 parameters, got " + std::to_string(p.size()));
    return HestonParams{p[0], p[1], p[2], p[3], p[4]};
}

void HestonParams::validate() const {
    for (double v : {v0, kappa, theta, xi})
        if (!(v > 0.0) || !std::isfinite(v))
            throw ValidationError("heston v0, kappa, theta, xi must be positive");
    if (!(rho > -1.0 && rho < 1.0)) throw ValidationError("heston rho must lie in (-1, 1)");
}

cplx heston_log_cf(const HestonParams& p, cplx u, double maturity) {
    const cplx i(0.0, 1.0);
    const double xi2 = p.xi * p.xi;
    const cplx beta = p.kappa - p.rho * p.xi * i * u;
    const cplx q = u * (u + i);
    const cplx d = std::sqrt(beta * beta + xi2 * q);
    const cplx beta_plus_d = beta + d;
    // a = (beta - d) / xi^2 and g = (beta - d) / (beta + d), without dividing by xi.
    const cplx a = -q / beta_plus_d;
    const cplx g = a * xi2 / beta_plus_d;
    const cplx e = std::exp(-d * maturity);
    const cplx one_minus_e = 1.0 - e;

    const cplx big_d = a * one_minus_e / (1.0 - g * e);
    // (1/xi^2) * log((1 - g e) / (1 - g)) = log1p(z)/z * z/xi^2
    const cplx z = g * one_minus_e / (1.0 - g);
    const cplx z_over_xi2 = a * one_minus_e / (beta_plus_d * (1.0 - g));
    const cplx log_term = log1p_over_z(z) * z_over_xi2;

    const cplx big_c = p.kappa * p.theta * (a * maturity - 2.0 * log_term);
    return big_c + big_d * p.v0;
}

double heston_explosion_time(const HestonParams& p, double power) {
    if (power * (power - 1.0) <= 0.0) return INFINITY;
    // Riccati B' = xi^2/2 B^2 - k B + (power^2 - power)/2 for the moment E[S^power].
    const double k = p.kappa - p.rho * p.xi * power;
    const double disc = k * k - p.xi * p.xi * (power * power - power);
    if (disc >= 0.0) {
        if (k >= 0.0) return INFINITY;
        const double s = std::sqrt(disc);
        return std::log((k - s) / (k + s)) / s;
    }
    const double s = std::sqrt(-disc);
    return 2.0 / s * (0.5 * std::numbers::pi + std::atan(k / s));
}

double heston_otm_price(const HestonParams& p, double strike, double maturity) {
    p.validate();
    if (!(strike > 0.0) || !(maturity > 0.0))
        throw ValidationError("heston pricing needs positive strike and maturity");

    // Damped Fourier inversion of the out-of-the-money option. The damping
    // exponent alpha > 0 yields the call, alpha < -1 the put; it is chosen to
    // minimise the integrand at the origin over the moment-admissible range,
    // which keeps relative accuracy for deep out-of-the-money quotes.
    const bool call_side = strike >= 1.0;
    const double log_k = std::log(strike);

    // Admissible moment powers: (1, p_hi) for calls, (p_lo, 0) for puts.
    constexpr double kPowerCap = 1000.0;
    const double anchor = call_side ? 1.0 : 0.0;
    const double direction = call_side ? 1.0 : -1.0;
    auto admissible = [&](double dist) {
        return heston_explosion_time(p, anchor + direction * dist) > maturity;
    };
    double reach = kPowerCap;
    if (!admissible(reach)) {
        double lo = 0.0;
        for (int it = 0; it < 200 && reach - lo > 1e-10 * reach; ++it) {
            const double mid = 0.5 * (lo + reach);
            (admissible(mid) ? lo : reach) = mid;
        }
        reach = lo;
    }
    if (!(reach > 0.0)) throw NonFiniteError("heston moments explode at every damping exponent");

    auto log_bound = [&](double dist) {
        const double power = anchor + direction * dist;
        const double alpha = power - 1.0;
        const double log_m = heston_log_cf(p, cplx(0.0, -power), maturity).real();
        return -alpha * log_k + log_m - std::log(alpha * power);
    };
    // Golden-section search; the bound is convex in the exponent.
    const double invphi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = reach * 1e-6;
    double b = reach * (1.0 - 1e-3);
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = log_bound(c);
    double fd = log_bound(d);
    for (int it = 0; it < 60 && b - a > 1e-6 * (1.0 + a); ++it) {
        if (!(fc > fd)) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = log_bound(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = log_bound(d);
        }
    }
    const double alpha = anchor + direction * 0.5 * (a + b) - 1.0;

    const double vol_ref = std::sqrt(mean_variance(p, maturity));
    const double scale = 1.0 / std::max(vol_ref * std::sqrt(maturity), 1e-3);
    const cplx i(0.0, 1.0);
    const auto& rule = quadrature_rule();
    double integral = 0.0;
    for (std::size_t n = 0; n < rule.nodes.size(); ++n) {
        const double t = rule.nodes[n];
        const double u = scale * t / (1.0 - t);
        const double jac = scale / ((1.0 - t) * (1.0 - t));
        const cplx log_phi = heston_log_cf(p, cplx(u, -(alpha + 1.0)), maturity);
        const cplx denom = (alpha + i * u) * (alpha + 1.0 + i * u);
        const double f = (std::exp(log_phi - (alpha + i * u) * log_k) / denom).real();
        if (!std::isfinite(f))
            throw NonFiniteError("heston integrand is not finite; parameters are degenerate");
        integral += rule.weights[n] * jac * f;
    }
    return integral / std::numbers::pi;
}

double heston_call(const HestonParams& p, double strike, double maturity) {
    return heston_otm_price(p, strike, maturity) + std::max(1.0 - strike, 0.0);
}

VolSurface heston_surface(const HestonParams& p, const VolGrid& grid) {
    p.validate();
    grid.validate();
    VolSurface s{grid, Matrix(grid.maturities.size(), grid.strikes.size())};
    for (std::size_t m = 0; m < grid.maturities.size(); ++m) {
        for (std::size_t k = 0; k < grid.strikes.size(); ++k) {
            const double strike = grid.strikes[k];
            const double maturity = grid.maturities[m];
            s.vols(m, k) = implied_vol_otm(heston_otm_price(p, strike, maturity), 1.0, strike, maturity);
        }
    }
    return s;
}

}  // namespace volcal
