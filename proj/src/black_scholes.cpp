#include "volcal/black_scholes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "volcal/error.hpp"

namespace volcal {

void BsInputs::validate() const {
    if (!(spot > 0.0) || !std::isfinite(spot)) throw ValidationError("spot must be positive");
    if (!(strike > 0.0) || !std::isfinite(strike)) throw ValidationError("strike must be positive");
    if (!(maturity > 0.0) || !std::isfinite(maturity))
        throw ValidationError("maturity must be positive");
    if (!(vol >= 0.0) || !std::isfinite(vol)) throw ValidationError("vol must be non-negative");
    if (!(discount > 0.0 && discount <= 1.0)) throw ValidationError("discount must lie in (0, 1]");
}

namespace {
constexpr double kInvSqrt2 = 0.5 * std::numbers::sqrt2;
constexpr double kInvSqrt2Pi = kInvSqrt2 * std::numbers::inv_sqrtpi;
}  // namespace

double norm_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double bs_otm_price(double forward, double strike, double maturity, double vol) {
    const double s = vol * std::sqrt(maturity);
    if (!(s > 0.0)) return 0.0;
    const double d1 = std::log(forward / strike) / s + 0.5 * s;
    const double d2 = d1 - s;
    if (strike >= forward) return std::max(forward * norm_cdf(d1) - strike * norm_cdf(d2), 0.0);
    return std::max(strike * norm_cdf(-d2) - forward * norm_cdf(-d1), 0.0);
}

double bs_otm_vega(double forward, double strike, double maturity, double vol) {
    const double sqrt_t = std::sqrt(maturity);
    const double s = vol * sqrt_t;
    if (!(s > 0.0)) return 0.0;
    const double d1 = std::log(forward / strike) / s + 0.5 * s;
    return forward * norm_pdf(d1) * sqrt_t;
}

double bs_call(const BsInputs& in) {
    in.validate();
    const double f = in.forward();
    const double intrinsic = std::max(f - in.strike, 0.0);
    return in.discount * (intrinsic + bs_otm_price(f, in.strike, in.maturity, in.vol));
}

double bs_vega(const BsInputs& in) {
    in.validate();
    return in.discount * bs_otm_vega(in.forward(), in.strike, in.maturity, in.vol);
}

double implied_vol(double price, const BsInputs& in) {
    BsInputs probe = in;
    probe.vol = 0.0;
    probe.validate();
    const double f = in.forward();
    const double intrinsic = std::max(f - in.strike, 0.0);
    if (!(price > in.discount * intrinsic) || !(price < in.spot))
        throw PriceOutOfBounds("call price " + std::to_string(price) +
                               " outside the no-arbitrage band (" +
                               std::to_string(in.discount * intrinsic) + ", " +
                               std::to_string(in.spot) + ")");
    const double otm = price / in.discount - intrinsic;
    return implied_vol_otm(otm, f, in.strike, in.maturity);
}

double implied_vol_otm(double otm_price, double forward, double strike, double maturity) {
    const double cap = strike >= forward ? forward : strike;
    if (!(otm_price > 0.0) || !(otm_price < cap))
        throw PriceOutOfBounds("out-of-the-money price " + std::to_string(otm_price) +
                               " outside (0, " + std::to_string(cap) + ")");

    double lo = kMinImpliedVol;
    double hi = kMaxImpliedVol;
    if (!(otm_price < bs_otm_price(forward, strike, maturity, hi)))
        throw PriceOutOfBounds("implied volatility above " + std::to_string(kMaxImpliedVol));
    if (!(otm_price > bs_otm_price(forward, strike, maturity, lo)))
        throw PriceOutOfBounds("implied volatility below " + std::to_string(kMinImpliedVol));

    // Brenner-Subrahmanyam start from the equivalent call price.
    const double call = otm_price + std::max(forward - strike, 0.0);
    double vol = std::clamp(std::sqrt(2.0 * std::numbers::pi / maturity) * call / forward, lo, hi);
    const double log_target = std::log(otm_price);

    // Newton on log price, which stays well scaled for deep out-of-the-money
    // quotes; bisection whenever a step leaves the bracket.
    for (int iter = 0; iter < 100; ++iter) {
        const double model = bs_otm_price(forward, strike, maturity, vol);
        const double f = model > 0.0 ? std::log(model) - log_target : -INFINITY;
        if (f == 0.0) return vol;
        if (f < 0.0)
            lo = vol;
        else
            hi = vol;
        if (std::abs(f) <= 1e-14 || hi - lo <= 1e-15 * hi) return vol;

        double next = NAN;
        if (model > 0.0) {
            const double vega = bs_otm_vega(forward, strike, maturity, vol);
            if (vega > 0.0) next = vol - f * model / vega;
        }
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - vol) <= 1e-15 * vol) return next;
        vol = next;
    }
    throw NoConvergence("implied_vol: no convergence after 100 iterations");
}

}  // namespace volcal
