#pragma once

namespace volcal {

/// Inputs to the Black-Scholes call formula. Spot is normalised to 1, so
/// strikes are moneyness levels.
struct BsInputs {
    double spot = 1.0;
    double strike = 1.0;
    double maturity = 1.0;  // years
    double vol = 0.0;       // annualised; ignored by implied_vol
    double discount = 1.0;  // D_T in (0, 1]

    double forward() const { return spot / discount; }
    void validate() const;
};

inline constexpr double kMinImpliedVol = 1e-6;
inline constexpr double kMaxImpliedVol = 5.0;

double norm_cdf(double x);
double norm_pdf(double x);

double bs_call(const BsInputs& in);
double bs_vega(const BsInputs& in);

/// Black-Scholes volatility reproducing a discounted call price. Throws
/// PriceOutOfBounds when the price is not strictly inside (intrinsic, spot) or
/// its volatility falls outside [kMinImpliedVol, kMaxImpliedVol].
double implied_vol(double price, const BsInputs& in);

// Undiscounted forward-measure helpers. The out-of-the-money option is the
// call for strike >= forward and the put otherwise; working with it keeps
// deep in- and out-of-the-money quotes at full relative precision.
double bs_otm_price(double forward, double strike, double maturity, double vol);
double bs_otm_vega(double forward, double strike, double maturity, double vol);
double implied_vol_otm(double otm_price, double forward, double strike, double maturity);

}  // namespace volcal
