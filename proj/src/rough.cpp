#include "volcal/rough.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "volcal/black_scholes.hpp"
#include "volcal/error.hpp"
#include "volcal/parallel.hpp"
#include "volcal/rng.hpp"

namespace volcal {

namespace {

constexpr std::size_t kBlockUnits = 128;

// Standard (0.1, 0.3, ..., 1.8) interior breakpoints of the piecewise curve.
const std::vector<double> kBucketBoundaries = {0.1, 0.3, 0.6, 0.9, 1.2, 1.5, 1.8};

void lower_matvec(const Matrix& lower, std::span<const double> z, std::span<double> out) {
    const std::size_t n = lower.rows();
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = lower.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j <= i; ++j) acc += row[j] * z[j];
        out[i] = acc;
    }
}

// One simulated path reduced to what the spot needs: the instantaneous
// variance on each step (left point) and the increment of the Brownian motion
// that drives the volatility.
class PathModel {
public:
    virtual ~PathModel() = default;
    virtual std::size_t gauss_dim() const = 0;
    virtual void map(std::span<const double> z, std::span<double> var_left, std::span<double> dw,
                     std::span<double> driver) const = 0;

    std::vector<double> times;     // times[0] == 0
    std::vector<double> base_var;  // deterministic variance level per step
    double rho = 0.0;
};

class RBergomiModel final : public PathModel {
public:
    RBergomiModel(const RBergomiParams& p, std::vector<double> t) {
        times = std::move(t);
        rho = p.rho;
        const std::span<const double> positive(times.data() + 1, times.size() - 1);
        lower_ = cholesky(volterra_joint_covariance(positive, p.hurst));
        scratch_dim_ = lower_.rows();
        const double two_h = 2.0 * p.hurst;
        level_.resize(times.size());
        for (std::size_t i = 0; i < times.size(); ++i)
            level_[i] = std::log(p.xi(times[i])) - 0.5 * p.eta * p.eta * std::pow(times[i], two_h);
        for (std::size_t i = 0; i + 1 < times.size(); ++i) base_var.push_back(p.xi(times[i]));
        scale_ = p.eta * std::sqrt(two_h);
    }

    std::size_t gauss_dim() const override { return scratch_dim_; }

    void map(std::span<const double> z, std::span<double> var_left, std::span<double> dw,
             std::span<double> driver) const override {
        const std::size_t n = times.size() - 1;
        thread_local std::vector<double> g;
        g.resize(scratch_dim_);
        lower_matvec(lower_, z, g);
        driver[0] = 0.0;
        for (std::size_t i = 1; i <= n; ++i) driver[i] = g[i - 1];
        double w_prev = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            var_left[i] = std::exp(level_[i] + scale_ * driver[i]);
            dw[i] = g[n + i] - w_prev;
            w_prev = g[n + i];
        }
    }

private:
    Matrix lower_;
    std::size_t scratch_dim_ = 0;
    std::vector<double> level_;
    double scale_ = 0.0;
};

class FouModel final : public PathModel {
public:
    FouModel(const FouParams& p, std::vector<double> t) : p_(p) {
        times = std::move(t);
        rho = p.rho;
        const std::span<const double> positive(times.data() + 1, times.size() - 1);
        lower_ = cholesky(fbm_covariance(positive, p.hurst));
        for (std::size_t i = 0; i + 1 < times.size(); ++i) {
            const double mean_x = p.m + (p.x0 - p.m) * std::exp(-p.alpha * times[i]);
            base_var.push_back(std::exp(2.0 * mean_x));
        }
    }

    std::size_t gauss_dim() const override { return lower_.rows(); }

    // The spot noise on step i is correlated with innovation z[i], the new
    // information entering W^H at the end of that step.
    void map(std::span<const double> z, std::span<double> var_left, std::span<double> dw,
             std::span<double> driver) const override {
        const std::size_t n = times.size() - 1;
        thread_local std::vector<double> wh;
        wh.resize(n);
        lower_matvec(lower_, z, wh);
        double x = p_.x0;
        double wh_prev = 0.0;
        driver[0] = x;
        for (std::size_t i = 0; i < n; ++i) {
            const double dt = times[i + 1] - times[i];
            var_left[i] = std::exp(2.0 * x);
            dw[i] = std::sqrt(dt) * z[i];
            x += p_.nu * (wh[i] - wh_prev) - p_.alpha * (x - p_.m) * dt;
            wh_prev = wh[i];
            driver[i + 1] = x;
        }
    }

private:
    FouParams p_;
    Matrix lower_;
};

std::size_t unit_count(const McConfig& mc) { return mc.antithetic ? mc.n_paths / 2 : mc.n_paths; }

std::vector<std::size_t> maturity_nodes(const std::vector<double>& times,
                                        std::span<const double> maturities) {
    std::vector<std::size_t> idx;
    for (double t : maturities) {
        const auto it = std::find(times.begin(), times.end(), t);
        idx.push_back(static_cast<std::size_t>(it - times.begin()));
    }
    return idx;
}

// Price of a call (or put) on a lognormal forward with total standard
// deviation `sd`.
double lognormal_price(double forward, double strike, double sd, bool call) {
    const double otm = bs_otm_price(forward, strike, 1.0, sd);
    if (call) return strike >= forward ? otm : otm + (forward - strike);
    return strike < forward ? otm : otm + (strike - forward);
}

// Adds the price of the out-of-the-money-at-spot option (call for strike >= 1)
// on a lognormal forward, one entry per strike.
void add_lognormal_row(double forward, double sd, std::span<const double> strikes,
                       std::span<const double> log_strikes, std::span<double> out,
                       std::span<const double> shift) {
    constexpr double kInvSqrt2 = 0.70710678118654752440;
    const double log_f = std::log(forward);
    for (std::size_t k = 0; k < strikes.size(); ++k) {
        const double strike = strikes[k];
        double x;
        if (sd > 0.0) {
            const double d1 = (log_f - log_strikes[k]) / sd + 0.5 * sd;
            const double d2 = d1 - sd;
            if (strike >= 1.0)
                x = 0.5 * (forward * std::erfc(-d1 * kInvSqrt2) - strike * std::erfc(-d2 * kInvSqrt2));
            else
                x = 0.5 * (strike * std::erfc(d2 * kInvSqrt2) - forward * std::erfc(d1 * kInvSqrt2));
        } else {
            x = strike >= 1.0 ? std::max(forward - strike, 0.0) : std::max(strike - forward, 0.0);
        }
        out[k] += x - shift[k];
    }
}

McPaths simulate_paths(const PathModel& model, const McConfig& mc) {
    const std::size_t n = model.times.size() - 1;
    McPaths out{model.times, Matrix(mc.n_paths, n + 1), Matrix(mc.n_paths, n), Matrix(mc.n_paths, n + 1)};
    const double rho = model.rho;
    const double rho_bar = std::sqrt(1.0 - rho * rho);
    const std::size_t per_unit = mc.antithetic ? 2 : 1;

    parallel_for(unit_count(mc), mc.workers, [&](std::size_t u) {
        Rng rng = Rng::substream(mc.seed, u);
        std::vector<double> z(model.gauss_dim()), perp(n), var_left(n), dw(n), driver(n + 1);
        rng.fill_normal(z);
        rng.fill_normal(perp);
        for (std::size_t s = 0; s < per_unit; ++s) {
            if (s == 1) {
                for (double& v : z) v = -v;
                for (double& v : perp) v = -v;
            }
            model.map(z, var_left, dw, driver);
            const std::size_t row = u * per_unit + s;
            double log_s = 0.0;
            out.log_spot(row, 0) = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double dt = model.times[i + 1] - model.times[i];
                const double v = var_left[i];
                log_s += std::sqrt(v) * (rho * dw[i] + rho_bar * std::sqrt(dt) * perp[i]) - 0.5 * v * dt;
                out.log_spot(row, i + 1) = log_s;
                out.variance(row, i) = v;
            }
            for (std::size_t i = 0; i <= n; ++i) out.driver(row, i) = driver[i];
        }
    });
    return out;
}

McSurface price_surface(const PathModel& model, const VolGrid& grid, const McConfig& mc) {
    const std::size_t n = model.times.size() - 1;
    const std::size_t n_mat = grid.maturities.size();
    const std::size_t n_strike = grid.strikes.size();
    const std::size_t nodes = n_mat * n_strike;
    const auto mat_idx = maturity_nodes(model.times, grid.maturities);
    const double rho = model.rho;
    const double rho_bar2 = 1.0 - rho * rho;
    const double rho_bar = std::sqrt(rho_bar2);
    const bool conditional = mc.estimator == McEstimator::conditional;
    const std::size_t per_unit = mc.antithetic ? 2 : 1;

    // Control variate: the conditional price with the variance frozen at its
    // deterministic base level. Its mean is a plain Black-Scholes price, which
    // also serves as the shift that keeps the moment sums well conditioned.
    std::vector<double> shift(nodes);
    {
        double base_quad = 0.0;
        std::size_t step = 0;
        for (std::size_t m = 0; m < n_mat; ++m) {
            for (; step < mat_idx[m]; ++step)
                base_quad += model.base_var[step] * (model.times[step + 1] - model.times[step]);
            for (std::size_t k = 0; k < n_strike; ++k) {
                const double strike = grid.strikes[k];
                shift[m * n_strike + k] = lognormal_price(1.0, strike, std::sqrt(base_quad), strike >= 1.0);
            }
        }
    }

    std::vector<double> log_strikes(n_strike);
    for (std::size_t k = 0; k < n_strike; ++k) log_strikes[k] = std::log(grid.strikes[k]);

    const std::size_t units = unit_count(mc);
    const std::size_t blocks = (units + kBlockUnits - 1) / kBlockUnits;
    // Per block and node: sums of x, y, x^2, y^2, xy; then forward sums and squares.
    const std::size_t stride = 5 * nodes + 2 * n_mat;
    std::vector<double> partial(blocks * stride, 0.0);

    parallel_for(blocks, mc.workers, [&](std::size_t b) {
        std::vector<double> z(model.gauss_dim()), perp(n), var_left(n), dw(n), driver(n + 1);
        std::vector<double> xs(nodes), ys(nodes), fwd(n_mat);
        double* acc = partial.data() + b * stride;
        const std::size_t end = std::min(units, (b + 1) * kBlockUnits);
        for (std::size_t u = b * kBlockUnits; u < end; ++u) {
            Rng rng = Rng::substream(mc.seed, u);
            rng.fill_normal(z);
            rng.fill_normal(perp);
            std::fill(xs.begin(), xs.end(), 0.0);
            std::fill(ys.begin(), ys.end(), 0.0);
            std::fill(fwd.begin(), fwd.end(), 0.0);
            for (std::size_t s = 0; s < per_unit; ++s) {
                if (s == 1) {
                    for (double& v : z) v = -v;
                    for (double& v : perp) v = -v;
                }
                model.map(z, var_left, dw, driver);
                double log_driven = 0.0;  // rho-part of log S, a martingale exponent
                double log_perp = 0.0;
                double quad = 0.0;        // integrated variance
                double log_base = 0.0;    // same with frozen variance
                double base_quad = 0.0;
                std::size_t step = 0;
                for (std::size_t m = 0; m < n_mat; ++m) {
                    for (; step < mat_idx[m]; ++step) {
                        const double dt = model.times[step + 1] - model.times[step];
                        const double v = var_left[step];
                        const double sv = std::sqrt(v);
                        const double v0 = model.base_var[step];
                        log_driven += rho * sv * dw[step] - 0.5 * rho * rho * v * dt;
                        log_perp += rho_bar * sv * std::sqrt(dt) * perp[step] - 0.5 * rho_bar2 * v * dt;
                        quad += v * dt;
                        log_base += rho * std::sqrt(v0) * dw[step] - 0.5 * rho * rho * v0 * dt;
                        base_quad += v0 * dt;
                    }
                    const double spot = std::exp(log_driven + log_perp);
                    fwd[m] += spot - 1.0;
                    const double driven = std::exp(log_driven);
                    const double base = std::exp(log_base);
                    const double sd = std::sqrt(rho_bar2 * quad);
                    const double base_sd = std::sqrt(rho_bar2 * base_quad);
                    const std::span<double> x_row(xs.data() + m * n_strike, n_strike);
                    const std::span<const double> shift_row(shift.data() + m * n_strike, n_strike);
                    if (conditional) {
                        add_lognormal_row(driven, sd, grid.strikes, log_strikes, x_row, shift_row);
                        add_lognormal_row(base, base_sd, grid.strikes, log_strikes,
                                          std::span<double>(ys.data() + m * n_strike, n_strike), shift_row);
                    } else {
                        add_lognormal_row(spot, 0.0, grid.strikes, log_strikes, x_row, shift_row);
                    }
                }
            }
            const double inv = 1.0 / static_cast<double>(per_unit);
            for (std::size_t j = 0; j < nodes; ++j) {
                const double x = xs[j] * inv;
                const double y = ys[j] * inv;
                acc[j] += x;
                acc[nodes + j] += y;
                acc[2 * nodes + j] += x * x;
                acc[3 * nodes + j] += y * y;
                acc[4 * nodes + j] += x * y;
            }
            for (std::size_t m = 0; m < n_mat; ++m) {
                const double x = fwd[m] * inv;
                acc[5 * nodes + m] += x;
                acc[5 * nodes + n_mat + m] += x * x;
            }
        }
    });

    std::vector<double> total(stride, 0.0);
    for (std::size_t b = 0; b < blocks; ++b)
        for (std::size_t j = 0; j < stride; ++j) total[j] += partial[b * stride + j];

    const double count = static_cast<double>(units);
    auto cov = [&](double sum_a, double sum_b, double sum_ab) {
        return (sum_ab - sum_a * sum_b / count) / (count - 1.0);
    };

    McSurface out{VolSurface{grid, Matrix(n_mat, n_strike)}, Matrix(n_mat, n_strike),
                  Matrix(n_mat, n_strike), Matrix(n_mat, n_strike), std::vector<double>(n_mat),
                  std::vector<double>(n_mat)};
    for (std::size_t m = 0; m < n_mat; ++m) {
        const double fs = total[5 * nodes + m];
        out.forward_mean[m] = 1.0 + fs / count;
        out.forward_std_err[m] = std::sqrt(std::max(cov(fs, fs, total[5 * nodes + n_mat + m]), 0.0) / count);
        const double maturity = grid.maturities[m];
        for (std::size_t k = 0; k < n_strike; ++k) {
            const std::size_t j = m * n_strike + k;
            const double sx = total[j];
            const double sy = total[nodes + j];
            const double vx = std::max(cov(sx, sx, total[2 * nodes + j]), 0.0);
            const double vy = std::max(cov(sy, sy, total[3 * nodes + j]), 0.0);
            const double cxy = cov(sx, sy, total[4 * nodes + j]);
            const double beta = vy > 0.0 ? std::clamp(cxy / vy, 0.0, 1.0) : 0.0;
            const double price = shift[j] + (sx - beta * sy) / count;
            const double err = std::sqrt(std::max(vx - beta * cxy, 0.0) / count);
            const double strike = grid.strikes[k];
            out.price(m, k) = price;
            out.price_std_err(m, k) = err;
            double vol;
            try {
                vol = implied_vol_otm(price, 1.0, strike, maturity);
            } catch (const PriceOutOfBounds& e) {
                throw PriceOutOfBounds("strike " + std::to_string(strike) + ", maturity " +
                                       std::to_string(maturity) + ": " + e.what());
            }
            out.surface.vols(m, k) = vol;
            const double vega = bs_otm_vega(1.0, strike, maturity, vol);
            out.vol_std_err(m, k) = vega > 0.0 ? err / vega : INFINITY;
        }
    }
    return out;
}

}  // namespace

ForwardVarianceCurve ForwardVarianceCurve::flat(double xi0) { return {{}, {xi0}}; }

ForwardVarianceCurve ForwardVarianceCurve::piecewise(std::span<const double> values) {
    if (values.size() != kBucketBoundaries.size() + 1)
        throw DimensionError("piecewise forward variance needs 8 values, got " +
                             std::to_string(values.size()));
    return {kBucketBoundaries, std::vector<double>(values.begin(), values.end())};
}

double ForwardVarianceCurve::operator()(double t) const {
    const auto it = std::upper_bound(boundaries.begin(), boundaries.end(), t);
    return values[static_cast<std::size_t>(it - boundaries.begin())];
}

void ForwardVarianceCurve::validate() const {
    if (values.size() != boundaries.size() + 1)
        throw DimensionError("forward variance curve needs one more value than breakpoints");
    for (double v : values)
        if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("forward variance must be positive");
    for (std::size_t i = 0; i < boundaries.size(); ++i)
        if (!(boundaries[i] > (i ? boundaries[i - 1] : 0.0)))
            throw ValidationError("forward variance breakpoints must be positive and ascending");
}

RBergomiParams RBergomiParams::from_span(std::span<const double> p) {
    RBergomiParams out;
    if (p.size() == kFlatCount) {
        out.xi = ForwardVarianceCurve::flat(p[0]);
    } else if (p.size() == kPiecewiseCount) {
        out.xi = ForwardVarianceCurve::piecewise(p.first(8));
    } else {
        throw DimensionError("rough Bergomi expects 4 or 11 parameters, got " + std::to_string(p.size()));
    }
    const std::size_t k = p.size() - 3;
    out.eta = p[k];
    out.rho = p[k + 1];
    out.hurst = p[k + 2];
    return out;
}

void RBergomiParams::validate() const {
    xi.validate();
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ValidationError("rough Bergomi eta must be positive");
    if (!(rho > -1.0 && rho < 1.0)) throw ValidationError("rough Bergomi rho must lie in (-1, 1)");
    if (!(hurst > 0.0 && hurst <= 0.5)) throw ValidationError("rough Bergomi H must lie in (0, 0.5]");
}

FouParams FouParams::from_span(std::span<const double> p) {
    if (p.size() != kCount)
        throw DimensionError("fOU expects 6 parameters, got " + std::to_string(p.size()));
    return FouParams{p[0], p[1], p[2], p[3], p[4], p[5]};
}

void FouParams::validate() const {
    if (!(nu > 0.0) || !std::isfinite(nu)) throw ValidationError("fOU nu must be positive");
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ValidationError("fOU alpha must be non-negative");
    if (!std::isfinite(m) || !std::isfinite(x0)) throw ValidationError("fOU m and x0 must be finite");
    if (!(hurst > 0.0 && hurst < 1.0)) throw ValidationError("fOU H must lie in (0, 1)");
    if (!(rho > -1.0 && rho < 1.0)) throw ValidationError("fOU rho must lie in (-1, 1)");
}

void McConfig::validate() const {
    if (n_paths < 2) throw ValidationError("Monte Carlo needs at least 2 paths");
    if (antithetic && n_paths % 2 != 0)
        throw ValidationError("antithetic sampling needs an even path count");
    if (!(steps_per_year > 0.0) || !std::isfinite(steps_per_year))
        throw ValidationError("steps per year must be positive");
}

std::vector<double> simulation_times(std::span<const double> maturities, double steps_per_year) {
    if (!(steps_per_year > 0.0)) throw ValidationError("steps per year must be positive");
    std::vector<double> times{0.0};
    double prev = 0.0;
    for (double t : maturities) {
        if (!(t > prev) || !std::isfinite(t))
            throw ValidationError("maturities must be positive and strictly ascending");
        const double len = t - prev;
        const auto steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len * steps_per_year - 1e-9)));
        for (std::size_t j = 1; j < steps; ++j) times.push_back(prev + len * static_cast<double>(j) / steps);
        times.push_back(t);
        prev = t;
    }
    return times;
}

Matrix fbm_covariance(std::span<const double> times, double hurst) {
    if (!(hurst > 0.0 && hurst < 1.0)) throw ValidationError("Hurst exponent must lie in (0, 1)");
    for (std::size_t i = 0; i < times.size(); ++i)
        if (!(times[i] > (i ? times[i - 1] : 0.0)))
            throw ValidationError("times must be positive and strictly ascending");
    const double two_h = 2.0 * hurst;
    const std::size_t n = times.size();
    Matrix c(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            const double s = times[j];
            const double t = times[i];
            c(i, j) = c(j, i) = 0.5 * (std::pow(s, two_h) + std::pow(t, two_h) - std::pow(t - s, two_h));
        }
    }
    return c;
}

Matrix fbm_paths(std::span<const double> times, double hurst, std::size_t n_paths, std::uint64_t seed) {
    const Matrix lower = cholesky(fbm_covariance(times, hurst));
    const std::size_t n = times.size();
    Matrix out(n_paths, n);
    std::vector<double> z(n);
    for (std::size_t p = 0; p < n_paths; ++p) {
        Rng rng = Rng::substream(seed, p);
        rng.fill_normal(z);
        lower_matvec(lower, z, out.row(p));
    }
    return out;
}

Matrix volterra_joint_covariance(std::span<const double> times, double hurst) {
    if (!(hurst > 0.0 && hurst <= 0.5)) throw ValidationError("Hurst exponent must lie in (0, 0.5]");
    for (std::size_t i = 0; i < times.size(); ++i)
        if (!(times[i] > (i ? times[i - 1] : 0.0)))
            throw ValidationError("times must be positive and strictly ascending");
    const double a = hurst - 0.5;
    const std::size_t n = times.size();
    Matrix c(2 * n, 2 * n);

    // int_0^s (s-u)^a (t-u)^a du for s < t via 2F1(-a, 1; a+2; s/t).
    auto vv = [&](double s, double t) {
        if (s == t) return std::pow(t, 2.0 * a + 1.0) / (2.0 * a + 1.0);
        const double z = s / t;
        double term = 1.0;
        double sum = 1.0;
        for (long k = 1;; ++k) {
            term *= (k - 1.0 - a) / (k + a + 1.0) * z;
            sum += term;
            if (std::abs(term) * z <= 1e-17 * (1.0 - z) * std::abs(sum)) break;
            if (k > 50'000'000) throw NoConvergence("Volterra covariance series did not converge");
        }
        return std::pow(s, a + 1.0) * std::pow(t, a) / (a + 1.0) * sum;
    };

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            c(i, j) = c(j, i) = vv(times[j], times[i]);
            c(n + i, n + j) = c(n + j, n + i) = times[j];
        }
        const double t = times[i];
        for (std::size_t j = 0; j < n; ++j) {
            const double lo = std::min(t, times[j]);
            const double cov = (std::pow(t, a + 1.0) - std::pow(t - lo, a + 1.0)) / (a + 1.0);
            c(i, n + j) = c(n + j, i) = cov;
        }
    }
    return c;
}

McPaths rbergomi_paths(const RBergomiParams& p, std::span<const double> maturities, const McConfig& mc) {
    p.validate();
    mc.validate();
    return simulate_paths(RBergomiModel(p, simulation_times(maturities, mc.steps_per_year)), mc);
}

McSurface rbergomi_price(const RBergomiParams& p, const VolGrid& grid, const McConfig& mc) {
    p.validate();
    grid.validate();
    mc.validate();
    return price_surface(RBergomiModel(p, simulation_times(grid.maturities, mc.steps_per_year)), grid, mc);
}

VolSurface rbergomi_surface(const RBergomiParams& p, const VolGrid& grid, const McConfig& mc) {
    return rbergomi_price(p, grid, mc).surface;
}

McPaths fou_paths(const FouParams& p, std::span<const double> maturities, const McConfig& mc) {
    p.validate();
    mc.validate();
    return simulate_paths(FouModel(p, simulation_times(maturities, mc.steps_per_year)), mc);
}

McSurface fou_price(const FouParams& p, const VolGrid& grid, const McConfig& mc) {
    p.validate();
    grid.validate();
    mc.validate();
    return price_surface(FouModel(p, simulation_times(grid.maturities, mc.steps_per_year)), grid, mc);
}

VolSurface fou_surface(const FouParams& p, const VolGrid& grid, const McConfig& mc) {
    return fou_price(p, grid, mc).surface;
}

}  // namespace volcal
