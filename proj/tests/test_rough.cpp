#include <doctest.h>

#include <cmath>
#include <random>

#include "volcal/black_scholes.hpp"
#include "volcal/error.hpp"
#include "volcal/rough.hpp"

using namespace volcal;

namespace {

std::vector<double> uniform_times(std::size_t n, double dt) {
    std::vector<double> t;
    for (std::size_t i = 1; i <= n; ++i) t.push_back(dt * static_cast<double>(i));
    return t;
}

// Cov(V_s, V_t) = int_0^s (s-u)^a (t-u)^a du, after x = (s-u)^(a+1) the
// integrand is smooth for s < t; composite Simpson.
double volterra_cov_oracle(double s, double t, double a) {
    const double top = std::pow(s, a + 1.0);
    const int n = 200000;
    const double h = top / n;
    auto f = [&](double x) { return std::pow(t - s + std::pow(x, 1.0 / (a + 1.0)), a); };
    double sum = f(0.0) + f(top);
    for (int i = 1; i < n; ++i) sum += f(i * h) * (i % 2 ? 4.0 : 2.0);
    return sum * h / 3.0 / (a + 1.0);
}

McConfig mc_config(std::size_t paths, std::uint64_t seed = 7) {
    McConfig mc;
    mc.n_paths = paths;
    mc.seed = seed;
    return mc;
}

}  // namespace

TEST_SUITE("rough") {

TEST_CASE("simulation times contain every maturity") {
    const VolGrid g = VolGrid::standard();
    const auto t = simulation_times(g.maturities, 25.0);
    CHECK(t.front() == 0.0);
    CHECK(t.size() == 54);
    for (double m : g.maturities) CHECK(std::find(t.begin(), t.end(), m) != t.end());
    for (std::size_t i = 1; i < t.size(); ++i) {
        CHECK(t[i] > t[i - 1]);
        CHECK(t[i] - t[i - 1] <= 1.0 / 25.0 + 1e-12);
    }
    CHECK_THROWS_AS(simulation_times(std::vector<double>{0.5, 0.3}, 25.0), ValidationError);
}

TEST_CASE("fbm covariance") {
    const auto t = uniform_times(6, 0.3);
    const Matrix bm = fbm_covariance(t, 0.5);
    for (std::size_t i = 0; i < t.size(); ++i)
        for (std::size_t j = 0; j < t.size(); ++j) CHECK(std::abs(bm(i, j) - std::min(t[i], t[j])) <= 1e-15);
    for (double h : {0.05, 0.1, 0.3, 0.7}) {
        const Matrix c = fbm_covariance(t, h);
        for (std::size_t i = 0; i < t.size(); ++i) {
            CHECK(std::abs(c(i, i) - std::pow(t[i], 2 * h)) <= 1e-15);
            for (std::size_t j = 0; j < t.size(); ++j) CHECK(c(i, j) == c(j, i));
        }
        for (double v : sym_eigen(c).values) CHECK(v >= -1e-10);
    }
}

TEST_CASE("fbm sample covariance") {
    const auto t = uniform_times(10, 0.1);
    const std::size_t n = 100000;
    const Matrix paths = fbm_paths(t, 0.3, n, 11);
    const Matrix c = fbm_covariance(t, 0.3);
    for (std::size_t i = 0; i < t.size(); ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < n; ++r) s += paths(r, i) * paths(r, j);
            const double se = std::sqrt((c(i, i) * c(j, j) + c(i, j) * c(i, j)) / n);
            CHECK(std::abs(s / n - c(i, j)) <= 3.0 * se);
        }
}

TEST_CASE("volterra joint covariance matches quadrature") {
    const std::vector<double> t{0.05, 0.3, 1.0, 2.0};
    for (double h : {0.07, 0.25, 0.45}) {
        const double a = h - 0.5;
        const Matrix c = volterra_joint_covariance(t, h);
        const std::size_t n = t.size();
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(c(i, i) - std::pow(t[i], 2 * a + 1) / (2 * a + 1)) <= 1e-13);
            CHECK(std::abs(c(n + i, n + i) - t[i]) <= 1e-15);
            for (std::size_t j = 0; j < i; ++j) {
                CAPTURE(h);
                const double ref = volterra_cov_oracle(t[j], t[i], a);
                CHECK(std::abs(c(i, j) - ref) <= 1e-8 * std::abs(ref));
                CHECK(c(i, j) == c(j, i));
            }
            for (std::size_t j = 0; j < n; ++j) {
                const double m = std::min(t[i], t[j]);
                const double ref = (std::pow(t[i], a + 1) - std::pow(t[i] - m, a + 1)) / (a + 1);
                CHECK(std::abs(c(i, n + j) - ref) <= 1e-13);
            }
        }
    }
}

TEST_CASE("rough Bergomi with frozen variance is flat") {
    RBergomiParams p;
    p.xi = ForwardVarianceCurve::flat(0.04);
    p.eta = 1e-8;
    const auto r = rbergomi_price(p, VolGrid::standard(), mc_config(20000));
    for (std::size_t i = 0; i < r.surface.vols.size(); ++i) {
        const double err = std::abs(r.surface.vols.data()[i] - 0.2);
        CHECK(err <= std::max(3.0 * r.vol_std_err.data()[i], 1e-3));
    }
}

TEST_CASE("rough Bergomi spot is a martingale") {
    RBergomiParams p;
    p.xi = ForwardVarianceCurve::flat(0.04);
    p.eta = 1.5;
    p.rho = -0.7;
    p.hurst = 0.1;
    const auto r = rbergomi_price(p, VolGrid::standard(), mc_config(40000));
    for (std::size_t m = 0; m < r.forward_mean.size(); ++m)
        CHECK(std::abs(r.forward_mean[m] - 1.0) <= 3.0 * r.forward_std_err[m]);
}

TEST_CASE("rough Bergomi at H = 1/2 matches an Euler scheme") {
    // Lognormal variance v_t = xi exp(eta W_t - eta^2 t / 2), simulated directly.
    const double xi = 0.04, eta = 1.0, rho = -0.7, T = 0.1;
    const int steps = 100;
    const std::size_t n = 100000;
    const double dt = T / steps;
    std::mt19937_64 gen(12345);
    std::normal_distribution<double> z;
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double w = 0.0, x = 0.0;
        for (int k = 0; k < steps; ++k) {
            const double v = xi * std::exp(eta * w - 0.5 * eta * eta * k * dt);
            const double dw = std::sqrt(dt) * z(gen);
            const double dz = rho * dw + std::sqrt(1 - rho * rho) * std::sqrt(dt) * z(gen);
            x += std::sqrt(v) * dz - 0.5 * v * dt;
            w += dw;
        }
        const double payoff = std::max(std::exp(x) - 1.0, 0.0);
        sum += payoff;
        sum2 += payoff * payoff;
    }
    const double oracle = sum / n;
    const double oracle_se = std::sqrt((sum2 / n - oracle * oracle) / (n - 1));

    RBergomiParams p;
    p.xi = ForwardVarianceCurve::flat(xi);
    p.eta = eta;
    p.rho = rho;
    p.hurst = 0.5;
    McConfig mc = mc_config(n);
    mc.steps_per_year = steps / T;
    const auto r = rbergomi_price(p, VolGrid{{1.0}, {T}}, mc);
    const double se = std::hypot(oracle_se, r.price_std_err(0, 0));
    CHECK(std::abs(r.price(0, 0) - oracle) <= 3.0 * se);
}

TEST_CASE("total implied variance grows with maturity") {
    RBergomiParams p;
    p.xi = ForwardVarianceCurve::flat(0.05);
    p.eta = 1.2;
    p.hurst = 0.2;
    const VolGrid g = VolGrid::standard();
    const auto r = rbergomi_price(p, g, mc_config(20000));
    const std::size_t atm = 5;
    for (std::size_t m = 1; m < g.maturities.size(); ++m) {
        const double w0 = r.surface.vols(m - 1, atm) * r.surface.vols(m - 1, atm) * g.maturities[m - 1];
        const double w1 = r.surface.vols(m, atm) * r.surface.vols(m, atm) * g.maturities[m];
        const double se = 2 * (r.surface.vols(m, atm) * g.maturities[m] * r.vol_std_err(m, atm) +
                               r.surface.vols(m - 1, atm) * g.maturities[m - 1] * r.vol_std_err(m - 1, atm));
        CHECK(w1 - w0 >= -3.0 * se);
    }
}

TEST_CASE("piecewise forward variance") {
    const std::vector<double> v{0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08};
    const auto c = ForwardVarianceCurve::piecewise(v);
    CHECK(c(0.0) == 0.01);
    CHECK(c(0.1) == 0.02);
    CHECK(c(0.2) == 0.02);
    CHECK(c(1.9) == 0.08);
    CHECK(c(5.0) == 0.08);
    CHECK_THROWS_AS(ForwardVarianceCurve::piecewise(std::vector<double>{0.01, 0.02}), DimensionError);
    const auto p = RBergomiParams::from_span(std::vector<double>{0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08,
                                                                 1.5, -0.7, 0.1});
    CHECK(p.xi.values == v);
    CHECK(p.eta == 1.5);
}

TEST_CASE("results do not depend on the worker count") {
    RBergomiParams p;
    McConfig a = mc_config(4000);
    a.workers = 1;
    McConfig b = a;
    b.workers = 3;
    const auto ra = rbergomi_price(p, VolGrid::standard(), a);
    const auto rb = rbergomi_price(p, VolGrid::standard(), b);
    CHECK(ra.price == rb.price);
    CHECK(ra.surface.vols == rb.surface.vols);
    const FouParams f;
    CHECK(fou_surface(f, VolGrid::standard(), a).vols == fou_surface(f, VolGrid::standard(), b).vols);
}

TEST_CASE("antithetic paths mirror each other") {
    RBergomiParams p;
    const auto paths = rbergomi_paths(p, std::vector<double>{0.5, 1.0}, mc_config(10));
    for (std::size_t j = 0; j < 5; ++j)
        for (std::size_t k = 0; k < paths.driver.cols(); ++k)
            CHECK(paths.driver(2 * j, k) == -paths.driver(2 * j + 1, k));
}

TEST_CASE("fOU with frozen vol is flat") {
    FouParams p;
    p.nu = 1e-8;
    p.m = std::log(0.25);
    p.x0 = p.m;
    const auto r = fou_price(p, VolGrid::standard(), mc_config(20000));
    for (std::size_t i = 0; i < r.surface.vols.size(); ++i) {
        const double err = std::abs(r.surface.vols.data()[i] - 0.25);
        CHECK(err <= std::max(3.0 * r.vol_std_err.data()[i], 1e-3));
    }
}

TEST_CASE("fOU log-vol without mean reversion is a scaled Brownian motion") {
    FouParams p;
    p.nu = 0.8;
    p.alpha = 0.0;
    p.hurst = 0.5;
    const std::size_t n = 20000;
    const auto paths = fou_paths(p, std::vector<double>{1.0, 2.0}, mc_config(n));
    for (double T : {1.0, 2.0}) {
        const auto it = std::find(paths.times.begin(), paths.times.end(), T);
        const auto col = static_cast<std::size_t>(it - paths.times.begin());
        double s = 0.0, s2 = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double x = paths.driver(r, col) - p.x0;
            s += x;
            s2 += x * x;
        }
        const double var = (s2 - s * s / n) / (n - 1);
        const double ref = p.nu * p.nu * T;
        CHECK(std::abs(var - ref) <= 3.0 * ref * std::sqrt(2.0 / (n - 1)));
    }
}

TEST_CASE("fOU spot is a martingale") {
    FouParams p;
    const auto r = fou_price(p, VolGrid::standard(), mc_config(20000));
    for (std::size_t m = 0; m < r.forward_mean.size(); ++m)
        CHECK(std::abs(r.forward_mean[m] - 1.0) <= 3.0 * r.forward_std_err[m]);
}

TEST_CASE("payoff and conditional estimators agree") {
    RBergomiParams p;
    McConfig a = mc_config(40000);
    McConfig b = a;
    b.estimator = McEstimator::payoff;
    const VolGrid g{{0.8, 1.0, 1.2}, {0.3, 1.0}};
    const auto ra = rbergomi_price(p, g, a);
    const auto rb = rbergomi_price(p, g, b);
    for (std::size_t i = 0; i < ra.price.size(); ++i)
        CHECK(std::abs(ra.price.data()[i] - rb.price.data()[i]) <=
              3.0 * std::hypot(ra.price_std_err.data()[i], rb.price_std_err.data()[i]));
}

TEST_CASE("configuration checks") {
    McConfig mc = mc_config(11);
    CHECK_THROWS_AS(mc.validate(), ValidationError);
    RBergomiParams p;
    p.hurst = 0.6;
    CHECK_THROWS_AS(rbergomi_surface(p, VolGrid::standard(), mc_config(10)), ValidationError);
    FouParams f;
    f.rho = 1.0;
    CHECK_THROWS_AS(fou_surface(f, VolGrid::standard(), mc_config(10)), ValidationError);
}

}  // TEST_SUITE
