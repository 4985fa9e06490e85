#include <doctest.h>

#include <cmath>

#include "synthetic.hpp"
#include "volcal/calibrate.hpp"
#include "volcal/error.hpp"

using namespace volcal;

namespace {

TrainConfig quick_config(std::size_t epochs) {
    TrainConfig cfg;
    cfg.max_epochs = epochs;
    cfg.patience = epochs;
    cfg.batch_size = 16;
    cfg.adam.learning_rate = 1e-2;
    return cfg;
}

// Random two-parameter pricing network on the tiny grid.
PricingNetwork random_pricer() {
    PricingNetwork p;
    p.grid = tiny_grid();
    p.scaler = ParameterScaler{ParamBounds{{0.0, 0.0}, {1.0, 2.0}}};
    p.spec = MlpSpec{{2, 8, 6}, OutputActivation::identity};
    p.weights = init_weights(p.spec, 77);
    for (auto& layer : p.weights.layers) {
        for (double& v : layer.w.data()) v *= 2.0;
        for (std::size_t i = 0; i < layer.b.size(); ++i) layer.b[i] = 0.1 * double(i % 3) - 0.1;
    }
    return p;
}

VolSurface priced(const PricingNetwork& p, std::vector<double> u) {
    return VolSurface::from_flat(p.grid, price_surface(p, u));
}

}  // namespace

TEST_SUITE("calibrate") {

TEST_CASE("direct network learns a constant map") {
    auto ds = synthetic_dataset(200, 0, 1);
    const std::vector<double> target{0.04, 2.0, 0.09, 0.5, -0.7};
    for (std::size_t r = 0; r < ds.rows(); ++r)
        for (std::size_t c = 0; c < 5; ++c) ds.Y(r, c) = target[c];
    const auto [cal, report] = train_direct(ds, quick_config(1000), {8});
    const Matrix out = direct_calibrate(cal, ds.X);
    const ParameterScaler& s = cal.scaler;
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < 5; ++c)
            CHECK(std::abs(out(r, c) - target[c]) <= 1e-3 * (s.bounds.upper[c] - s.bounds.lower[c]));
}

TEST_CASE("direct outputs stay inside the bounds") {
    const auto ds = synthetic_dataset(200, 0, 3);
    const auto [cal, report] = train_direct(ds, quick_config(5), {8});
    Matrix wild = synthetic_dataset(30, 0, 4).X;
    for (double& v : wild.data()) v *= 3.0;
    const Matrix out = direct_calibrate(cal, wild);
    for (std::size_t r = 0; r < out.rows(); ++r) CHECK(ds.spec.bounds.contains(out.row(r)));
    CHECK(report.stopped_epoch == 5);
}

TEST_CASE("direct calibration rejects other grids and unbounded heads") {
    const auto ds = synthetic_dataset(100, 0, 5);
    CHECK_THROWS_AS(train_direct(ds, quick_config(2), {8}, OutputActivation::identity), ValidationError);
    const auto [cal, report] = train_direct(ds, quick_config(2), {8});
    const VolGrid other{{0.9, 1.0, 1.2}, {0.5, 1.0}};
    try {
        direct_calibrate(cal, VolSurface::from_flat(other, ds.X.row(0)));
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        CHECK(std::string(e.what()).find("does not match") != std::string::npos);
    }
}

TEST_CASE("pricing network fits standardized targets") {
    const auto ds = synthetic_dataset(300, 0, 6);
    const auto [p, report] = train_pricing_net(ds, quick_config(200), {16});
    CHECK(p.spec.output == OutputActivation::identity);
    double sq = 0.0;
    const Matrix u = p.scaler.scale(ds.Y);
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        const auto out = price_surface(p, u.row(r));
        for (std::size_t c = 0; c < out.size(); ++c) sq += (out[c] - ds.X(r, c)) * (out[c] - ds.X(r, c));
    }
    CHECK(std::sqrt(sq / double(ds.X.size())) < 5e-3);
}

TEST_CASE("LM solves linear least squares in one or two steps") {
    // r = A u - b with solution u* = (0.3, 0.6).
    const Matrix a{{1.0, 2.0}, {3.0, -1.0}, {0.5, 0.5}};
    const std::vector<double> us{0.3, 0.6};
    const auto b = matvec(a, us);
    const ResidualFn fn = [&](std::span<const double> u, std::vector<double>& r, Matrix& jac) {
        r = matvec(a, u);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
        jac = a;
    };
    LmConfig cfg;
    cfg.lambda0 = 1e-12;
    const std::vector<double> u0{0.9, 0.1};
    const LmResult res = lm_solve(fn, u0, cfg);
    CHECK(res.converged());
    CHECK(res.iterations <= 2);
    CHECK(std::abs(res.u[0] - 0.3) <= 1e-8);
    CHECK(std::abs(res.u[1] - 0.6) <= 1e-8);
}

TEST_CASE("LM on the Rosenbrock valley") {
    // x = 4u - 2 maps the unit box onto [-2, 2]^2; the minimum x = (1, 1) sits at u = 0.75.
    const ResidualFn fn = [](std::span<const double> u, std::vector<double>& r, Matrix& jac) {
        const double x1 = 4 * u[0] - 2, x2 = 4 * u[1] - 2;
        r = {10 * (x2 - x1 * x1), 1 - x1};
        jac = Matrix{{-20 * x1 * 4, 10 * 4}, {-4, 0}};
    };
    LmConfig cfg;
    cfg.max_iters = 500;
    cfg.grad_tol = 1e-14;
    const std::vector<double> u0{0.2, 0.6};
    const LmResult res = lm_solve(fn, u0, cfg);
    CHECK(res.converged());
    CHECK(std::abs(res.u[0] - 0.75) <= 1e-6);
    CHECK(std::abs(res.u[1] - 0.75) <= 1e-6);
    for (std::size_t i = 1; i < res.cost_history.size(); ++i) CHECK(res.cost_history[i] < res.cost_history[i - 1]);
    CHECK(res.cost_history.front() == doctest::Approx(0.5 * (100 * std::pow(0.4 - 1.44, 2) + 2.2 * 2.2)));
}

TEST_CASE("LM stops at once on a zero residual") {
    int calls = 0;
    const ResidualFn fn = [&](std::span<const double> u, std::vector<double>& r, Matrix& jac) {
        ++calls;
        r = {u[0] - 0.5};
        jac = Matrix{{1.0}};
    };
    const std::vector<double> u0{0.5};
    const LmResult res = lm_solve(fn, u0, LmConfig{});
    CHECK(res.reason == LmStop::zero_residual);
    CHECK(res.iterations == 0);
    CHECK(calls == 1);
}

TEST_CASE("LM keeps iterates in the box") {
    // Unconstrained minimum at u = 1.5; the solution is the upper margin.
    const ResidualFn fn = [](std::span<const double> u, std::vector<double>& r, Matrix& jac) {
        r = {u[0] - 1.5, u[1] - 0.25};
        jac = Matrix::identity(2);
    };
    const std::vector<double> u0{0.5, 0.5};
    const LmResult res = lm_solve(fn, u0, LmConfig{});
    CHECK(res.converged());
    CHECK(res.u[0] == 1.0 - kBoxMargin);
    CHECK(std::abs(res.u[1] - 0.25) <= 1e-8);
}

TEST_CASE("LM configuration checks") {
    const ResidualFn fn = [](std::span<const double> u, std::vector<double>& r, Matrix& jac) {
        r = {u[0]};
        jac = Matrix{{1.0}};
    };
    const std::vector<double> u0{0.5};
    LmConfig bad;
    bad.lambda_up = 0.5;
    CHECK_THROWS_AS(lm_solve(fn, u0, bad), ValidationError);
    bad = LmConfig{};
    bad.n_restarts = 0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    const ResidualFn nan_fn = [](std::span<const double>, std::vector<double>& r, Matrix& jac) {
        r = {std::nan("")};
        jac = Matrix{{1.0}};
    };
    CHECK_THROWS_AS(lm_solve(nan_fn, u0, LmConfig{}), NonFiniteError);
}

TEST_CASE("two-step recovers the parameters of its own surfaces") {
    const PricingNetwork p = random_pricer();
    for (const std::vector<double> u : {std::vector<double>{0.3, 0.6}, std::vector<double>{0.8, 0.2}}) {
        const TwoStepResult res = two_step_calibrate(p, priced(p, u), LmConfig{});
        CHECK(res.fit.converged());
        CHECK(std::abs(res.fit.u[0] - u[0]) <= 1e-4);
        CHECK(std::abs(res.fit.u[1] - u[1]) <= 1e-4);
        CHECK(std::abs(res.params[1] - 2.0 * u[1]) <= 2e-4);
    }
}

TEST_CASE("two-step weights") {
    const PricingNetwork p = random_pricer();
    VolSurface s = priced(p, {0.4, 0.7});
    s.vols(1, 2) += 0.05;
    std::vector<double> w{1, 2, 1, 0.5, 1, 3};
    const TwoStepResult a = two_step_calibrate(p, s, LmConfig{}, w);
    for (double& v : w) v *= 7.0;
    const TwoStepResult b = two_step_calibrate(p, s, LmConfig{}, w);
    CHECK(std::abs(a.fit.u[0] - b.fit.u[0]) <= 1e-8);
    CHECK(std::abs(a.fit.u[1] - b.fit.u[1]) <= 1e-8);
    CHECK(b.fit.cost == doctest::Approx(7.0 * a.fit.cost).epsilon(1e-6));
    CHECK_THROWS_AS(two_step_calibrate(p, s, LmConfig{}, std::vector<double>(6, 0.0)), ValidationError);
    CHECK_THROWS_AS(two_step_calibrate(p, s, LmConfig{}, std::vector<double>(5, 1.0)), DimensionError);
    w[0] = -1.0;
    CHECK_THROWS_AS(two_step_calibrate(p, s, LmConfig{}, w), ValidationError);
}

TEST_CASE("two-step is deterministic and rejects other grids") {
    const PricingNetwork p = random_pricer();
    VolSurface s = priced(p, {0.55, 0.45});
    s.vols(0, 0) -= 0.02;
    LmConfig cfg;
    cfg.seed = 9;
    const TwoStepResult a = two_step_calibrate(p, s, cfg), b = two_step_calibrate(p, s, cfg);
    CHECK(a.params == b.params);
    CHECK(a.restart == b.restart);
    const VolSurface other = VolSurface::from_flat(VolGrid{{0.9, 1.0, 1.1}, {0.5, 2.0}}, s.flatten());
    CHECK_THROWS_AS(two_step_calibrate(p, other, cfg), DimensionError);
}

}  // TEST_SUITE
