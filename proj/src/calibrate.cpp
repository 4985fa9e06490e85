#include "volcal/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "volcal/error.hpp"
#include "volcal/rng.hpp"

namespace volcal {

namespace {

MlpSpec make_spec(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out, OutputActivation head) {
    MlpSpec spec;
    spec.layer_sizes = {in};
    spec.layer_sizes.insert(spec.layer_sizes.end(), hidden.begin(), hidden.end());
    spec.layer_sizes.push_back(out);
    spec.output = head;
    spec.validate();
    return spec;
}

void require_grid(const VolGrid& expected, const VolGrid& got) {
    if (!(expected == got))
        throw DimensionError("surface grid " + got.describe() + " does not match model grid " + expected.describe());
}

double cost_of(const std::vector<double>& r) {
    double s = 0.0;
    for (double v : r) s += v * v;
    return 0.5 * s;
}

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void project(std::span<double> u) {
    for (double& v : u) v = std::clamp(v, kBoxMargin, 1.0 - kBoxMargin);
}

}  // namespace

ModelBundle to_bundle(const DirectCalibrator& c) {
    return ModelBundle{ModelRole::direct, c.model, c.spec, c.weights, c.whitener, c.scaler, c.grid};
}

ModelBundle to_bundle(const PricingNetwork& p) {
    return ModelBundle{ModelRole::pricing, p.model, p.spec, p.weights, std::nullopt, p.scaler, p.grid};
}

DirectCalibrator direct_from_bundle(const ModelBundle& m) {
    if (m.role != ModelRole::direct) throw ValidationError("model file holds a pricing network, not a direct calibrator");
    if (!m.whitener) throw ModelFileError(ModelFileError::Kind::malformed, "direct model without a whitener");
    if (m.spec.inputs() != m.grid.size() || m.spec.outputs() != m.scaler.dim() || m.whitener->dim() != m.grid.size())
        throw ModelFileError(ModelFileError::Kind::malformed, "direct model dimensions are inconsistent");
    return DirectCalibrator{m.model, *m.whitener, m.spec, m.weights, m.scaler, m.grid};
}

PricingNetwork pricing_from_bundle(const ModelBundle& m) {
    if (m.role != ModelRole::pricing) throw ValidationError("model file holds a direct calibrator, not a pricing network");
    if (m.spec.inputs() != m.scaler.dim() || m.spec.outputs() != m.grid.size())
        throw ModelFileError(ModelFileError::Kind::malformed, "pricing model dimensions are inconsistent");
    return PricingNetwork{m.model, m.scaler, m.spec, m.weights, m.grid};
}

std::pair<DirectCalibrator, TrainReport> train_direct(const CalibrationDataset& train, const TrainConfig& cfg,
                                                      const std::vector<std::size_t>& hidden, OutputActivation head,
                                                      double whiten_rel_floor) {
    if (head == OutputActivation::identity)
        throw ValidationError("a direct calibrator needs a bounded (sigmoid or hard_sigmoid) head");
    train.spec.bounds.validate();
    DirectCalibrator c;
    c.model = train.spec.model;
    c.grid = train.spec.grid;
    c.scaler = ParameterScaler{train.spec.bounds};
    c.spec = make_spec(train.X.cols(), hidden, train.Y.cols(), head);
    if (c.spec.inputs() != c.grid.size()) throw DimensionError("dataset columns do not match its grid");
    c.whitener = fit_whitener(train.X, whiten_rel_floor);
    auto [w, report] = volcal::train(c.spec, whiten_apply(c.whitener, train.X), c.scaler.scale(train.Y), cfg);
    c.weights = std::move(w);
    return {std::move(c), std::move(report)};
}

Matrix direct_calibrate(const DirectCalibrator& c, const Matrix& surfaces) {
    const Matrix u = forward(c.spec, c.weights, whiten_apply(c.whitener, surfaces));
    return c.scaler.unscale(u);
}

std::vector<double> direct_calibrate(const DirectCalibrator& c, const VolSurface& s) {
    require_grid(c.grid, s.grid);
    const auto flat = s.flatten();
    const Matrix out = direct_calibrate(c, Matrix(1, flat.size(), flat));
    return std::vector<double>(out.data().begin(), out.data().end());
}

std::pair<PricingNetwork, TrainReport> train_pricing_net(const CalibrationDataset& train, const TrainConfig& cfg,
                                                         const std::vector<std::size_t>& hidden) {
    train.spec.bounds.validate();
    PricingNetwork p;
    p.model = train.spec.model;
    p.grid = train.spec.grid;
    p.scaler = ParameterScaler{train.spec.bounds};
    p.spec = make_spec(train.Y.cols(), hidden, train.X.cols(), OutputActivation::identity);
    if (p.spec.outputs() != p.grid.size()) throw DimensionError("dataset columns do not match its grid");
    // Fit standardized vols, then fold the column affine map into the last layer.
    const std::size_t n = train.X.rows();
    const std::size_t m = train.X.cols();
    std::vector<double> mean(m, 0.0), sd(m, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < m; ++c) mean[c] += train.X(r, c);
    for (double& v : mean) v /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < m; ++c) sd[c] += (train.X(r, c) - mean[c]) * (train.X(r, c) - mean[c]);
    for (double& v : sd) {
        v = std::sqrt(v / static_cast<double>(n));
        if (!(v > 1e-12)) v = 1.0;
    }
    Matrix target(n, m);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < m; ++c) target(r, c) = (train.X(r, c) - mean[c]) / sd[c];
    auto [w, report] = volcal::train(p.spec, p.scaler.scale(train.Y), target, cfg);
    DenseLayer& last = w.layers.back();
    for (std::size_t c = 0; c < m; ++c) {
        for (double& v : last.w.row(c)) v *= sd[c];
        last.b[c] = last.b[c] * sd[c] + mean[c];
    }
    p.weights = std::move(w);
    return {std::move(p), std::move(report)};
}

std::vector<double> price_surface(const PricingNetwork& p, std::span<const double> u) {
    return forward(p.spec, p.weights, u);
}

void LmConfig::validate() const {
    if (!(lambda0 > 0.0)) throw ValidationError("lambda0 must be positive");
    if (!(lambda_up > 1.0)) throw ValidationError("lambda_up must exceed 1");
    if (!(lambda_down > 0.0 && lambda_down < 1.0)) throw ValidationError("lambda_down must lie in (0, 1)");
    if (max_iters == 0) throw ValidationError("max_iters must be positive");
    if (!(grad_tol >= 0.0) || !(step_tol >= 0.0)) throw ValidationError("tolerances must be non-negative");
    if (n_restarts == 0) throw ValidationError("n_restarts must be at least 1");
}

std::string_view stop_name(LmStop s) {
    switch (s) {
        case LmStop::zero_residual: return "zero_residual";
        case LmStop::grad_tol: return "grad_tol";
        case LmStop::step_tol: return "step_tol";
        case LmStop::max_iters: return "max_iters";
    }
    return "unknown";
}

LmResult lm_solve(const ResidualFn& residual, std::span<const double> u0, const LmConfig& cfg) {
    cfg.validate();
    const std::size_t p = u0.size();
    if (p == 0) throw DimensionError("no parameters to solve for");
    LmResult res;
    res.u.assign(u0.begin(), u0.end());
    project(res.u);

    std::vector<double> r;
    Matrix jac;
    residual(res.u, r, jac);
    if (!all_finite(r) || !jac.all_finite()) throw NonFiniteError("residual is not finite at the starting point");
    if (jac.rows() != r.size() || jac.cols() != p) throw DimensionError("Jacobian shape does not match the residual");
    res.cost = cost_of(r);
    res.cost_history.push_back(res.cost);
    if (res.cost == 0.0) {
        res.reason = LmStop::zero_residual;
        return res;
    }

    double lambda = cfg.lambda0;
    std::vector<double> trial(p), r_new;
    Matrix jac_new;
    while (res.iterations < cfg.max_iters) {
        std::vector<double> g(p, 0.0);
        Matrix a(p, p);
        for (std::size_t k = 0; k < r.size(); ++k) {
            const auto jk = jac.row(k);
            for (std::size_t i = 0; i < p; ++i) {
                g[i] += jk[i] * r[k];
                for (std::size_t j = 0; j <= i; ++j) a(i, j) += jk[i] * jk[j];
            }
        }
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = 0; j < i; ++j) a(j, i) = a(i, j);
        // Coordinates held at a bound by a gradient pointing outward are frozen.
        std::vector<std::size_t> free;
        double g_inf = 0.0;
        for (std::size_t i = 0; i < p; ++i) {
            const bool pinned = (res.u[i] <= kBoxMargin && g[i] > 0.0) || (res.u[i] >= 1.0 - kBoxMargin && g[i] < 0.0);
            if (pinned) continue;
            free.push_back(i);
            g_inf = std::max(g_inf, std::abs(g[i]));
        }
        if (g_inf <= cfg.grad_tol) {
            res.reason = LmStop::grad_tol;
            return res;
        }
        const std::size_t f = free.size();
        double diag_max = 0.0;
        for (std::size_t i : free) diag_max = std::max(diag_max, a(i, i));

        bool accepted = false;
        while (!accepted && res.iterations < cfg.max_iters) {
            ++res.iterations;
            Matrix damped(f, f);
            std::vector<double> neg_g(f);
            for (std::size_t i = 0; i < f; ++i) {
                for (std::size_t j = 0; j < f; ++j) damped(i, j) = a(free[i], free[j]);
                damped(i, i) += lambda * std::max(a(free[i], free[i]), 1e-12 * diag_max + 1e-300);
                neg_g[i] = -g[free[i]];
            }
            std::vector<double> delta;
            try {
                delta = solve_spd(damped, neg_g);
            } catch (const NotPositiveDefinite&) {
                lambda *= cfg.lambda_up;
                continue;
            }
            double step = 0.0, scale = 0.0;
            trial = res.u;
            for (std::size_t i = 0; i < f; ++i) trial[free[i]] += delta[i];
            project(trial);
            for (std::size_t i = 0; i < p; ++i) {
                step = std::max(step, std::abs(trial[i] - res.u[i]));
                scale = std::max(scale, std::abs(res.u[i]));
            }
            if (step <= cfg.step_tol * (scale + cfg.step_tol)) {
                res.reason = LmStop::step_tol;
                return res;
            }
            residual(trial, r_new, jac_new);
            if (!all_finite(r_new) || !jac_new.all_finite())
                throw NonFiniteError("residual is not finite at a trial point");
            const double cost_new = cost_of(r_new);
            if (cost_new < res.cost) {
                res.u = trial;
                r.swap(r_new);
                jac = std::move(jac_new);
                jac_new = Matrix();
                res.cost = cost_new;
                res.cost_history.push_back(cost_new);
                lambda *= cfg.lambda_down;
                accepted = true;
                if (cost_new == 0.0) {
                    res.reason = LmStop::zero_residual;
                    return res;
                }
            } else {
                lambda *= cfg.lambda_up;
            }
        }
    }
    res.reason = LmStop::max_iters;
    return res;
}

TwoStepResult two_step_calibrate(const PricingNetwork& pn, const VolSurface& s, const LmConfig& cfg,
                                 std::span<const double> weights) {
    cfg.validate();
    require_grid(pn.grid, s.grid);
    const std::size_t m = pn.grid.size();
    const std::size_t p = pn.scaler.dim();
    std::vector<double> sqrt_w(m, 1.0);
    if (!weights.empty()) {
        if (weights.size() != m)
            throw DimensionError("calibration weights have " + std::to_string(weights.size()) + " entries for " +
                                 std::to_string(m) + " grid points");
        bool any = false;
        for (std::size_t i = 0; i < m; ++i) {
            if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
                throw ValidationError("calibration weights must be non-negative");
            any = any || weights[i] > 0.0;
            sqrt_w[i] = std::sqrt(weights[i]);
        }
        if (!any) throw ValidationError("all calibration weights are zero");
    }
    const auto target = s.flatten();

    const ResidualFn fn = [&](std::span<const double> u, std::vector<double>& r, Matrix& jac) {
        std::vector<double> out;
        jac = input_jacobian(pn.spec, pn.weights, u, &out);
        r.resize(m);
        for (std::size_t i = 0; i < m; ++i) {
            r[i] = sqrt_w[i] * (out[i] - target[i]);
            for (double& v : jac.row(i)) v *= sqrt_w[i];
        }
    };

    TwoStepResult best;
    bool have = false;
    for (std::size_t k = 0; k < cfg.n_restarts; ++k) {
        std::vector<double> u0(p, 0.5);
        if (k > 0) {
            Rng rng = Rng::substream(cfg.seed, k);
            for (double& v : u0) v = rng.uniform();
        }
        LmResult fit = lm_solve(fn, u0, cfg);
        if (!have || fit.cost < best.fit.cost) {
            best.fit = std::move(fit);
            best.restart = k;
            have = true;
        }
    }
    best.params = pn.scaler.unscale(best.fit.u);
    return best;
}

}  // namespace volcal
