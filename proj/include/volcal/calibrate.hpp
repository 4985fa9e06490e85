#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "volcal/dataset.hpp"
#include "volcal/mlp.hpp"
#include "volcal/model_io.hpp"
#include "volcal/preprocess.hpp"

namespace volcal {

inline const std::vector<std::size_t> kDefaultHidden{68, 49, 30};

/// Surface -> parameters: whiten, network with a bounded head, unscale.
struct DirectCalibrator {
    ModelKind model = ModelKind::heston;
    Whitener whitener;
    MlpSpec spec;
    MlpWeights weights;
    ParameterScaler scaler;
    VolGrid grid;
};

/// Scaled parameters -> surface (identity head).
struct PricingNetwork {
    ModelKind model = ModelKind::heston;
    ParameterScaler scaler;
    MlpSpec spec;
    MlpWeights weights;
    VolGrid grid;
};

ModelBundle to_bundle(const DirectCalibrator& c);
ModelBundle to_bundle(const PricingNetwork& p);
DirectCalibrator direct_from_bundle(const ModelBundle& m);
PricingNetwork pricing_from_bundle(const ModelBundle& m);

std::pair<DirectCalibrator, TrainReport> train_direct(const CalibrationDataset& train, const TrainConfig& cfg,
                                                      const std::vector<std::size_t>& hidden = kDefaultHidden,
                                                      OutputActivation head = OutputActivation::sigmoid,
                                                      double whiten_rel_floor = 0.0);

std::vector<double> direct_calibrate(const DirectCalibrator& c, const VolSurface& s);
/// One parameter row per surface row (flattened, maturity-major).
Matrix direct_calibrate(const DirectCalibrator& c, const Matrix& surfaces);

std::pair<PricingNetwork, TrainReport> train_pricing_net(const CalibrationDataset& train, const TrainConfig& cfg,
                                                         const std::vector<std::size_t>& hidden = kDefaultHidden);

/// Predicted flattened surface at unit-cube parameters u.
std::vector<double> price_surface(const PricingNetwork& p, std::span<const double> u);

struct LmConfig {
    double lambda0 = 1e-3;
    double lambda_up = 10.0;
    double lambda_down = 0.1;
    std::size_t max_iters = 100;
    double grad_tol = 1e-8;
    double step_tol = 1e-10;
    std::size_t n_restarts = 5;
    std::uint64_t seed = 1;

    void validate() const;
};

enum class LmStop { zero_residual, grad_tol, step_tol, max_iters };

std::string_view stop_name(LmStop s);

struct LmResult {
    std::vector<double> u;
    double cost = 0.0;  // half the squared residual norm
    std::size_t iterations = 0;
    LmStop reason = LmStop::max_iters;
    std::vector<double> cost_history;  // accepted iterates, starting point first

    bool converged() const { return reason != LmStop::max_iters; }
};

/// Fills the residual vector and its Jacobian (rows = residuals) at u.
using ResidualFn = std::function<void(std::span<const double> u, std::vector<double>& r, Matrix& jac)>;

inline constexpr double kBoxMargin = 1e-6;

/// Levenberg-Marquardt with Marquardt (diagonal) damping on the box
/// [1e-6, 1 - 1e-6]^p; iterates are projected onto the box, and coordinates
/// pinned at a bound by the gradient drop out of the step and the gradient
/// test. Every trial step counts as an iteration.
LmResult lm_solve(const ResidualFn& residual, std::span<const double> u0, const LmConfig& cfg);

struct TwoStepResult {
    std::vector<double> params;  // native units
    LmResult fit;
    std::size_t restart = 0;  // index of the winning start
};

/// Weighted least squares of the pricing network against the surface, best
/// of cfg.n_restarts starts (cube centre first, then seeded uniform draws).
TwoStepResult two_step_calibrate(const PricingNetwork& p, const VolSurface& s, const LmConfig& cfg,
                                 std::span<const double> weights = {});

}  // namespace volcal
