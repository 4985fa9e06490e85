#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "volcal/dataset.hpp"

namespace volcal {

struct CalibrationOutcome {
    std::vector<double> params;  // native units
    bool converged = true;
    double fit_rmse = 0.0;  // vol RMSE of the solver's own fit, 0 when not applicable
};

/// Maps a flattened surface to model parameters.
using CalibratorFn = std::function<CalibrationOutcome(std::span<const double> surface)>;

struct ParamEval {
    std::vector<double> target;
    std::vector<double> predicted;
    double rmse = 0.0;          // native units
    double mean_error = 0.0;    // predicted - target, native units
    double rmse_scaled = 0.0;   // in units of (ub - lb)
    double mean_error_scaled = 0.0;
};

struct SplitEval {
    std::vector<ParamEval> params;
    double rmse_scaled = 0.0;  // over all parameters and rows
    std::vector<double> seconds;  // wall clock per surface
    std::size_t converged = 0;
    std::vector<double> fit_rmse;

    std::size_t rows() const { return seconds.size(); }
    double mean_seconds() const;
};

struct EvalResult {
    std::string method;
    std::vector<std::string> param_names;
    ParamBounds bounds;
    SplitEval train;
    SplitEval test;
};

/// Applies the calibrator to every row of both parts of the dataset (first
/// spec.n_train rows are the training part).
EvalResult evaluate(const std::string& method, const CalibratorFn& cal, const CalibrationDataset& ds);
SplitEval evaluate_split(const CalibratorFn& cal, const CalibrationDataset& part, const ParamBounds& bounds);

struct Histogram {
    std::vector<double> left;
    std::vector<double> right;
    std::vector<double> height;  // integrates to one
};

/// Normalised histogram; bins = 0 picks Freedman-Diaconis, falling back to
/// Sturges when the interquartile range vanishes.
Histogram error_density(std::span<const double> errors, std::size_t bins = 0);

/// Writes summary.csv, summary.txt, scatter_<method>_<split>_p<i>.csv,
/// density_<method>_<split>_p<i>.csv and timing.csv. Everything except
/// timing.csv depends only on the calibration results. Returns the files written.
std::vector<std::filesystem::path> compare_report(const EvalResult& direct, const EvalResult& two_step,
                                                  const std::filesystem::path& out_dir);

}  // namespace volcal
