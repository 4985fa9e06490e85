#include "volcal/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "volcal/error.hpp"

namespace volcal {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fixed(double v, int prec) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

double quantile(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    return out;
}

}  // namespace

double SplitEval::mean_seconds() const {
    if (seconds.empty()) return 0.0;
    return std::accumulate(seconds.begin(), seconds.end(), 0.0) / static_cast<double>(seconds.size());
}

SplitEval evaluate_split(const CalibratorFn& cal, const CalibrationDataset& part, const ParamBounds& bounds) {
    const std::size_t n = part.rows();
    const std::size_t p = part.Y.cols();
    if (bounds.size() != p) throw DimensionError("bounds do not match the parameter count");
    SplitEval ev;
    ev.params.resize(p);
    for (auto& pe : ev.params) {
        pe.target.reserve(n);
        pe.predicted.reserve(n);
    }
    for (std::size_t r = 0; r < n; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        CalibrationOutcome out = cal(part.X.row(r));
        const auto t1 = std::chrono::steady_clock::now();
        if (out.params.size() != p)
            throw DimensionError("calibrator returned " + std::to_string(out.params.size()) + " parameters, expected " +
                                 std::to_string(p));
        ev.seconds.push_back(std::max(std::chrono::duration<double>(t1 - t0).count(), 1e-9));
        ev.converged += out.converged ? 1 : 0;
        ev.fit_rmse.push_back(out.fit_rmse);
        for (std::size_t j = 0; j < p; ++j) {
            ev.params[j].target.push_back(part.Y(r, j));
            ev.params[j].predicted.push_back(out.params[j]);
        }
    }
    double total_sq = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        auto& pe = ev.params[j];
        const double width = bounds.upper[j] - bounds.lower[j];
        double sq = 0.0, sum = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double e = pe.predicted[r] - pe.target[r];
            sq += e * e;
            sum += e;
        }
        if (n > 0) {
            pe.rmse = std::sqrt(sq / static_cast<double>(n));
            pe.mean_error = sum / static_cast<double>(n);
            pe.rmse_scaled = pe.rmse / width;
            pe.mean_error_scaled = pe.mean_error / width;
        }
        total_sq += sq / (width * width);
    }
    if (n > 0) ev.rmse_scaled = std::sqrt(total_sq / static_cast<double>(n * p));
    return ev;
}

EvalResult evaluate(const std::string& method, const CalibratorFn& cal, const CalibrationDataset& ds) {
    const auto [train, test] = split(ds);
    EvalResult res;
    res.method = method;
    res.param_names = model_param_names(ds.spec.model);
    res.bounds = ds.spec.bounds;
    res.train = evaluate_split(cal, train, ds.spec.bounds);
    res.test = evaluate_split(cal, test, ds.spec.bounds);
    return res;
}

Histogram error_density(std::span<const double> errors, std::size_t bins) {
    if (errors.empty()) throw ValidationError("density of an empty sample");
    std::vector<double> v(errors.begin(), errors.end());
    for (double x : v)
        if (!std::isfinite(x)) throw NonFiniteError("density input contains non-finite values");
    std::sort(v.begin(), v.end());
    const double lo = v.front();
    const double hi = v.back();
    const double n = static_cast<double>(v.size());
    Histogram h;
    if (hi == lo) {
        const double half = std::max(std::abs(lo) * 1e-6, 1e-12);
        h.left = {lo - half};
        h.right = {lo + half};
        h.height = {1.0 / (2.0 * half)};
        return h;
    }
    if (bins == 0) {
        const double iqr = quantile(v, 0.75) - quantile(v, 0.25);
        const double width = 2.0 * iqr / std::cbrt(n);
        if (width > 0.0)
            bins = static_cast<std::size_t>(std::ceil((hi - lo) / width));
        else
            bins = static_cast<std::size_t>(std::ceil(std::log2(n))) + 1;
        bins = std::clamp<std::size_t>(bins, 1, 1000);
    }
    const double width = (hi - lo) / static_cast<double>(bins);
    std::vector<double> counts(bins, 0.0);
    for (double x : v) {
        auto k = static_cast<std::size_t>((x - lo) / width);
        counts[std::min(k, bins - 1)] += 1.0;
    }
    for (std::size_t k = 0; k < bins; ++k) {
        h.left.push_back(lo + width * static_cast<double>(k));
        h.right.push_back(k + 1 == bins ? hi : lo + width * static_cast<double>(k + 1));
    }
    for (std::size_t k = 0; k < bins; ++k) h.height.push_back(counts[k] / (n * (h.right[k] - h.left[k])));
    return h;
}

std::vector<std::filesystem::path> compare_report(const EvalResult& direct, const EvalResult& two_step,
                                                  const std::filesystem::path& out_dir) {
    if (direct.param_names != two_step.param_names || direct.train.rows() != two_step.train.rows() ||
        direct.test.rows() != two_step.test.rows())
        throw DimensionError("the two evaluations do not cover the same dataset");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error("cannot create '" + out_dir.string() + "': " + ec.message());

    std::vector<std::filesystem::path> written;
    const std::size_t p = direct.param_names.size();
    const std::pair<const EvalResult*, const char*> methods[] = {{&direct, "direct"}, {&two_step, "two_step"}};

    for (const auto& [ev, tag] : methods) {
        for (const auto& [split, split_name] :
             {std::pair<const SplitEval*, const char*>{&ev->train, "train"}, {&ev->test, "test"}}) {
            for (std::size_t j = 0; j < p; ++j) {
                const auto& pe = split->params[j];
                const std::string suffix = std::string(tag) + "_" + split_name + "_p" + std::to_string(j) + ".csv";
                const auto scatter = out_dir / ("scatter_" + suffix);
                auto out = open_out(scatter);
                out << "target,predicted\n";
                for (std::size_t r = 0; r < pe.target.size(); ++r)
                    out << num(pe.target[r]) << ',' << num(pe.predicted[r]) << '\n';
                written.push_back(scatter);

                const auto density = out_dir / ("density_" + suffix);
                auto dout = open_out(density);
                dout << "bin_left,bin_right,height\n";
                if (!pe.target.empty()) {
                    std::vector<double> err(pe.target.size());
                    for (std::size_t r = 0; r < err.size(); ++r) err[r] = pe.predicted[r] - pe.target[r];
                    const Histogram h = error_density(err);
                    for (std::size_t k = 0; k < h.height.size(); ++k)
                        dout << num(h.left[k]) << ',' << num(h.right[k]) << ',' << num(h.height[k]) << '\n';
                }
                written.push_back(density);
            }
        }
    }

    const auto summary_csv = out_dir / "summary.csv";
    {
        auto out = open_out(summary_csv);
        out << "parameter,direct_train_rmse,direct_test_rmse,direct_test_mean_error,"
               "two_step_train_rmse,two_step_test_rmse,two_step_test_mean_error\n";
        for (std::size_t j = 0; j < p; ++j) {
            out << direct.param_names[j] << ',' << num(direct.train.params[j].rmse) << ','
                << num(direct.test.params[j].rmse) << ',' << num(direct.test.params[j].mean_error) << ','
                << num(two_step.train.params[j].rmse) << ',' << num(two_step.test.params[j].rmse) << ','
                << num(two_step.test.params[j].mean_error) << '\n';
        }
        out << "all_scaled," << num(direct.train.rmse_scaled) << ',' << num(direct.test.rmse_scaled) << ",,"
            << num(two_step.train.rmse_scaled) << ',' << num(two_step.test.rmse_scaled) << ",\n";
    }
    written.push_back(summary_csv);

    const auto summary_txt = out_dir / "summary.txt";
    {
        auto out = open_out(summary_txt);
        char line[256];
        out << "Parameter RMSE, native units (scaled to [0,1] in the last row)\n\n";
        std::snprintf(line, sizeof line, "%-12s %14s %14s %14s %14s\n", "parameter", "direct/train", "direct/test",
                      "2step/train", "2step/test");
        out << line;
        for (std::size_t j = 0; j < p; ++j) {
            std::snprintf(line, sizeof line, "%-12s %14.6g %14.6g %14.6g %14.6g\n", direct.param_names[j].c_str(),
                          direct.train.params[j].rmse, direct.test.params[j].rmse, two_step.train.params[j].rmse,
                          two_step.test.params[j].rmse);
            out << line;
        }
        std::snprintf(line, sizeof line, "%-12s %14.6g %14.6g %14.6g %14.6g\n", "all_scaled", direct.train.rmse_scaled,
                      direct.test.rmse_scaled, two_step.train.rmse_scaled, two_step.test.rmse_scaled);
        out << line << '\n';
        out << "two_step solver converged on " << two_step.train.converged << "/" << two_step.train.rows()
            << " train and " << two_step.test.converged << "/" << two_step.test.rows() << " test surfaces\n";
        out << "The pricing network uses the same hidden widths as the direct network.\n";
        out << "Calibration wall-clock times are in timing.csv.\n";
    }
    written.push_back(summary_txt);

    const auto timing = out_dir / "timing.csv";
    {
        auto out = open_out(timing);
        out << "method,split,surfaces,total_seconds,seconds_per_surface\n";
        for (const auto& [ev, tag] : methods) {
            for (const auto& [split, split_name] :
                 {std::pair<const SplitEval*, const char*>{&ev->train, "train"}, {&ev->test, "test"}}) {
                const double total = std::accumulate(split->seconds.begin(), split->seconds.end(), 0.0);
                out << tag << ',' << split_name << ',' << split->rows() << ',' << fixed(total, 6) << ','
                    << fixed(split->mean_seconds(), 6) << '\n';
            }
        }
    }
    written.push_back(timing);
    return written;
}

}  // namespace volcal
