#include <CLI11.hpp>
#include <json.hpp>

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "volcal/bench.hpp"
#include "volcal/calibrate.hpp"
#include "volcal/dataset.hpp"
#include "volcal/error.hpp"
#include "volcal/model_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Keys written to run_manifest.json that are not flags.
const std::set<std::string> kInformational{"volcal_version", "command", "grid_points", "model_checksum"};

std::string scalar_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConversionError("config values must be strings, numbers, booleans or arrays of them");
}

/// Flat JSON object whose keys are the long flag names of one subcommand.
class JsonConfig : public CLI::Config {
public:
    explicit JsonConfig(std::string section) : section_(std::move(section)) {}

    std::string to_config(const CLI::App*, bool, bool, std::string) const override { return {}; }

    std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
        }
        if (!j.is_object()) throw CLI::ConversionError("config must be a JSON object");
        std::vector<CLI::ConfigItem> items;
        for (const auto& [key, value] : j.items()) {
            if (kInformational.count(key)) continue;
            CLI::ConfigItem item;
            if (!section_.empty()) item.parents = {section_};
            item.name = key;
            if (value.is_array()) {
                if (value.empty()) continue;
                for (const auto& v : value) item.inputs.push_back(scalar_text(v));
            } else {
                item.inputs.push_back(scalar_text(value));
            }
            items.push_back(std::move(item));
        }
        return items;
    }

private:
    std::string section_;
};

/// Registers flags and remembers how to echo their effective values.
class Fields {
public:
    explicit Fields(CLI::App* app) : app_(app) {}

    template <class T>
    CLI::Option* add(const std::string& name, T& var, const std::string& desc) {
        echo_.push_back([name, &var](json& j) { j[name] = var; });
        return app_->add_option("--" + name, var, desc)->capture_default_str();
    }

    json echo() const {
        json j = json::object();
        for (const auto& f : echo_) f(j);
        return j;
    }

private:
    CLI::App* app_;
    std::vector<std::function<void(json&)>> echo_;
};

void write_manifest(const fs::path& dir, const std::string& command, const json& cfg, const json& extra = {}) {
    json j;
    j["volcal_version"] = VOLCAL_VERSION;
    j["command"] = command;
    for (const auto& [k, v] : cfg.items()) j[k] = v;
    if (extra.is_object())
        for (const auto& [k, v] : extra.items()) j[k] = v;
    std::ofstream out(dir / "run_manifest.json", std::ios::binary);
    if (!out) throw volcal::Error("cannot write '" + (dir / "run_manifest.json").string() + "'");
    out << j.dump(2) << '\n';
}

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw volcal::Error("cannot create '" + dir.string() + "': " + ec.message());
}

volcal::McEstimator parse_estimator(const std::string& s) {
    if (s == "conditional") return volcal::McEstimator::conditional;
    if (s == "payoff") return volcal::McEstimator::payoff;
    throw volcal::ValidationError("unknown estimator '" + s + "' (expected conditional or payoff)");
}

struct GenerateArgs {
    std::string model = "heston";
    std::size_t n_train = 1275;
    std::size_t n_test = 225;
    std::uint64_t seed = 1;
    std::size_t paths = 20000;
    double steps_per_year = 25.0;
    bool antithetic = true;
    std::string estimator = "conditional";
    std::vector<double> strikes = volcal::VolGrid::standard().strikes;
    std::vector<double> maturities = volcal::VolGrid::standard().maturities;
    std::vector<double> lower;
    std::vector<double> upper;
    std::size_t workers = 0;
    std::string out_dir = "data";
};

void run_generate(const GenerateArgs& a, const Fields& f) {
    volcal::DatasetSpec spec;
    spec.model = volcal::parse_model(a.model);
    if (a.lower.empty() != a.upper.empty())
        throw volcal::ValidationError("--lower and --upper must be given together");
    spec.bounds = a.lower.empty() ? volcal::ParamBounds::defaults(spec.model) : volcal::ParamBounds{a.lower, a.upper};
    spec.grid = volcal::VolGrid{a.strikes, a.maturities};
    spec.n_train = a.n_train;
    spec.n_test = a.n_test;
    spec.seed = a.seed;
    spec.workers = a.workers;
    spec.mc.n_paths = a.paths;
    spec.mc.steps_per_year = a.steps_per_year;
    spec.mc.antithetic = a.antithetic;
    spec.mc.estimator = parse_estimator(a.estimator);
    spec.validate();

    const fs::path dir = a.out_dir;
    make_dir(dir);
    const auto ds = volcal::generate(spec);
    const auto [train, test] = volcal::split(ds);
    volcal::save_csv(train, dir / "train.csv");
    volcal::save_csv(test, dir / "test.csv");
    write_manifest(dir, "generate", f.echo(), json{{"grid_points", spec.grid.size()}});
    std::printf("%s: %zu train rows -> %s, %zu test rows -> %s\n", a.model.c_str(), train.rows(),
                (dir / "train.csv").string().c_str(), test.rows(), (dir / "test.csv").string().c_str());
}

struct TrainArgs {
    std::string data;
    std::string mode = "direct";
    std::vector<std::size_t> hidden = volcal::kDefaultHidden;
    std::string head = "sigmoid";
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 500;
    std::size_t patience = 25;
    double val_fraction = 0.1;
    std::uint64_t seed = 1;
    double whiten_floor = 0.0;
    std::string out_dir = "model";
};

void run_train(const TrainArgs& a, const Fields& f) {
    if (a.mode != "direct" && a.mode != "pricing")
        throw volcal::ValidationError("unknown mode '" + a.mode + "' (expected direct or pricing)");
    volcal::TrainConfig cfg;
    cfg.adam.learning_rate = a.learning_rate;
    cfg.batch_size = a.batch_size;
    cfg.max_epochs = a.max_epochs;
    cfg.patience = a.patience;
    cfg.val_fraction = a.val_fraction;
    cfg.seed = a.seed;
    cfg.validate();
    const auto head = volcal::parse_activation(a.head);

    const auto ds = volcal::load_csv(fs::path(a.data));
    const fs::path dir = a.out_dir;
    make_dir(dir);

    volcal::ModelBundle bundle;
    volcal::TrainReport report;
    if (a.mode == "direct") {
        auto [c, r] = volcal::train_direct(ds, cfg, a.hidden, head, a.whiten_floor);
        bundle = volcal::to_bundle(c);
        report = std::move(r);
    } else {
        auto [p, r] = volcal::train_pricing_net(ds, cfg, a.hidden);
        bundle = volcal::to_bundle(p);
        report = std::move(r);
    }
    const fs::path model_path = dir / (a.mode + ".model");
    volcal::save_model(model_path, bundle);

    std::ofstream curve(dir / "loss_curve.csv", std::ios::binary);
    if (!curve) throw volcal::Error("cannot write '" + (dir / "loss_curve.csv").string() + "'");
    curve << "epoch,train_loss,val_loss,best\n";
    char line[128];
    for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
        std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%d\n", e + 1, report.train_loss[e], report.val_loss[e],
                      e + 1 == report.best_epoch ? 1 : 0);
        curve << line;
    }

    char checksum[17];
    std::snprintf(checksum, sizeof checksum, "%016" PRIx64, volcal::fnv1a64(volcal::serialize_model(bundle)));
    write_manifest(dir, "train", f.echo(), json{{"model_checksum", checksum}});
    std::printf("%s network: %zu rows, best epoch %zu of %zu, val loss %.6g -> %s (checksum %s)\n", a.mode.c_str(),
                ds.rows(), report.best_epoch, report.stopped_epoch, report.val_loss[report.best_epoch - 1],
                model_path.string().c_str(), checksum);
}

struct LmArgs {
    volcal::LmConfig cfg;
    std::vector<double> weights;

    void add(Fields& f) {
        f.add("lambda0", cfg.lambda0, "Initial Levenberg-Marquardt damping");
        f.add("lambda-up", cfg.lambda_up, "Damping factor after a rejected step");
        f.add("lambda-down", cfg.lambda_down, "Damping factor after an accepted step");
        f.add("max-iters", cfg.max_iters, "Trial steps per start");
        f.add("grad-tol", cfg.grad_tol, "Stop when the largest gradient entry falls below this");
        f.add("step-tol", cfg.step_tol, "Stop when the relative step falls below this");
        f.add("restarts", cfg.n_restarts, "Number of starts (cube centre first, then seeded draws)");
        f.add("seed", cfg.seed, "Seed of the restart draws")->envname("VOLCAL_SEED");
        f.add("weights", weights, "Per grid point weights of the residuals (maturity-major); default all ones");
    }
};

volcal::CalibratorFn two_step_fn(const volcal::PricingNetwork& pn, const LmArgs& lm) {
    return [&pn, &lm](std::span<const double> flat) {
        const auto s = volcal::VolSurface::from_flat(pn.grid, flat);
        const auto res = volcal::two_step_calibrate(pn, s, lm.cfg, lm.weights);
        double wsum = 0.0;
        for (std::size_t i = 0; i < flat.size(); ++i) wsum += lm.weights.empty() ? 1.0 : lm.weights[i];
        return volcal::CalibrationOutcome{res.params, res.fit.converged(), std::sqrt(2.0 * res.fit.cost / wsum)};
    };
}

volcal::ModelBundle load_role(const std::string& path, volcal::ModelRole role, const char* flag) {
    if (!fs::is_regular_file(path)) throw volcal::ValidationError(std::string(flag) + " '" + path + "' does not exist");
    auto m = volcal::load_model(fs::path(path));
    if (m.role != role)
        throw volcal::ValidationError(std::string(flag) + " '" + path + "' holds a " +
                                      std::string(volcal::role_name(m.role)) + " network, expected " +
                                      std::string(volcal::role_name(role)));
    return m;
}

struct CalibrateArgs {
    std::string method = "direct";
    std::string model;
    std::string pricing_model;
    std::string surfaces;
    std::string out_dir = "calibration";
    LmArgs lm;
};

void run_calibrate(const CalibrateArgs& a, const Fields& f) {
    if (a.method != "direct" && a.method != "two-step")
        throw volcal::ValidationError("unknown method '" + a.method + "' (expected direct or two-step)");
    if (a.method == "direct" && a.model.empty()) throw volcal::ValidationError("--method direct needs --model");
    if (a.method == "two-step" && a.pricing_model.empty())
        throw volcal::ValidationError("--method two-step needs --pricing-model");
    a.lm.cfg.validate();

    const auto ds = volcal::load_csv(fs::path(a.surfaces));
    std::optional<volcal::DirectCalibrator> direct;
    std::optional<volcal::PricingNetwork> pricing;
    if (a.method == "direct") {
        direct = volcal::direct_from_bundle(load_role(a.model, volcal::ModelRole::direct, "--model"));
    } else {
        pricing = volcal::pricing_from_bundle(load_role(a.pricing_model, volcal::ModelRole::pricing, "--pricing-model"));
    }
    const volcal::VolGrid& model_grid = direct ? direct->grid : pricing->grid;
    if (!(model_grid == ds.spec.grid))
        throw volcal::DimensionError("surface grid " + ds.spec.grid.describe() + " does not match model grid " +
                                     model_grid.describe());

    const fs::path dir = a.out_dir;
    make_dir(dir);
    std::ofstream out(dir / "parameters.csv", std::ios::binary);
    if (!out) throw volcal::Error("cannot write '" + (dir / "parameters.csv").string() + "'");
    const std::size_t p = ds.Y.cols();
    for (std::size_t j = 0; j < p; ++j) out << "param_" << j << ',';
    out << "final_cost,iters\n";
    char buf[32];
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        const auto flat = ds.X.row(r);
        if (a.method == "direct") {
            for (double v : volcal::direct_calibrate(*direct, volcal::VolSurface::from_flat(direct->grid, flat))) {
                std::snprintf(buf, sizeof buf, "%.17g,", v);
                out << buf;
            }
            out << "nan,0\n";
        } else {
            const auto s = volcal::VolSurface::from_flat(pricing->grid, flat);
            const auto res = volcal::two_step_calibrate(*pricing, s, a.lm.cfg, a.lm.weights);
            for (double v : res.params) {
                std::snprintf(buf, sizeof buf, "%.17g,", v);
                out << buf;
            }
            std::snprintf(buf, sizeof buf, "%.17g", res.fit.cost);
            out << buf << ',' << res.fit.iterations << '\n';
        }
    }
    write_manifest(dir, "calibrate", f.echo());
    std::printf("%s: %zu surfaces -> %s\n", a.method.c_str(), ds.rows(), (dir / "parameters.csv").string().c_str());
}

struct BenchmarkArgs {
    std::string train_data;
    std::string test_data;
    std::string direct_model;
    std::string pricing_model;
    std::size_t limit = 0;
    std::string out_dir = "report";
    LmArgs lm;
};

volcal::CalibrationDataset head_rows(const volcal::CalibrationDataset& ds, std::size_t limit) {
    return volcal::slice_rows(ds, 0, limit == 0 ? ds.rows() : std::min(limit, ds.rows()));
}

void run_benchmark(const BenchmarkArgs& a, const Fields& f) {
    a.lm.cfg.validate();
    const auto train = head_rows(volcal::load_csv(fs::path(a.train_data)), a.limit);
    const auto test = head_rows(volcal::load_csv(fs::path(a.test_data)), a.limit);
    if (train.spec.model != test.spec.model || !(train.spec.grid == test.spec.grid))
        throw volcal::ValidationError("train and test data come from different models or grids");

    const auto direct = volcal::direct_from_bundle(load_role(a.direct_model, volcal::ModelRole::direct, "--direct-model"));
    const auto pricing =
        volcal::pricing_from_bundle(load_role(a.pricing_model, volcal::ModelRole::pricing, "--pricing-model"));
    for (const auto* g : {&direct.grid, &pricing.grid})
        if (!(*g == train.spec.grid))
            throw volcal::DimensionError("data grid " + train.spec.grid.describe() + " does not match model grid " +
                                         g->describe());

    volcal::CalibrationDataset ds;
    ds.spec = train.spec;
    ds.spec.n_train = train.rows();
    ds.spec.n_test = test.rows();
    std::vector<double> x(train.X.data().begin(), train.X.data().end());
    x.insert(x.end(), test.X.data().begin(), test.X.data().end());
    std::vector<double> y(train.Y.data().begin(), train.Y.data().end());
    y.insert(y.end(), test.Y.data().begin(), test.Y.data().end());
    ds.X = volcal::Matrix(train.rows() + test.rows(), train.X.cols(), std::move(x));
    ds.Y = volcal::Matrix(train.rows() + test.rows(), train.Y.cols(), std::move(y));

    const volcal::CalibratorFn direct_fn = [&direct](std::span<const double> flat) {
        return volcal::CalibrationOutcome{
            volcal::direct_calibrate(direct, volcal::VolSurface::from_flat(direct.grid, flat))};
    };
    const auto direct_eval = volcal::evaluate("direct", direct_fn, ds);
    const auto two_step_eval = volcal::evaluate("two_step", two_step_fn(pricing, a.lm), ds);

    const fs::path dir = a.out_dir;
    const auto files = volcal::compare_report(direct_eval, two_step_eval, dir);
    write_manifest(dir, "benchmark", f.echo());
    std::ifstream summary(dir / "summary.txt");
    std::cout << summary.rdbuf();
    std::printf("%zu report files in %s\n", files.size(), dir.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural-network calibration of volatility models"};
    app.set_version_flag("--version", VOLCAL_VERSION);
    app.require_subcommand(1);
    app.fallthrough();
    app.allow_config_extras(CLI::config_extras_mode::error);

    std::string section;
    for (int i = 1; i < argc && section.empty(); ++i)
        for (const char* name : {"generate", "train", "calibrate", "benchmark"})
            if (std::string_view(argv[i]) == name) section = name;
    app.config_formatter(std::make_shared<JsonConfig>(section));
    app.set_config("--config", "", "JSON file with flat keys named like the subcommand flags (flags take precedence)");

    GenerateArgs gen;
    auto* gen_cmd = app.add_subcommand("generate", "Simulate a parameter/surface dataset (train.csv, test.csv)");
    Fields gen_f(gen_cmd);
    gen_f.add("model", gen.model, "heston, rbergomi_flat, rbergomi_piecewise or fou");
    gen_f.add("n-train", gen.n_train, "Training rows");
    gen_f.add("n-test", gen.n_test, "Test rows");
    gen_f.add("seed", gen.seed, "Dataset seed")->envname("VOLCAL_SEED");
    gen_f.add("paths", gen.paths, "Monte Carlo paths per surface (rough models)");
    gen_f.add("steps-per-year", gen.steps_per_year, "Minimum time steps per year (rough models)");
    gen_f.add("antithetic", gen.antithetic, "Antithetic path pairs (rough models)");
    gen_f.add("estimator", gen.estimator, "conditional or payoff (rough models)");
    gen_f.add("strikes", gen.strikes, "Grid strikes (moneyness)");
    gen_f.add("maturities", gen.maturities, "Grid maturities in years");
    gen_f.add("lower", gen.lower, "Lower parameter bounds; default per model");
    gen_f.add("upper", gen.upper, "Upper parameter bounds; default per model");
    gen_f.add("workers", gen.workers, "Worker threads, 0 = all cores; output does not depend on it");
    gen_f.add("out-dir", gen.out_dir, "Output directory");

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train a direct (surface -> parameters) or pricing network");
    Fields tr_f(train_cmd);
    tr_f.add("data", tr.data, "Training dataset CSV")->required();
    tr_f.add("mode", tr.mode, "direct or pricing");
    tr_f.add("hidden", tr.hidden, "Hidden layer widths");
    tr_f.add("head", tr.head, "Output activation of a direct network: sigmoid or hard_sigmoid");
    tr_f.add("learning-rate", tr.learning_rate, "Adam learning rate");
    tr_f.add("batch-size", tr.batch_size, "Mini-batch size");
    tr_f.add("max-epochs", tr.max_epochs, "Epoch limit");
    tr_f.add("patience", tr.patience, "Epochs without validation improvement before stopping");
    tr_f.add("val-fraction", tr.val_fraction, "Share of rows held out for validation");
    tr_f.add("seed", tr.seed, "Training seed")->envname("VOLCAL_SEED");
    tr_f.add("whiten-floor", tr.whiten_floor, "Whitening eigenvalue floor relative to the largest eigenvalue (direct)");
    tr_f.add("out-dir", tr.out_dir, "Output directory for the model and loss_curve.csv");

    CalibrateArgs cal;
    auto* cal_cmd = app.add_subcommand("calibrate", "Calibrate every surface of a dataset CSV");
    Fields cal_f(cal_cmd);
    cal_f.add("method", cal.method, "direct or two-step");
    cal_f.add("model", cal.model, "Direct model file");
    cal_f.add("pricing-model", cal.pricing_model, "Pricing model file (two-step)");
    cal_f.add("surfaces", cal.surfaces, "Dataset CSV holding the surfaces")->required();
    cal_f.add("out-dir", cal.out_dir, "Output directory for parameters.csv");
    cal.lm.add(cal_f);

    BenchmarkArgs bench;
    auto* bench_cmd = app.add_subcommand("benchmark", "Compare direct and two-step calibration on train and test data");
    Fields bench_f(bench_cmd);
    bench_f.add("train-data", bench.train_data, "Training dataset CSV")->required();
    bench_f.add("test-data", bench.test_data, "Test dataset CSV")->required();
    bench_f.add("direct-model", bench.direct_model, "Direct model file")->required();
    bench_f.add("pricing-model", bench.pricing_model, "Pricing model file")->required();
    bench_f.add("limit", bench.limit, "Use at most this many rows of each split, 0 = all");
    bench_f.add("out-dir", bench.out_dir, "Report directory");
    bench.lm.add(bench_f);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen_cmd) run_generate(gen, gen_f);
        if (*train_cmd) run_train(tr, tr_f);
        if (*cal_cmd) run_calibrate(cal, cal_f);
        if (*bench_cmd) run_benchmark(bench, bench_f);
    } catch (const volcal::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const volcal::DimensionError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const volcal::OutOfBoundsError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
