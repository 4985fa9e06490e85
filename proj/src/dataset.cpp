#include "volcal/dataset.hpp"

#include <atomic>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "volcal/error.hpp"
#include "volcal/heston.hpp"
#include "volcal/parallel.hpp"
#include "volcal/rng.hpp"

namespace volcal {

namespace {

constexpr std::string_view kMagic = "# volcal-dataset v1";
constexpr std::size_t kBudgetFactor = 10;

std::string format_double(double v) {
    char buf[32];
    const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf, static_cast<std::size_t>(len));
}

std::string join(std::span<const double> v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v[i]);
    }
    return out;
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = s.find(sep, start);
        parts.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) return parts;
        start = pos + 1;
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<double> parse_list(std::string_view s, std::size_t line, const char* key) {
    std::vector<double> out;
    for (auto part : split_on(s, ',')) {
        double v;
        if (!parse_double(part, v))
            throw FormatError(FormatError::Kind::malformed_header, line,
                              std::string("bad number in ") + key + ": '" + std::string(part) + "'");
        out.push_back(v);
    }
    return out;
}

std::vector<std::string> column_names(std::size_t params, std::size_t vols) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < params; ++i) names.push_back("param_" + std::to_string(i));
    for (std::size_t i = 0; i < vols; ++i) names.push_back("iv_" + std::to_string(i));
    return names;
}

}  // namespace

std::string_view model_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::heston: return "heston";
        case ModelKind::rbergomi_flat: return "rbergomi_flat";
        case ModelKind::rbergomi_piecewise: return "rbergomi_piecewise";
        case ModelKind::fou: return "fou";
    }
    return "unknown";
}

ModelKind parse_model(std::string_view name) {
    for (auto kind : {ModelKind::heston, ModelKind::rbergomi_flat, ModelKind::rbergomi_piecewise, ModelKind::fou})
        if (model_name(kind) == name) return kind;
    throw ValidationError("unknown model '" + std::string(name) +
                          "' (expected heston, rbergomi_flat, rbergomi_piecewise or fou)");
}

std::size_t model_param_count(ModelKind kind) {
    switch (kind) {
        case ModelKind::heston: return HestonParams::kCount;
        case ModelKind::rbergomi_flat: return RBergomiParams::kFlatCount;
        case ModelKind::rbergomi_piecewise: return RBergomiParams::kPiecewiseCount;
        case ModelKind::fou: return FouParams::kCount;
    }
    return 0;
}

std::vector<std::string> model_param_names(ModelKind kind) {
    switch (kind) {
        case ModelKind::heston: return {"v0", "kappa", "theta", "xi", "rho"};
        case ModelKind::rbergomi_flat: return {"xi0", "eta", "rho", "H"};
        case ModelKind::rbergomi_piecewise: {
            std::vector<std::string> names;
            for (int i = 1; i <= 8; ++i) names.push_back("xi" + std::to_string(i));
            names.insert(names.end(), {"eta", "rho", "H"});
            return names;
        }
        case ModelKind::fou: return {"nu", "alpha", "m", "x0", "H", "rho"};
    }
    return {};
}

ParamBounds ParamBounds::defaults(ModelKind kind) {
    switch (kind) {
        case ModelKind::heston:
            return {{0.01, 0.5, 0.01, 0.1, -0.95}, {0.16, 5.0, 0.16, 1.0, -0.1}};
        case ModelKind::rbergomi_flat:
            return {{0.01, 0.5, -0.95, 0.025}, {0.16, 4.0, -0.1, 0.5}};
        case ModelKind::rbergomi_piecewise: {
            ParamBounds b{std::vector<double>(8, 0.01), std::vector<double>(8, 0.16)};
            b.lower.insert(b.lower.end(), {0.5, -0.95, 0.025});
            b.upper.insert(b.upper.end(), {4.0, -0.1, 0.5});
            return b;
        }
        case ModelKind::fou: {
            const double lo = std::log(0.1);
            const double hi = std::log(0.4);
            return {{0.1, 0.0, lo, lo, 0.05, -0.95}, {1.5, 2.0, hi, hi, 0.5, -0.1}};
        }
    }
    return {};
}

bool ParamBounds::contains(std::span<const double> p) const {
    if (p.size() != size()) return false;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (!(p[i] >= lower[i] && p[i] <= upper[i])) return false;
    return true;
}

void ParamBounds::validate() const {
    if (lower.size() != upper.size())
        throw DimensionError("bounds have " + std::to_string(lower.size()) + " lower and " +
                             std::to_string(upper.size()) + " upper values");
    if (lower.empty()) throw ValidationError("bounds are empty");
    for (std::size_t i = 0; i < lower.size(); ++i)
        if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i]))
            throw ValidationError("bounds for parameter " + std::to_string(i) +
                                  " must be finite with lower < upper");
}

void DatasetSpec::validate() const {
    bounds.validate();
    grid.validate();
    if (bounds.size() != model_param_count(model))
        throw DimensionError("model " + std::string(model_name(model)) + " has " +
                             std::to_string(model_param_count(model)) + " parameters but bounds have " +
                             std::to_string(bounds.size()));
    if (n_train == 0) throw ValidationError("n_train must be positive");
    if (model != ModelKind::heston) mc.validate();
}

VolSurface model_surface(ModelKind kind, std::span<const double> params, const VolGrid& grid,
                         const McConfig& mc) {
    if (params.size() != model_param_count(kind))
        throw DimensionError("model " + std::string(model_name(kind)) + " expects " +
                             std::to_string(model_param_count(kind)) + " parameters, got " +
                             std::to_string(params.size()));
    switch (kind) {
        case ModelKind::heston: return heston_surface(HestonParams::from_span(params), grid);
        case ModelKind::rbergomi_flat:
        case ModelKind::rbergomi_piecewise:
            return rbergomi_surface(RBergomiParams::from_span(params), grid, mc);
        case ModelKind::fou: return fou_surface(FouParams::from_span(params), grid, mc);
    }
    throw ValidationError("unknown model");
}

std::uint64_t row_mc_seed(std::uint64_t seed, std::span<const double> params) {
    std::uint64_t h = mix_seed(seed, 0x6d635f726f77ULL);
    for (double v : params) h = mix_seed(h, std::bit_cast<std::uint64_t>(v));
    return h;
}

VolSurface regenerate_row(const DatasetSpec& spec, std::span<const double> params) {
    McConfig mc = spec.mc;
    mc.seed = row_mc_seed(spec.seed, params);
    mc.workers = 1;
    return model_surface(spec.model, params, spec.grid, mc);
}

namespace {

void draw_params(const ParamBounds& b, Rng& rng, std::span<double> out) {
    for (std::size_t j = 0; j < b.size(); ++j) out[j] = b.lower[j] + rng.uniform() * (b.upper[j] - b.lower[j]);
}

}  // namespace

Matrix sample_params(const ParamBounds& bounds, std::size_t n, std::uint64_t seed) {
    bounds.validate();
    Matrix out(n, bounds.size());
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng = Rng::substream(seed, i);
        draw_params(bounds, rng, out.row(i));
    }
    return out;
}

CalibrationDataset generate(const DatasetSpec& spec) {
    spec.validate();
    const std::size_t rows = spec.n_train + spec.n_test;
    const std::size_t p = spec.bounds.size();
    const std::size_t budget = kBudgetFactor * rows;
    CalibrationDataset ds{spec, Matrix(rows, spec.grid.size()), Matrix(rows, p)};

    // Every row walks its own deterministic sequence of draws, so the total
    // number of draws is fixed by the spec; the shared counter only lets a
    // hopeless run stop early.
    std::atomic<std::size_t> draws{0};
    parallel_for(rows, spec.workers, [&](std::size_t r) {
        Rng rng = Rng::substream(spec.seed, r);
        std::vector<double> y(p);
        for (;;) {
            if (draws.fetch_add(1) + 1 > budget)
                throw BudgetExhausted("generation needed more than " + std::to_string(budget) +
                                      " parameter draws for " + std::to_string(rows) + " rows");
            draw_params(spec.bounds, rng, y);
            try {
                const VolSurface s = regenerate_row(spec, y);
                const auto flat = s.flatten();
                std::copy(flat.begin(), flat.end(), ds.X.row(r).begin());
                std::copy(y.begin(), y.end(), ds.Y.row(r).begin());
                return;
            } catch (const PriceOutOfBounds&) {
            } catch (const NonFiniteError&) {
            } catch (const NoConvergence&) {
            }
        }
    });
    return ds;
}

CalibrationDataset slice_rows(const CalibrationDataset& ds, std::size_t begin, std::size_t end) {
    if (begin > end || end > ds.rows()) throw DimensionError("row range out of bounds");
    CalibrationDataset out{ds.spec, Matrix(end - begin, ds.X.cols()), Matrix(end - begin, ds.Y.cols())};
    for (std::size_t r = begin; r < end; ++r) {
        std::copy(ds.X.row(r).begin(), ds.X.row(r).end(), out.X.row(r - begin).begin());
        std::copy(ds.Y.row(r).begin(), ds.Y.row(r).end(), out.Y.row(r - begin).begin());
    }
    out.spec.n_train = end - begin;
    out.spec.n_test = 0;
    return out;
}

std::pair<CalibrationDataset, CalibrationDataset> split(const CalibrationDataset& ds) {
    const std::size_t n_train = std::min(ds.spec.n_train, ds.rows());
    auto train = slice_rows(ds, 0, n_train);
    auto test = slice_rows(ds, n_train, ds.rows());
    return {std::move(train), std::move(test)};
}

void save_csv(const CalibrationDataset& ds, std::ostream& out) {
    const auto& s = ds.spec;
    out << kMagic << "; model=" << model_name(s.model) << "; grid_strikes=" << join(s.grid.strikes)
        << "; grid_maturities=" << join(s.grid.maturities) << "; bounds_lb=" << join(s.bounds.lower)
        << "; bounds_ub=" << join(s.bounds.upper) << "; seed=" << s.seed << '\n';
    const auto names = column_names(ds.Y.cols(), ds.X.cols());
    for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
    out << '\n';
    std::string line;
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        line.clear();
        for (double v : ds.Y.row(r)) {
            if (!line.empty()) line += ',';
            line += format_double(v);
        }
        for (double v : ds.X.row(r)) {
            line += ',';
            line += format_double(v);
        }
        line += '\n';
        out << line;
    }
}

void save_csv(const CalibrationDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    save_csv(ds, out);
    out.flush();
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

CalibrationDataset load_csv(std::istream& in) {
    using Kind = FormatError::Kind;
    std::string line;
    if (!std::getline(in, line)) throw FormatError(Kind::malformed_header, 1, "empty file");
    std::string_view head = trim(line);
    if (head.substr(0, kMagic.size()) != kMagic)
        throw FormatError(Kind::malformed_header, 1, "missing '# volcal-dataset v1' marker");

    DatasetSpec spec;
    bool have_model = false, have_strikes = false, have_maturities = false;
    bool have_lb = false, have_ub = false, have_seed = false;
    const auto fields = split_on(head.substr(kMagic.size()), ';');
    for (std::size_t i = 1; i < fields.size(); ++i) {
        const auto field = trim(fields[i]);
        const auto eq = field.find('=');
        if (eq == std::string_view::npos)
            throw FormatError(Kind::malformed_header, 1, "header field without '=': '" + std::string(field) + "'");
        const auto key = trim(field.substr(0, eq));
        const auto value = trim(field.substr(eq + 1));
        if (key == "model") {
            try {
                spec.model = parse_model(value);
            } catch (const ValidationError& e) {
                throw FormatError(Kind::malformed_header, 1, e.what());
            }
            have_model = true;
        } else if (key == "grid_strikes") {
            spec.grid.strikes = parse_list(value, 1, "grid_strikes");
            have_strikes = true;
        } else if (key == "grid_maturities") {
            spec.grid.maturities = parse_list(value, 1, "grid_maturities");
            have_maturities = true;
        } else if (key == "bounds_lb") {
            spec.bounds.lower = parse_list(value, 1, "bounds_lb");
            have_lb = true;
        } else if (key == "bounds_ub") {
            spec.bounds.upper = parse_list(value, 1, "bounds_ub");
            have_ub = true;
        } else if (key == "seed") {
            const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), spec.seed);
            if (ec != std::errc() || ptr != value.data() + value.size())
                throw FormatError(Kind::malformed_header, 1, "bad seed '" + std::string(value) + "'");
            have_seed = true;
        }
    }
    if (!(have_model && have_strikes && have_maturities && have_lb && have_ub && have_seed))
        throw FormatError(Kind::malformed_header, 1,
                          "header needs model, grid_strikes, grid_maturities, bounds_lb, bounds_ub and seed");
    try {
        spec.grid.validate();
        spec.bounds.validate();
        if (spec.bounds.size() != model_param_count(spec.model))
            throw ValidationError("bounds do not match the parameter count of the model");
    } catch (const Error& e) {
        throw FormatError(Kind::malformed_header, 1, e.what());
    }

    const std::size_t p = spec.bounds.size();
    const std::size_t nv = spec.grid.size();
    if (!std::getline(in, line)) throw FormatError(Kind::malformed_header, 2, "missing column header");
    const auto cols = split_on(trim(line), ',');
    const auto expected = column_names(p, nv);
    bool header_ok = cols.size() == expected.size();
    for (std::size_t i = 0; header_ok && i < cols.size(); ++i) header_ok = trim(cols[i]) == expected[i];
    if (!header_ok)
        throw FormatError(Kind::malformed_header, 2,
                          "column header must be param_0..param_" + std::to_string(p - 1) + ",iv_0..iv_" +
                              std::to_string(nv - 1));

    std::vector<double> ys, xs;
    std::size_t line_no = 2;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = trim(line);
        if (body.empty()) continue;
        const auto cells = split_on(body, ',');
        if (cells.size() != p + nv)
            throw FormatError(Kind::row_length, line_no,
                              "expected " + std::to_string(p + nv) + " values, found " + std::to_string(cells.size()));
        for (std::size_t i = 0; i < cells.size(); ++i) {
            double v;
            if (!parse_double(cells[i], v) || !std::isfinite(v))
                throw FormatError(Kind::non_numeric, line_no,
                                  "column " + std::to_string(i + 1) + ": '" + std::string(trim(cells[i])) +
                                      "' is not a finite number");
            (i < p ? ys : xs).push_back(v);
        }
        ++rows;
    }
    spec.n_train = rows;
    spec.n_test = 0;
    return CalibrationDataset{spec, Matrix(rows, nv, std::move(xs)), Matrix(rows, p, std::move(ys))};
}

CalibrationDataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    return load_csv(in);
}

}  // namespace volcal
