#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "volcal/linalg.hpp"
#include "volcal/rough.hpp"
#include "volcal/vol_surface.hpp"

namespace volcal {

enum class ModelKind { heston, rbergomi_flat, rbergomi_piecewise, fou };

std::string_view model_name(ModelKind kind);
ModelKind parse_model(std::string_view name);  // throws ValidationError
std::size_t model_param_count(ModelKind kind);  // 5 / 4 / 11 / 6
std::vector<std::string> model_param_names(ModelKind kind);

struct ParamBounds {
    std::vector<double> lower;
    std::vector<double> upper;

    static ParamBounds defaults(ModelKind kind);

    std::size_t size() const { return lower.size(); }
    bool contains(std::span<const double> p) const;
    void validate() const;

    bool operator==(const ParamBounds&) const = default;
};

struct DatasetSpec {
    ModelKind model = ModelKind::heston;
    ParamBounds bounds = ParamBounds::defaults(ModelKind::heston);
    VolGrid grid = VolGrid::standard();
    std::size_t n_train = 1275;
    std::size_t n_test = 225;
    McConfig mc;
    std::uint64_t seed = 1;
    std::size_t workers = 0;  // 0 = all cores; results do not depend on it

    void validate() const;
};

/// Rows of X are flattened surfaces (maturity-major), rows of Y the generating
/// parameters. The first spec.n_train rows form the training part.
struct CalibrationDataset {
    DatasetSpec spec;
    Matrix X;
    Matrix Y;

    std::size_t rows() const { return Y.rows(); }
};

/// Implied-vol surface of one parameter vector under the given model.
VolSurface model_surface(ModelKind kind, std::span<const double> params, const VolGrid& grid,
                         const McConfig& mc);

/// Seed of the Monte Carlo run behind a dataset row; a function of the
/// dataset seed and the row's parameters only.
std::uint64_t row_mc_seed(std::uint64_t seed, std::span<const double> params);

/// Surface of a dataset row, reproducible from its parameters.
VolSurface regenerate_row(const DatasetSpec& spec, std::span<const double> params);

/// n independent uniform draws inside the bounds; row i comes from substream i.
Matrix sample_params(const ParamBounds& bounds, std::size_t n, std::uint64_t seed);

/// Generates n_train + n_test rows. Draws whose surface cannot be produced
/// (price out of bounds, non-finite numerics) are replaced by further draws of
/// the same row's stream. Throws BudgetExhausted when the total number of
/// draws would exceed 10x the requested rows.
CalibrationDataset generate(const DatasetSpec& spec);

/// First n_train rows and the rest.
std::pair<CalibrationDataset, CalibrationDataset> split(const CalibrationDataset& ds);

/// Rows [begin, end) as a dataset of its own (n_train = rows, n_test = 0).
CalibrationDataset slice_rows(const CalibrationDataset& ds, std::size_t begin, std::size_t end);

void save_csv(const CalibrationDataset& ds, std::ostream& out);
void save_csv(const CalibrationDataset& ds, const std::filesystem::path& path);

/// Parses the dataset format. The loaded spec has n_train = rows, n_test = 0
/// and a default Monte Carlo configuration. Throws FormatError.
CalibrationDataset load_csv(std::istream& in);
CalibrationDataset load_csv(const std::filesystem::path& path);

}  // namespace volcal
