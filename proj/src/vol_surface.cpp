#include "volcal/vol_surface.hpp"

#include <cmath>
#include <sstream>

#include "volcal/error.hpp"

namespace volcal {

namespace {

void require_ascending(const std::vector<double>& v, const char* what) {
    if (v.empty()) throw ValidationError(std::string("grid ") + what + " must not be empty");
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] > 0.0) || !std::isfinite(v[i]))
            throw ValidationError(std::string("grid ") + what + " must be positive and finite");
        if (i > 0 && !(v[i] > v[i - 1]))
            throw ValidationError(std::string("grid ") + what + " must be strictly ascending");
    }
}

void append_list(std::ostringstream& os, const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
}

}  // namespace

VolGrid VolGrid::standard() {
    return VolGrid{{0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5},
                   {0.1, 0.3, 0.6, 0.9, 1.2, 1.5, 1.8, 2.0}};
}

void VolGrid::validate() const {
    require_ascending(strikes, "strikes");
    require_ascending(maturities, "maturities");
}

std::string VolGrid::describe() const {
    std::ostringstream os;
    os << "strikes=[";
    append_list(os, strikes);
    os << "] maturities=[";
    append_list(os, maturities);
    os << "]";
    return os.str();
}

VolSurface VolSurface::from_flat(const VolGrid& grid, std::span<const double> flat) {
    if (flat.size() != grid.size())
        throw DimensionError("surface of " + std::to_string(flat.size()) +
                             " values does not fit grid of " + std::to_string(grid.size()));
    VolSurface s{grid, Matrix(grid.maturities.size(), grid.strikes.size(),
                              std::vector<double>(flat.begin(), flat.end()))};
    return s;
}

std::vector<double> VolSurface::flatten() const {
    return std::vector<double>(vols.data().begin(), vols.data().end());
}

void VolSurface::validate() const {
    grid.validate();
    if (vols.rows() != grid.maturities.size() || vols.cols() != grid.strikes.size())
        throw DimensionError("surface shape does not match its grid");
    for (double v : vols.data())
        if (!(v > 0.0 && v < 5.0)) throw ValidationError("implied vol outside (0, 5)");
}

}  // namespace volcal
