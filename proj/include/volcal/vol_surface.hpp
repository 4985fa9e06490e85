#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "volcal/linalg.hpp"

namespace volcal {

/// Fixed strike (moneyness) by maturity lattice.
struct VolGrid {
    std::vector<double> strikes;
    std::vector<double> maturities;

    /// 11 strikes 0.5..1.5 by 8 maturities 0.1..2.0.
    static VolGrid standard();

    std::size_t size() const { return strikes.size() * maturities.size(); }
    void validate() const;
    std::string describe() const;

    bool operator==(const VolGrid&) const = default;
};

/// Implied vols on a grid, stored maturities x strikes. Flattened views are
/// maturity-major: index = maturity_index * n_strikes + strike_index.
struct VolSurface {
    VolGrid grid;
    Matrix vols;

    static VolSurface from_flat(const VolGrid& grid, std::span<const double> flat);
    std::vector<double> flatten() const;
    void validate() const;
};

}  // namespace volcal
