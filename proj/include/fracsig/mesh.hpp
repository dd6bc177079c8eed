#pragma once

// Graded tensor meshes on the half-space slab [-X, X] x [0, Y] carrying the
// degenerate weight y^gamma. The y = 0 node layer is the thin (Signorini)
// boundary.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "fracsig/error.hpp"

namespace fracsig {

enum class Grading { uniform, xi_graded };

inline std::string to_string(Grading g) { return g == Grading::uniform ? "uniform" : "xi_graded"; }

inline Grading grading_from_string(const std::string& s) {
    if (s == "uniform") return Grading::uniform;
    if (s == "xi_graded") return Grading::xi_graded;
    throw InvalidArgument("unknown grading '" + s + "'");
}

/// Integral of y^g over [a, b], 0 <= a <= b, g > -1.
inline double weight_integral(double a, double b, double g) {
    return (std::pow(b, 1.0 + g) - std::pow(a, 1.0 + g)) / (1.0 + g);
}

/// zeta = y^{1-g}/(1-g), the variable in which the flux y^g u_y is a plain derivative.
inline double flux_coordinate(double y, double g) { return std::pow(y, 1.0 - g) / (1.0 - g); }

struct GridSpec {
    double x_extent = 1.0;  // x in [-X, X]
    double y_extent = 1.0;  // y in [0, Y]
    int nx = 64;            // intervals along x
    int ny = 32;            // intervals along y
    double gamma = 0.0;
    Grading grading = Grading::xi_graded;

    void validate() const {
        require(std::isfinite(gamma) && gamma > -1.0 && gamma < 1.0, "gamma must lie in (-1, 1)");
        require(x_extent > 0.0 && std::isfinite(x_extent), "x_extent must be positive");
        require(y_extent > 0.0 && std::isfinite(y_extent), "y_extent must be positive");
        require(nx >= 2 && ny >= 2, "nx and ny must be at least 2");
    }
};

/// Immutable tensor grid. Nodes are indexed k = j * (nx + 1) + i.
///
/// The discrete operator is vertex centred: each node owns the dual box
/// [x_{i-1/2}, x_{i+1/2}] x [y_{j-1/2}, y_{j+1/2}] clipped to the slab, and
/// all weighted measures are exact integrals of y^gamma.
class Grid {
public:
    explicit Grid(const GridSpec& spec) : spec_(spec) {
        spec_.validate();
        const int nx = spec_.nx, ny = spec_.ny;
        const double g = spec_.gamma;
        x_.resize(nx + 1);
        y_.resize(ny + 1);
        for (int i = 0; i <= nx; ++i) x_[i] = -spec_.x_extent + 2.0 * spec_.x_extent * i / nx;
        x_[nx] = spec_.x_extent;
        const double top = std::pow(spec_.y_extent, 1.0 + g);
        for (int j = 0; j <= ny; ++j) {
            const double frac = static_cast<double>(j) / ny;
            y_[j] = spec_.grading == Grading::uniform ? frac * spec_.y_extent
                                                      : std::pow(frac * top, 1.0 / (1.0 + g));
        }
        y_[0] = 0.0;
        y_[ny] = spec_.y_extent;

        cell_measure_.resize(static_cast<std::size_t>(nx) * ny);
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                cell_measure_[static_cast<std::size_t>(j) * nx + i] =
                    (x_[i + 1] - x_[i]) * weight_integral(y_[j], y_[j + 1], g);

        dual_dx_.resize(nx + 1);
        for (int i = 0; i <= nx; ++i) {
            const double lo = i == 0 ? x_[0] : 0.5 * (x_[i - 1] + x_[i]);
            const double hi = i == nx ? x_[nx] : 0.5 * (x_[i] + x_[i + 1]);
            dual_dx_[i] = hi - lo;
        }
        band_lo_.resize(ny + 1);
        band_hi_.resize(ny + 1);
        band_weight_.resize(ny + 1);
        for (int j = 0; j <= ny; ++j) {
            band_lo_[j] = j == 0 ? 0.0 : 0.5 * (y_[j - 1] + y_[j]);
            band_hi_[j] = j == ny ? y_[ny] : 0.5 * (y_[j] + y_[j + 1]);
            band_weight_[j] = weight_integral(band_lo_[j], band_hi_[j], g);
        }
        zeta_gap_.resize(ny);
        for (int j = 0; j < ny; ++j)
            zeta_gap_[j] = flux_coordinate(y_[j + 1], g) - flux_coordinate(y_[j], g);
    }

    const GridSpec& spec() const noexcept { return spec_; }
    double gamma() const noexcept { return spec_.gamma; }
    int nx() const noexcept { return spec_.nx; }
    int ny() const noexcept { return spec_.ny; }
    int nodes_x() const noexcept { return spec_.nx + 1; }
    int nodes_y() const noexcept { return spec_.ny + 1; }
    std::size_t node_count() const noexcept {
        return static_cast<std::size_t>(nodes_x()) * static_cast<std::size_t>(nodes_y());
    }
    std::size_t cell_count() const noexcept { return static_cast<std::size_t>(spec_.nx) * spec_.ny; }
    std::size_t index(int i, int j) const noexcept {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(nodes_x()) + static_cast<std::size_t>(i);
    }

    const std::vector<double>& x_nodes() const noexcept { return x_; }
    const std::vector<double>& y_nodes() const noexcept { return y_; }
    double x(int i) const noexcept { return x_[i]; }
    double y(int j) const noexcept { return y_[j]; }

    /// Exact integral of y^gamma over tensor cell (i, j) = [x_i, x_{i+1}] x [y_j, y_{j+1}].
    double cell_measure(int i, int j) const noexcept {
        return cell_measure_[static_cast<std::size_t>(j) * spec_.nx + i];
    }
    const std::vector<double>& cell_measures() const noexcept { return cell_measure_; }

    double dual_dx(int i) const noexcept { return dual_dx_[i]; }
    double band_lo(int j) const noexcept { return band_lo_[j]; }
    double band_hi(int j) const noexcept { return band_hi_[j]; }

    /// Integral of y^gamma over the dual band of row j (lateral face weight).
    double lateral_face_weight(int j) const noexcept { return band_weight_[j]; }

    /// Integral of y^{-gamma} between rows j and j+1. Its inverse is the
    /// vertical face conductance, exact for fields with constant y^gamma u_y.
    double zeta_gap(int j) const noexcept { return zeta_gap_[j]; }

    /// Weighted measure of the dual box of node (i, j).
    double dual_measure(int i, int j) const noexcept { return dual_dx_[i] * band_weight_[j]; }

    bool is_outer_boundary(int i, int j) const noexcept { return i == 0 || i == spec_.nx || j == spec_.ny; }
    bool is_signorini(int i, int j) const noexcept { return j == 0 && i > 0 && i < spec_.nx; }

    double total_measure() const {
        double s = 0.0;
        for (double m : cell_measure_) s += m;
        return s;
    }

    /// Index of the interval [x_i, x_{i+1}] containing xq (clamped).
    int locate_x(double xq) const {
        auto it = std::upper_bound(x_.begin(), x_.end(), xq);
        int i = static_cast<int>(it - x_.begin()) - 1;
        return std::clamp(i, 0, spec_.nx - 1);
    }
    int locate_y(double yq) const {
        auto it = std::upper_bound(y_.begin(), y_.end(), yq);
        int j = static_cast<int>(it - y_.begin()) - 1;
        return std::clamp(j, 0, spec_.ny - 1);
    }

    /// Smallest tangential spacing; used to judge whether a radius is resolved.
    double min_dx() const {
        double h = x_[1] - x_[0];
        for (int i = 1; i < spec_.nx; ++i) h = std::min(h, x_[i + 1] - x_[i]);
        return h;
    }

private:
    GridSpec spec_;
    std::vector<double> x_, y_;
    std::vector<double> cell_measure_;
    std::vector<double> dual_dx_;
    std::vector<double> band_lo_, band_hi_, band_weight_;
    std::vector<double> zeta_gap_;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr build_grid(const GridSpec& spec) { return std::make_shared<const Grid>(spec); }

/// Exact weighted measure of cell `cell` (row-major over cells).
inline double weighted_cell_measure(const Grid& grid, std::size_t cell) {
    if (cell >= grid.cell_count()) throw InvalidArgument("cell index out of range");
    const int i = static_cast<int>(cell % static_cast<std::size_t>(grid.nx()));
    const int j = static_cast<int>(cell / static_cast<std::size_t>(grid.nx()));
    return grid.cell_measure(i, j);
}

/// Scalar nodal values at one time level.
struct Field {
    GridPtr grid;
    std::vector<double> values;
    double time = 0.0;

    Field() = default;
    Field(GridPtr g, double t = 0.0) : grid(std::move(g)), values(grid->node_count(), 0.0), time(t) {}
    Field(GridPtr g, std::vector<double> v, double t) : grid(std::move(g)), values(std::move(v)), time(t) {
        if (values.size() != grid->node_count()) throw InvalidArgument("field size does not match grid");
    }

    double& at(int i, int j) { return values[grid->index(i, j)]; }
    double at(int i, int j) const { return values[grid->index(i, j)]; }

    bool finite() const {
        return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
    }
};

/// Samples f(x, y) on every node.
template <class F>
Field sample_field(const GridPtr& grid, F&& f, double t = 0.0) {
    Field out(grid, t);
    for (int j = 0; j < grid->nodes_y(); ++j)
        for (int i = 0; i < grid->nodes_x(); ++i) out.at(i, j) = f(grid->x(i), grid->y(j));
    return out;
}

} // namespace fracsig
