#pragma once

// Discrete div(y^g grad .) in flux-difference form, the boundary flux trace
// lim y^gamma u_y, the fractional operator realised through that trace, and
// the weighted heat kernel G_gamma.

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "fracsig/error.hpp"
#include "fracsig/mesh.hpp"
#include "fracsig/special.hpp"

namespace fracsig {

/// Face conductances and dual measures for div(y^g grad .) on a grid.
/// Row k of the operator is (1/m_k) * sum_nb c_nb (u_nb - u_k); faces on the
/// slab boundary carry no conductance (the caller adds boundary fluxes).
struct OperatorStencil {
    GridPtr grid;
    double weight_exponent = 0.0;
    std::vector<double> west, east, south, north;
    std::vector<double> measure;

    std::size_t size() const noexcept { return measure.size(); }
};

inline OperatorStencil build_stencil(const GridPtr& grid, double g) {
    require(g > -1.0 && g < 1.0, "weight exponent must lie in (-1, 1)");
    const Grid& gr = *grid;
    const int nx = gr.nx(), ny = gr.ny();
    OperatorStencil st;
    st.grid = grid;
    st.weight_exponent = g;
    const std::size_t n = gr.node_count();
    st.west.assign(n, 0.0);
    st.east.assign(n, 0.0);
    st.south.assign(n, 0.0);
    st.north.assign(n, 0.0);
    st.measure.assign(n, 0.0);

    std::vector<double> band(ny + 1), vcond(ny);
    for (int j = 0; j <= ny; ++j) band[j] = weight_integral(gr.band_lo(j), gr.band_hi(j), g);
    for (int j = 0; j < ny; ++j)
        vcond[j] = 1.0 / (flux_coordinate(gr.y(j + 1), g) - flux_coordinate(gr.y(j), g));

    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i <= nx; ++i) {
            const std::size_t k = gr.index(i, j);
            st.measure[k] = gr.dual_dx(i) * band[j];
            if (i > 0) st.west[k] = band[j] / (gr.x(i) - gr.x(i - 1));
            if (i < nx) st.east[k] = band[j] / (gr.x(i + 1) - gr.x(i));
            if (j > 0) st.south[k] = gr.dual_dx(i) * vcond[j - 1];
            if (j < ny) st.north[k] = gr.dual_dx(i) * vcond[j];
        }
    }
    return st;
}

inline OperatorStencil build_stencil(const GridPtr& grid) { return build_stencil(grid, grid->gamma()); }

/// Net conductive flux into the dual box of node (i, j).
inline double stencil_flux(const OperatorStencil& st, std::span<const double> u, int i, int j) {
    const Grid& g = *st.grid;
    const std::size_t k = g.index(i, j);
    double s = 0.0;
    if (st.west[k] != 0.0) s += st.west[k] * (u[g.index(i - 1, j)] - u[k]);
    if (st.east[k] != 0.0) s += st.east[k] * (u[g.index(i + 1, j)] - u[k]);
    if (st.south[k] != 0.0) s += st.south[k] * (u[g.index(i, j - 1)] - u[k]);
    if (st.north[k] != 0.0) s += st.north[k] * (u[g.index(i, j + 1)] - u[k]);
    return s;
}

/// Applies (1/y^g) div(y^g grad u) in its conservative discrete form.
inline std::vector<double> apply_operator(const OperatorStencil& st, std::span<const double> u) {
    require(u.size() == st.size(), "field does not match stencil");
    const Grid& g = *st.grid;
    std::vector<double> out(u.size());
    for (int j = 0; j < g.nodes_y(); ++j)
        for (int i = 0; i < g.nodes_x(); ++i) {
            const std::size_t k = g.index(i, j);
            out[k] = stencil_flux(st, u, i, j) / st.measure[k];
        }
    return out;
}

inline Field apply_L_gamma(const Field& u, const Grid& grid) {
    require(u.grid && u.grid.get() == &grid, "field is defined on a different grid");
    const auto st = build_stencil(u.grid);
    return Field(u.grid, apply_operator(st, u.values), u.time);
}

/// Boundary values w(x_i) approximating lim_{y->0+} y^gamma u_y.
struct FluxTrace {
    std::vector<double> values;  // one per x node
    double zeta1 = 0.0;          // y_1^{1-gamma}/(1-gamma)
    double time = 0.0;
};

/// One-sided difference in zeta = y^{1-gamma}/(1-gamma); exact when u is
/// affine in zeta along each vertical line.
inline FluxTrace flux_trace(const Field& u, const Grid& grid) {
    require(u.grid && u.grid.get() == &grid, "field is defined on a different grid");
    FluxTrace w;
    w.zeta1 = flux_coordinate(grid.y(1), grid.gamma());
    w.time = u.time;
    w.values.resize(grid.nodes_x());
    for (int i = 0; i < grid.nodes_x(); ++i) w.values[i] = (u.at(i, 1) - u.at(i, 0)) / w.zeta1;
    return w;
}

/// Three-point variant: derivative at zeta = 0 of the quadratic in zeta
/// through rows 0, 1, 2.
inline FluxTrace flux_trace_quadratic(const Field& u, const Grid& grid) {
    require(u.grid && u.grid.get() == &grid, "field is defined on a different grid");
    const double z1 = flux_coordinate(grid.y(1), grid.gamma());
    const double z2 = flux_coordinate(grid.y(2), grid.gamma());
    FluxTrace w;
    w.zeta1 = z1;
    w.time = u.time;
    w.values.resize(grid.nodes_x());
    const double c0 = -(z1 + z2) / (z1 * z2);
    const double c1 = z2 / (z1 * (z2 - z1));
    const double c2 = -z1 / (z2 * (z2 - z1));
    for (int i = 0; i < grid.nodes_x(); ++i)
        w.values[i] = c0 * u.at(i, 0) + c1 * u.at(i, 1) + c2 * u.at(i, 2);
    return w;
}

/// (d_t - Delta)^s u on the thin boundary, realised as -c_s * lim y^gamma u_y.
inline std::vector<double> eval_Hs(const Field& u, const Grid& grid, double c_s) {
    require(c_s > 0.0, "normalising constant c_s must be positive");
    auto w = flux_trace(u, grid);
    for (double& v : w.values) v *= -c_s;
    return w.values;
}

/// Normalisation data for the weighted heat kernel in dimension n
/// (n - 1 tangential coordinates plus y).
struct HeatKernelParams {
    int n = 2;
    double gamma = 0.0;
    double c_n_gamma = 0.0;
};

inline HeatKernelParams make_heat_kernel(int n, double gamma) {
    require(n >= 2, "heat kernel needs n >= 2");
    require(gamma > -1.0 && gamma < 1.0, "gamma must lie in (-1, 1)");
    HeatKernelParams p;
    p.n = n;
    p.gamma = gamma;
    p.c_n_gamma = 1.0 / (std::pow(4.0 * std::numbers::pi, 0.5 * (n - 1)) *
                         std::abs(special::lanczos_gamma(0.5 * (gamma + 1.0))));
    return p;
}

/// G_gamma(x, y, t) = c / t^{(n+gamma)/2} exp(-(|x|^2 + y^2)/(4t)) for t > 0, else 0.
inline double eval_G_gamma(std::span<const double> x, double y, double t, const HeatKernelParams& p) {
    if (t <= 0.0) return 0.0;
    require(static_cast<int>(x.size()) == p.n - 1, "point dimension does not match kernel");
    double r2 = y * y;
    for (double xi : x) r2 += xi * xi;
    return p.c_n_gamma / std::pow(t, 0.5 * (p.n + p.gamma)) * std::exp(-r2 / (4.0 * t));
}

inline double eval_G_gamma(double x1, double y, double t, const HeatKernelParams& p) {
    const double x[1] = {x1};
    return eval_G_gamma(std::span<const double>(x, 1), y, t, p);
}

} // namespace fracsig
