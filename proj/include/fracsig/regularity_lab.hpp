#pragma once

// Diagnostics that turn regularity statements into numbers: growth and flux
// exponents at free boundary points, the Gaussian-weighted monotonicity
// functional of the flux field, parabolic density of the contact set,
// frequency, Harnack and Poincare ratios, blow-up comparison, decay of u_t
// and free boundary extraction.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "fracsig/error.hpp"
#include "fracsig/mesh.hpp"
#include "fracsig/profiles.hpp"
#include "fracsig/sampling.hpp"
#include "fracsig/special.hpp"
#include "fracsig/trajectory.hpp"
#include "fracsig/weighted_ops.hpp"

namespace fracsig::lab {

/// A point (x0, 0, t0) on the thin space.
struct ThinPoint {
    double x = 0.0;
    double t = 0.0;
};

enum class CylinderFlavor { Q, Qtilde, Bstar };

inline std::string to_string(CylinderFlavor f) {
    switch (f) {
    case CylinderFlavor::Q: return "Q";
    case CylinderFlavor::Qtilde: return "Qtilde";
    default: return "Bstar";
    }
}

inline CylinderFlavor flavor_from_string(const std::string& s) {
    if (s == "Q") return CylinderFlavor::Q;
    if (s == "Qtilde") return CylinderFlavor::Qtilde;
    if (s == "Bstar") return CylinderFlavor::Bstar;
    throw InvalidArgument("unknown cylinder flavor '" + s + "'");
}

/// Q:      half-ball B_r x (t0 - r^2, t0]
/// Qtilde: |x - x0| < C1 r, y < C2 r, t in (t0 - (C3 r)^2, t0]
/// Bstar:  (x - x0)^2 + y^2 + (t - t0)^2 < r^2
struct CylinderSpec {
    ThinPoint center;
    double r = 0.1;
    CylinderFlavor flavor = CylinderFlavor::Q;
    double C1 = 1.0, C2 = 1.0, C3 = 1.0;

    /// Length of the past time window.
    double window() const {
        switch (flavor) {
        case CylinderFlavor::Q: return r * r;
        case CylinderFlavor::Qtilde: return (C3 * r) * (C3 * r);
        default: return r;
        }
    }
    double x_reach() const { return flavor == CylinderFlavor::Qtilde ? C1 * r : r; }

    bool contains(double x, double y, double t) const {
        const double dx = x - center.x, dt = t - center.t;
        if (dt > 1e-12) return false;
        switch (flavor) {
        case CylinderFlavor::Q: return dx * dx + y * y <= r * r && -dt <= r * r + 1e-12;
        case CylinderFlavor::Qtilde:
            return std::abs(dx) <= C1 * r && y <= C2 * r && -dt <= (C3 * r) * (C3 * r) + 1e-12;
        default: return dx * dx + y * y + dt * dt <= r * r + 1e-12;
        }
    }
};

/// Least-squares slope of log m(r) against log r.
struct ExponentFit {
    std::vector<double> radii;
    std::vector<double> values;
    std::vector<bool> used;
    double exponent = 0.0;
    double log_constant = 0.0;
    double residual = 0.0;  // RMS of the log residuals over used radii
    bool degenerate = false;
    std::string status = "ok";
    std::vector<std::string> notes;
};

namespace detail {

inline void fit_loglog(ExponentFit& f) {
    double scale = 0.0;
    for (double v : f.values) scale = std::max(scale, std::abs(v));
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < f.radii.size(); ++k) {
        if (!f.used[k]) continue;
        if (!(f.values[k] > 1e-14 * std::max(scale, 1e-300)) || f.values[k] <= 1e-300) {
            f.used[k] = false;
            continue;
        }
        lx.push_back(std::log(f.radii[k]));
        ly.push_back(std::log(f.values[k]));
    }
    if (scale <= 1e-14) {
        f.degenerate = true;
        f.status = "degenerate";
        f.notes.push_back("measured values vanish identically");
        return;
    }
    if (lx.size() < 2) {
        f.status = "insufficient";
        f.notes.push_back("fewer than two usable radii");
        return;
    }
    const double n = static_cast<double>(lx.size());
    double mx = 0, my = 0;
    for (std::size_t k = 0; k < lx.size(); ++k) {
        mx += lx[k];
        my += ly[k];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < lx.size(); ++k) {
        sxx += (lx[k] - mx) * (lx[k] - mx);
        sxy += (lx[k] - mx) * (ly[k] - my);
    }
    f.exponent = sxy / sxx;
    f.log_constant = my - f.exponent * mx;
    double ss = 0;
    for (std::size_t k = 0; k < lx.size(); ++k) {
        const double e = ly[k] - (f.log_constant + f.exponent * lx[k]);
        ss += e * e;
    }
    f.residual = std::sqrt(ss / n);
}

inline double psi_or_zero(double psi) { return std::isfinite(psi) ? psi : 0.0; }

} // namespace detail

/// Fits a power law to arbitrary samples m(r) (no resolution checks).
inline ExponentFit fit_power_law(const std::vector<double>& radii, const std::vector<double>& values) {
    require(radii.size() == values.size(), "radii and values differ in length");
    ExponentFit f;
    f.radii = radii;
    f.values = values;
    f.used.assign(radii.size(), true);
    detail::fit_loglog(f);
    return f;
}

/// Log-spaced radii between r_min and r_max.
inline std::vector<double> log_radii(double r_min, double r_max, int count) {
    require(r_min > 0.0 && r_max > r_min && count >= 2, "need 0 < r_min < r_max and count >= 2");
    std::vector<double> r(count);
    for (int k = 0; k < count; ++k) r[k] = r_min * std::pow(r_max / r_min, static_cast<double>(k) / (count - 1));
    return r;
}

/// True when the contact indicator changes within `cells` nodes of x at the
/// snapshot nearest t.
inline bool on_free_boundary(const Trajectory& tr, ThinPoint p, int cells = 2) {
    const auto& snap = tr.snapshots[tr.nearest(p.t)];
    const Grid& g = *tr.grid;
    const int i = std::clamp(static_cast<int>(std::lround((p.x - g.x(0)) / (g.x(1) - g.x(0)))), 0, g.nx());
    bool any_contact = false, any_free = false;
    for (int k = std::max(1, i - cells); k <= std::min(g.nx() - 1, i + cells); ++k) {
        if (snap.contact[k]) any_contact = true;
        else any_free = true;
    }
    return any_contact && any_free;
}

struct FitOptions {
    CylinderFlavor flavor = CylinderFlavor::Q;
    double C1 = 1.0, C2 = 1.0, C3 = 1.0;
    int min_cells = 4;                // radii below min_cells * dx are excluded
    bool check_free_boundary = true;
};

namespace detail {

inline CylinderSpec cylinder(ThinPoint p, double r, const FitOptions& o) {
    CylinderSpec c;
    c.center = p;
    c.r = r;
    c.flavor = o.flavor;
    c.C1 = o.C1;
    c.C2 = o.C2;
    c.C3 = o.C3;
    return c;
}

/// Marks radii that are under-resolved or leave the data window.
inline void screen_radii(ExponentFit& f, const Trajectory& tr, ThinPoint p, const FitOptions& o) {
    const Grid& g = *tr.grid;
    const double h = g.min_dx();
    f.used.assign(f.radii.size(), true);
    for (std::size_t k = 0; k < f.radii.size(); ++k) {
        const auto c = cylinder(p, f.radii[k], o);
        if (f.radii[k] < o.min_cells * h) {
            f.used[k] = false;
            if (f.radii[k] < 3 * h) f.notes.push_back("radius " + std::to_string(f.radii[k]) + " under-resolved");
            else f.notes.push_back("radius " + std::to_string(f.radii[k]) + " below the fitting floor");
        }
        if (p.x - c.x_reach() < g.x(0) || p.x + c.x_reach() > g.x(g.nx()) || f.radii[k] > g.y(g.ny())) {
            f.used[k] = false;
            f.notes.push_back("radius " + std::to_string(f.radii[k]) + " leaves the spatial domain");
        }
        if (tr.snapshots.size() > 1 && p.t - c.window() < tr.t_begin() - 1e-12) {
            f.used[k] = false;
            f.notes.push_back("radius " + std::to_string(f.radii[k]) + " leaves the time window");
        }
    }
}

} // namespace detail

namespace detail {

/// Spatial section of a cylinder at time t: a half-disc of radius rx (= ry)
/// or the box |x - x0| <= rx, y <= ry. Empty when t is outside the cylinder.
struct Section {
    bool disc = true;
    double rx = 0.0, ry = 0.0;
};

inline std::optional<Section> section(const CylinderSpec& c, double t) {
    const double dt = t - c.center.t;
    if (dt > 1e-12 || -dt > c.window() + 1e-12) return std::nullopt;
    switch (c.flavor) {
    case CylinderFlavor::Q: return Section{true, c.r, c.r};
    case CylinderFlavor::Qtilde: return Section{false, c.C1 * c.r, c.C2 * c.r};
    default: {
        const double rr = std::sqrt(std::max(0.0, c.r * c.r - dt * dt));
        return Section{true, rr, rr};
    }
    }
}

/// Linear interpolation of a thin-row array.
inline double row_at(const Grid& g, const std::vector<double>& row, double x) {
    const int i = g.locate_x(x);
    const double a = std::clamp((x - g.x(i)) / (g.x(i + 1) - g.x(i)), 0.0, 1.0);
    return (1 - a) * row[i] + a * row[i + 1];
}

/// sup of |f| over a section: nodes inside it plus interpolated samples on
/// its boundary, so the sup does not depend on how the centre sits in a cell.
template <class NodeValue, class PointValue>
double section_sup(const Grid& g, double x0, const Section& s, NodeValue&& node, PointValue&& point) {
    double sup = 0.0;
    const int i0 = g.locate_x(x0 - s.rx), i1 = g.locate_x(x0 + s.rx) + 1;
    for (int j = 0; j <= g.ny() && g.y(j) <= s.ry; ++j)
        for (int i = i0; i <= i1; ++i) {
            const double dx = g.x(i) - x0;
            const bool in = s.disc ? dx * dx + g.y(j) * g.y(j) <= s.rx * s.rx : std::abs(dx) <= s.rx;
            if (in) sup = std::max(sup, std::abs(node(i, j)));
        }
    constexpr int n = 256;
    for (int k = 0; k <= n; ++k) {
        if (s.disc) {
            const double th = std::numbers::pi * k / n;
            sup = std::max(sup, std::abs(point(x0 + s.rx * std::cos(th), s.rx * std::sin(th))));
        } else {
            const double v = static_cast<double>(k) / n;
            sup = std::max(sup, std::abs(point(x0 - s.rx + 2 * s.rx * v, s.ry)));
            sup = std::max(sup, std::abs(point(x0 - s.rx, s.ry * v)));
            sup = std::max(sup, std::abs(point(x0 + s.rx, s.ry * v)));
        }
    }
    return sup;
}

} // namespace detail

/// sup |u - psi| over shrinking cylinders at a free boundary point; psi is
/// extended constantly in y. For non-degenerate points the slope is 1 + s.
inline ExponentFit fit_growth_exponent(const Trajectory& tr, ThinPoint p, const std::vector<double>& radii,
                                       const FitOptions& o = {}) {
    require(!tr.empty(), "trajectory is empty");
    if (o.check_free_boundary && !on_free_boundary(tr, p))
        throw InvalidArgument("point is not on the free boundary");
    const Grid& g = *tr.grid;
    ExponentFit f;
    f.radii = radii;
    f.values.assign(radii.size(), 0.0);
    detail::screen_radii(f, tr, p, o);
    for (std::size_t k = 0; k < radii.size(); ++k) {
        if (!f.used[k]) continue;
        const auto c = detail::cylinder(p, radii[k], o);
        double sup = 0.0;
        for (std::size_t n = 0; n < tr.snapshots.size(); ++n) {
            const auto sec = detail::section(c, tr.snapshots[n].time);
            if (!sec) continue;
            const auto& sn = tr.snapshots[n];
            std::vector<double> psi(sn.obstacle.size());
            for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = detail::psi_or_zero(sn.obstacle[i]);
            const Field u = tr.field(n);
            const FieldSampler smp(u, g.gamma());
            sup = std::max(sup, detail::section_sup(
                                    g, p.x, *sec, [&](int i, int j) { return sn.u[g.index(i, j)] - psi[i]; },
                                    [&](double x, double y) { return smp(x, y).value - detail::row_at(g, psi, x); }));
        }
        f.values[k] = sup;
    }
    detail::fit_loglog(f);
    return f;
}

/// sup |w| of the thin-row flux over shrinking cylinders; slope 1 - s.
inline ExponentFit fit_flux_exponent(const Trajectory& tr, ThinPoint p, const std::vector<double>& radii,
                                     const FitOptions& o = {}) {
    require(!tr.empty(), "trajectory is empty");
    if (o.check_free_boundary && !on_free_boundary(tr, p))
        throw InvalidArgument("point is not on the free boundary");
    const Grid& g = *tr.grid;
    ExponentFit f;
    f.radii = radii;
    f.values.assign(radii.size(), 0.0);
    detail::screen_radii(f, tr, p, o);
    for (std::size_t k = 0; k < radii.size(); ++k) {
        if (!f.used[k]) continue;
        const auto c = detail::cylinder(p, radii[k], o);
        double sup = 0.0;
        for (const auto& sn : tr.snapshots) {
            const auto sec = detail::section(c, sn.time);
            if (!sec) continue;
            for (int i = 1; i < g.nx(); ++i)
                if (std::abs(g.x(i) - p.x) <= sec->rx) sup = std::max(sup, std::abs(sn.flux[i]));
            for (double x : {p.x - sec->rx, p.x + sec->rx}) sup = std::max(sup, std::abs(detail::row_at(g, sn.flux, x)));
        }
        f.values[k] = sup;
    }
    detail::fit_loglog(f);
    return f;
}

// ---------------------------------------------------------------------------
// Flux field extension and the monotonicity functional

/// Extends the thin-row flux w(x, 0) into the slab by solving
/// div(y^{-gamma} grad w) = 0 with Dirichlet data: the stored thin-row flux
/// on y = 0 and y^gamma u_y (zeta differences of u) on the outer boundary.
inline Field flux_extension(const Grid& grid, const GridPtr& gp, const Snapshot& snap) {
    const double gamma = grid.gamma();
    const int nx = grid.nx(), ny = grid.ny();
    std::vector<double> zeta(ny + 1);
    for (int j = 0; j <= ny; ++j) zeta[j] = flux_coordinate(grid.y(j), gamma);
    auto u = [&](int i, int j) { return snap.u[grid.index(i, j)]; };

    Field w(gp, snap.time);
    for (int i = 0; i <= nx; ++i) {
        w.at(i, 0) = snap.flux[i];
        w.at(i, ny) = (u(i, ny) - u(i, ny - 1)) / (zeta[ny] - zeta[ny - 1]);
    }
    for (int j = 1; j < ny; ++j)
        for (int i : {0, nx}) w.at(i, j) = (u(i, j + 1) - u(i, j - 1)) / (zeta[j + 1] - zeta[j - 1]);

    const auto st = build_stencil(gp, -gamma);
    const int mx = nx - 1, my = ny - 1;
    if (mx <= 0 || my <= 0) return w;
    auto id = [mx](int i, int j) { return (j - 1) * mx + (i - 1); };
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(mx) * my * 5);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mx) * my);
    for (int j = 1; j < ny; ++j)
        for (int i = 1; i < nx; ++i) {
            const std::size_t k = grid.index(i, j);
            const int r = id(i, j);
            const double cw = st.west[k], ce = st.east[k], cs = st.south[k], cn = st.north[k];
            trip.emplace_back(r, r, cw + ce + cs + cn);
            auto nb = [&](double c, int ii, int jj) {
                if (ii <= 0 || ii >= nx || jj <= 0 || jj >= ny) b[r] += c * w.at(ii, jj);
                else if (id(ii, jj) < r) {
                    trip.emplace_back(r, id(ii, jj), -c);
                    trip.emplace_back(id(ii, jj), r, -c);
                }
            };
            nb(cw, i - 1, j);
            nb(ce, i + 1, j);
            nb(cs, i, j - 1);
            nb(cn, i, j + 1);
        }
    Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(mx) * my, static_cast<Eigen::Index>(mx) * my);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
    if (ldlt.info() != Eigen::Success) throw ConvergenceError("flux extension factorisation failed", 0.0);
    const Eigen::VectorXd x = ldlt.solve(b);
    for (int j = 1; j < ny; ++j)
        for (int i = 1; i < nx; ++i) w.at(i, j) = x[id(i, j)];
    return w;
}

inline Field flux_extension(const Trajectory& tr, std::size_t k) { return flux_extension(*tr.grid, tr.grid, tr.snapshots.at(k)); }

/// Radial cutoff: 1 on B_{a r}, 0 outside B_{b r}, quintic smoothstep in
/// between. Being radial in (x, y) and even in y, its y-derivative vanishes
/// on the thin space.
struct CutoffSpec {
    double inner = 1.0;
    double outer = 2.0;
};

struct CutoffValue {
    double eta, d_x, d_y;
};

inline CutoffValue eval_cutoff(double dx, double y, double r, const CutoffSpec& c) {
    const double rho = std::hypot(dx, y);
    const double a = c.inner * r, b = c.outer * r;
    if (rho <= a) return {1.0, 0.0, 0.0};
    if (rho >= b) return {0.0, 0.0, 0.0};
    const double t = (rho - a) / (b - a);
    const double S = t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
    const double dS = 30.0 * t * t * (1.0 - t) * (1.0 - t) / (b - a);
    return {1.0 - S, -dS * dx / rho, -dS * y / rho};
}

struct PhiOptions {
    double alpha = 0.5;
    double delta = 0.0;
    CutoffSpec cutoff;
    int min_cells_per_sigma = 8;
};

struct PhiReport {
    std::vector<double> radii;
    std::vector<double> phi;
    std::vector<bool> under_resolved;
    bool bounded_regime = true;      // 2 alpha + delta > 1 + gamma
    double envelope_exponent = 0.0;  // 2 alpha + delta - 1 - gamma
    ExponentFit fit;                 // log phi against log r
    double max_min_ratio = 0.0;
};

/// One time slab of the functional: flux field w (frozen) on sigma = t0 - t
/// in [sig_lo, sig_hi].
struct PhiSlab {
    const Field* w;
    double sig_lo, sig_hi;
};

/// phi(r) = r^{-2(1-s)} int int y^{-gamma} |grad(eta w)|^2 G_{-gamma}(x - x0, y, -tau) dx dtau
/// over tau in (-r^2, 0], with the time integral of the kernel done exactly
/// on each slab. Space is integrated cell by cell: the x-part in the measure
/// coordinate of y^{-gamma}, the y-part in the flux coordinate of w.
inline double monotonicity_phi(const std::vector<PhiSlab>& slabs, double x0, double r, double s,
                               const CutoffSpec& cut = {}) {
    require(r > 0.0, "radius must be positive");
    if (slabs.empty()) return 0.0;
    const double gamma = 1.0 - 2.0 * s, g = -gamma;  // weight exponent of w
    const auto kernel = make_heat_kernel(2, g);
    const double a_exp = 0.5 * (2.0 + g);
    static const auto rule = special::gauss_legendre(3);
    double total = 0.0;
    for (const auto& slab : slabs) {
        const double lo = std::max(0.0, slab.sig_lo), hi = std::min(r * r, slab.sig_hi);
        if (hi <= lo) continue;
        const Field& w = *slab.w;
        const Grid& gr = *w.grid;
        FieldSampler smp(w, g);
        const double R = cut.outer * r;
        const int i0 = gr.locate_x(x0 - R), i1 = gr.locate_x(x0 + R), j1 = gr.locate_y(R);
        auto time_factor = [&](double dx, double y) {
            return kernel.c_n_gamma * special::heat_time_integral(a_exp, 0.25 * (dx * dx + y * y), lo, hi);
        };
        for (int j = 0; j <= j1; ++j) {
            const double ya = gr.y(j), yb = gr.y(j + 1);
            const double xia = measure_coordinate(ya, g), xib = measure_coordinate(yb, g);
            const double za = flux_coordinate(ya, g), zb = flux_coordinate(yb, g);
            for (int i = i0; i <= i1; ++i) {
                const double xa = gr.x(i), xb = gr.x(i + 1);
                const double nx = std::clamp(x0, xa, xb) - x0, ny = std::clamp(0.0, ya, yb);
                if (nx * nx + ny * ny >= R * R) continue;
                for (std::size_t p = 0; p < rule.nodes.size(); ++p) {
                    const double x = 0.5 * (xa + xb) + 0.5 * (xb - xa) * rule.nodes[p];
                    const double wx = 0.5 * (xb - xa) * rule.weights[p];
                    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
                        {  // y^{-gamma} |d_x (eta w)|^2 dy = |.|^2 d xi
                            const double xi = 0.5 * (xia + xib) + 0.5 * (xib - xia) * rule.nodes[q];
                            const double y = y_of_measure_coordinate(xi, g);
                            const auto e = eval_cutoff(x - x0, y, r, cut);
                            if (e.eta != 0.0 || e.d_x != 0.0) {
                                const auto v = smp(x, y);
                                const double gx = e.eta * v.d_x + v.value * e.d_x;
                                total += wx * 0.5 * (xib - xia) * rule.weights[q] * gx * gx * time_factor(x - x0, y);
                            }
                        }
                        {  // y^{-gamma} |d_y (eta w)|^2 dy = (eta d_zeta w + w y^{-gamma} eta_y)^2 d zeta
                            const double z = 0.5 * (za + zb) + 0.5 * (zb - za) * rule.nodes[q];
                            const double y = y_of_flux_coordinate(z, g);
                            const auto e = eval_cutoff(x - x0, y, r, cut);
                            if (e.eta != 0.0 || e.d_y != 0.0) {
                                const auto v = smp(x, y);
                                const double gy = e.eta * v.d_zeta + v.value * std::pow(y, g) * e.d_y;
                                total += wx * 0.5 * (zb - za) * rule.weights[q] * gy * gy * time_factor(x - x0, y);
                            }
                        }
                    }
                }
            }
        }
    }
    return total / std::pow(r, 2.0 * (1.0 - s));
}

/// Time slabs of a trajectory seen from t0: snapshot k stands for
/// (t_{k-1}, t_k]; a single-snapshot trajectory is treated as stationary.
inline std::vector<std::pair<std::size_t, std::array<double, 2>>> trajectory_slabs(const Trajectory& tr, double t0,
                                                                                   double window) {
    std::vector<std::pair<std::size_t, std::array<double, 2>>> out;
    const auto& S = tr.snapshots;
    if (S.size() == 1) {
        out.push_back({0, {0.0, window}});
        return out;
    }
    for (std::size_t k = 1; k < S.size(); ++k) {
        const double a = t0 - S[k].time, b = t0 - S[k - 1].time;  // sigma range
        const double lo = std::max(a, 0.0), hi = std::min(b, window);
        if (hi > lo) out.push_back({k, {lo, hi}});
    }
    return out;
}

/// phi over a radius ladder. Flux extensions are computed once per needed
/// snapshot. A single-snapshot trajectory is treated as stationary.
inline PhiReport monotonicity_phi(const Trajectory& tr, ThinPoint p, const std::vector<double>& radii,
                                  const PhiOptions& o = {}) {
    require(!tr.empty(), "trajectory is empty");
    const double gamma = tr.gamma();
    PhiReport rep;
    rep.radii = radii;
    rep.envelope_exponent = 2.0 * o.alpha + o.delta - 1.0 - gamma;
    rep.bounded_regime = rep.envelope_exponent > 0.0;
    const double r_max = *std::max_element(radii.begin(), radii.end());
    const auto all = trajectory_slabs(tr, p.t, r_max * r_max);
    std::vector<std::optional<Field>> ext(tr.snapshots.size());
    for (const auto& [k, range] : all) ext[k] = flux_extension(tr, k);
    const double h = tr.grid->min_dx();
    for (double r : radii) {
        std::vector<PhiSlab> slabs;
        for (const auto& [k, range] : all) slabs.push_back({&*ext[k], range[0], range[1]});
        rep.phi.push_back(monotonicity_phi(slabs, p.x, r, tr.s, o.cutoff));
        rep.under_resolved.push_back(std::sqrt(2.0) * r < o.min_cells_per_sigma * h);
    }
    rep.fit = fit_power_law(radii, rep.phi);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (double v : rep.phi) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    rep.max_min_ratio = lo > 0.0 ? hi / lo : (hi > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    return rep;
}

// ---------------------------------------------------------------------------
// Parabolic density of the contact set

struct DensityReport {
    std::vector<double> radii;
    std::vector<double> ratios;
    double c0 = 0.0;
    bool positive = false;
};

/// |Q'_r(x0, t0) ∩ {u = psi}| / |Q'_r| in plain Lebesgue measure on the thin
/// cylinder (x0 - r, x0 + r) x (t0 - r^2, t0]. Thin node i stands for its dual
/// interval, snapshot k for (t_{k-1}, t_k]; a single snapshot is stationary.
inline DensityReport parabolic_density(const Trajectory& tr, ThinPoint p, const std::vector<double>& radii, double c0) {
    require(!tr.empty(), "trajectory is empty");
    const Grid& g = *tr.grid;
    DensityReport rep;
    rep.radii = radii;
    rep.c0 = c0;
    rep.positive = true;
    for (double r : radii) {
        require(r > 0.0, "radius must be positive");
        if (p.x - r < g.x(0) || p.x + r > g.x(g.nx())) throw InvalidArgument("density radius leaves the spatial domain");
        if (tr.snapshots.size() > 1 && p.t - r * r < tr.t_begin() - 1e-12)
            throw InvalidArgument("density radius exceeds the data window");
        double hit = 0.0, total = 0.0;
        for (const auto& [k, range] : trajectory_slabs(tr, p.t, r * r)) {
            const double dt = range[1] - range[0];
            const auto& snap = tr.snapshots[k];
            for (int i = 0; i <= g.nx(); ++i) {
                const double a = std::max(i == 0 ? g.x(0) : 0.5 * (g.x(i - 1) + g.x(i)), p.x - r);
                const double b = std::min(i == g.nx() ? g.x(i) : 0.5 * (g.x(i) + g.x(i + 1)), p.x + r);
                if (b <= a) continue;
                total += dt * (b - a);
                if (snap.contact[i]) hit += dt * (b - a);
            }
        }
        const double ratio = total > 0.0 ? hit / total : 0.0;
        rep.ratios.push_back(ratio);
        if (ratio < c0) rep.positive = false;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Frozen-time ratios

struct FrequencyReport {
    std::vector<double> radii;
    std::vector<double> values;
    double limit = 0.0;         // value at the smallest radius
    bool interior_zero = false; // vanishing boundary mass
};

/// N(r) = r int_{B_r} y^gamma |grad u|^2 / int_{dB_r} y^gamma u^2 on the upper half-disc.
inline FrequencyReport almgren_frequency(const Field& u, double x0, const std::vector<double>& radii) {
    const double gamma = u.grid->gamma();
    FieldSampler smp(u, gamma);
    FrequencyReport rep;
    rep.radii = radii;
    for (double r : radii) {
        const double num = r * half_disc_energy(smp, x0, r);
        const double den = half_circle_integral(
            [&](double x, double y) {
                const double v = smp(x, y).value;
                return v * v;
            },
            x0, r, gamma);
        if (den <= 1e-300) {
            rep.interior_zero = true;
            rep.values.push_back(0.0);
            continue;
        }
        rep.values.push_back(num / den);
    }
    if (!rep.values.empty()) {
        std::size_t k = static_cast<std::size_t>(std::min_element(radii.begin(), radii.end()) - radii.begin());
        rep.limit = rep.values[k];
    }
    return rep;
}

struct PoincareReport {
    double boundary_oscillation = 0.0;  // int_{dB_r} |v - vbar|^2 y^gamma
    double dirichlet = 0.0;             // int_{B_r} |grad v|^2 y^gamma
    double ratio = 0.0;                 // oscillation / (r * dirichlet)
    bool degenerate = false;            // 0/0, reported as ratio 0
    bool inconsistent = false;          // oscillation without energy
};

/// vbar is the y^gamma-weighted mean of v over the half-circle.
inline PoincareReport poincare_ratio(const Field& v, double x0, double r) {
    const double gamma = v.grid->gamma();
    FieldSampler smp(v, gamma);
    const double mass = half_circle_integral([](double, double) { return 1.0; }, x0, r, gamma);
    const double mean = half_circle_integral([&](double x, double y) { return smp(x, y).value; }, x0, r, gamma) / mass;
    PoincareReport rep;
    rep.boundary_oscillation = half_circle_integral(
        [&](double x, double y) {
            const double d = smp(x, y).value - mean;
            return d * d;
        },
        x0, r, gamma);
    rep.dirichlet = half_disc_energy(smp, x0, r);
    const double scale = mass * (std::abs(mean) + 1.0) * (std::abs(mean) + 1.0);
    const bool no_osc = rep.boundary_oscillation <= 1e-24 * scale;
    const bool no_energy = rep.dirichlet <= 1e-24 * scale / r;
    if (no_energy) {
        rep.degenerate = no_osc;
        rep.inconsistent = !no_osc;
        rep.ratio = no_osc ? 0.0 : std::numeric_limits<double>::infinity();
        return rep;
    }
    rep.ratio = rep.boundary_oscillation / (r * rep.dirichlet);
    return rep;
}

struct HarnackReport {
    double sup_past = 0.0;
    double inf_recent = 0.0;
    double ratio = 0.0;
};

/// sup over Q~-_{R/2} divided by inf over Q~+_{R/4}, with
/// Q~-_R = B'_R x (-R, R) x (-3/4 R^2, -1/2 R^2) and
/// Q~+_R = B'_R x (-R, R) x (-1/4 R^2, 0], relative to (x0, 0, t0).
inline HarnackReport harnack_ratio(const Trajectory& tr, ThinPoint p, double R) {
    require(R > 0.0, "Harnack radius must be positive");
    const Grid& g = *tr.grid;
    HarnackReport rep;
    rep.inf_recent = std::numeric_limits<double>::infinity();
    bool past = false, recent = false;
    for (const auto& snap : tr.snapshots) {
        const double tau = snap.time - p.t;
        const double Rm = 0.5 * R, Rp = 0.25 * R;
        const bool in_past = tau > -0.75 * Rm * Rm && tau < -0.5 * Rm * Rm;
        const bool in_recent = tau > -0.25 * Rp * Rp && tau <= 1e-12;
        if (!in_past && !in_recent) continue;
        for (int j = 0; j <= g.ny(); ++j)
            for (int i = 0; i <= g.nx(); ++i) {
                const double dx = std::abs(g.x(i) - p.x), y = g.y(j);
                const double v = snap.u[g.index(i, j)];
                if (in_past && dx < Rm && y < Rm) {
                    if (v <= 0.0) throw InvalidArgument("nonpositive value in the Harnack box");
                    rep.sup_past = std::max(rep.sup_past, v);
                    past = true;
                }
                if (in_recent && dx < Rp && y < Rp) {
                    if (v <= 0.0) throw InvalidArgument("nonpositive value in the Harnack box");
                    rep.inf_recent = std::min(rep.inf_recent, v);
                    recent = true;
                }
            }
    }
    if (!past || !recent) throw InvalidArgument("Harnack boxes contain no samples; refine the time schedule");
    rep.ratio = rep.sup_past / rep.inf_recent;
    return rep;
}

// ---------------------------------------------------------------------------
// Free boundary, blow-ups and u_t

struct InterfacePoint {
    double t = 0.0;
    double x = 0.0;
    int curve = 0;        // contact on the left (0) or on the right (1), by ordinal
    double slope = 0.0;   // dx/dt
    double normal_x = 1.0, normal_t = 0.0;
    std::size_t snapshot = 0;
};

struct FreeBoundaryOptions {
    int half_width = 1;  // central differences over +-half_width snapshots
};

/// Interface positions per snapshot. Near the free boundary u - psi grows
/// like distance^{1+s}, so the zero is placed by linear extrapolation of
/// (u - psi)^{1/(1+s)} from the first two free nodes, kept within the cell.
inline std::vector<InterfacePoint> extract_free_boundary(const Trajectory& tr, const FreeBoundaryOptions& o = {}) {
    require(!tr.empty(), "trajectory is empty");
    require(o.half_width >= 1, "half_width must be >= 1");
    const Grid& g = *tr.grid;
    const double pw = 1.0 / (1.0 + tr.s);
    std::vector<InterfacePoint> pts;
    std::vector<std::vector<std::size_t>> curves;  // indices into pts per curve id
    for (std::size_t k = 0; k < tr.snapshots.size(); ++k) {
        const auto& sn = tr.snapshots[k];
        auto gap = [&](int i) { return std::pow(std::max(0.0, sn.u[g.index(i, 0)] - sn.obstacle[i]), pw); };
        int ordinal[2] = {0, 0};
        for (int i = 1; i + 1 < g.nx(); ++i) {
            if (sn.contact[i] == sn.contact[i + 1]) continue;
            const bool left_contact = sn.contact[i] && !sn.contact[i + 1];
            const int c = left_contact ? i : i + 1, f = left_contact ? i + 1 : i;
            const int f2 = left_contact ? f + 1 : f - 1;
            double x = g.x(c);
            if (f2 >= 1 && f2 < g.nx() && !sn.contact[f2]) {
                const double g1 = gap(f), g2 = gap(f2);
                if (g2 > g1) {
                    const double xe = g.x(f) - g1 * (g.x(f2) - g.x(f)) / (g2 - g1);
                    x = std::clamp(xe, std::min(g.x(c), g.x(f)), std::max(g.x(c), g.x(f)));
                }
            }
            const int kind = left_contact ? 0 : 1;
            const int id = 2 * ordinal[kind]++ + kind;
            InterfacePoint ip;
            ip.t = sn.time;
            ip.x = x;
            ip.curve = id;
            ip.snapshot = k;
            if (static_cast<int>(curves.size()) <= id) curves.resize(id + 1);
            curves[id].push_back(pts.size());
            pts.push_back(ip);
        }
    }
    for (const auto& cv : curves) {
        const int n = static_cast<int>(cv.size());
        for (int m = 0; m < n; ++m) {
            const int a = std::max(0, m - o.half_width), b = std::min(n - 1, m + o.half_width);
            auto& P = pts[cv[m]];
            if (b > a) P.slope = (pts[cv[b]].x - pts[cv[a]].x) / (pts[cv[b]].t - pts[cv[a]].t);
            const double nrm = std::hypot(1.0, P.slope);
            P.normal_x = 1.0 / nrm;
            P.normal_t = -P.slope / nrm;
        }
    }
    return pts;
}

/// Interface point of curve 0 nearest to time t.
inline std::optional<InterfacePoint> free_boundary_point(const std::vector<InterfacePoint>& pts, double t, int curve = 0) {
    std::optional<InterfacePoint> best;
    for (const auto& p : pts)
        if (p.curve == curve && (!best || std::abs(p.t - t) < std::abs(best->t - t))) best = p;
    return best;
}

struct BlowupResult {
    double omega_hat = 0.0;
    double linf_error = 0.0;
    std::size_t samples = 0;
};

struct BlowupOptions {
    double omega_lo = -2.0;
    double omega_hi = 2.0;
    int scan = 41;
};

/// Compares u(x0 + r x, r y, t0 + r tau) / r^{1+s} with the travelling
/// profile on nodes of the window |x| <= 1, y <= 1, tau in [-1, 0] (the
/// window is sampled at grid nodes and stored times, so no interpolation
/// error enters), and picks omega minimising the max-norm distance.
inline BlowupResult blowup_compare(const Trajectory& tr, ThinPoint p, double r, double s, const BlowupOptions& o = {}) {
    require(r > 0.0, "blow-up radius must be positive");
    const Grid& g = *tr.grid;
    if (p.x - r < g.x(0) || p.x + r > g.x(g.nx()) || r > g.y(g.ny()))
        throw InvalidArgument("rescaled window leaves the spatial domain");
    if (tr.snapshots.size() > 1 && p.t - r < tr.t_begin() - 1e-12)
        throw InvalidArgument("rescaled window leaves the time interval");
    struct Sample {
        double X, Y, tau, v;
    };
    std::vector<Sample> smp;
    const double scale = std::pow(r, 1.0 + s);
    for (const auto& sn : tr.snapshots) {
        const double tau = (sn.time - p.t) / r;
        if (tau < -1.0 - 1e-12 || tau > 1e-12) continue;
        for (int j = 0; j <= g.ny() && g.y(j) <= r; ++j)
            for (int i = 0; i <= g.nx(); ++i) {
                const double X = (g.x(i) - p.x) / r;
                if (std::abs(X) > 1.0) continue;
                smp.push_back({X, g.y(j) / r, tau, (sn.u[g.index(i, j)] - detail::psi_or_zero(sn.obstacle[i])) / scale});
            }
    }
    if (smp.empty()) throw InvalidArgument("rescaled window contains no samples");
    auto err = [&](double om) {
        SignoriniProfile prof;
        prof.s = s;
        prof.omega = om;
        double e = 0.0;
        for (const auto& q : smp) e = std::max(e, std::abs(q.v - eval_profile(prof, q.X, q.Y, q.tau)));
        return e;
    };
    // coarse scan, then golden-section refinement around the best bracket
    int best = 0;
    double best_e = std::numeric_limits<double>::infinity();
    const double step = (o.omega_hi - o.omega_lo) / (o.scan - 1);
    for (int k = 0; k < o.scan; ++k) {
        const double e = err(o.omega_lo + k * step);
        if (e < best_e) {
            best_e = e;
            best = k;
        }
    }
    double a = o.omega_lo + std::max(0, best - 1) * step, b = o.omega_lo + std::min(o.scan - 1, best + 1) * step;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = err(c), fd = err(d);
    for (int it = 0; it < 80 && b - a > 1e-10; ++it) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = err(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = err(d);
        }
    }
    BlowupResult res;
    res.omega_hat = 0.5 * (a + b);
    res.linf_error = err(res.omega_hat);
    if (best_e < res.linf_error) {  // flat or multimodal objective
        res.omega_hat = o.omega_lo + best * step;
        res.linf_error = best_e;
    }
    res.samples = smp.size();
    return res;
}

/// sup |discrete u_t| over parabolic half-cylinders Q_rho at a free boundary
/// point of positive density. Refuses points that fail the density check.
inline ExponentFit time_derivative_decay(const Trajectory& tr, ThinPoint p, const std::vector<double>& radii,
                                         double c0 = 0.05, const FitOptions& o = {}) {
    require(tr.snapshots.size() >= 2, "time derivative needs at least two snapshots");
    const auto dens = parabolic_density(tr, p, radii, c0);
    if (!dens.positive) {
        double lo = 1.0;
        for (double v : dens.ratios) lo = std::min(lo, v);
        throw InvalidArgument("point fails the positive-density precondition (min ratio " + std::to_string(lo) +
                              " < " + std::to_string(c0) + ")");
    }
    const Grid& g = *tr.grid;
    FitOptions q = o;
    q.flavor = CylinderFlavor::Q;
    ExponentFit f;
    f.radii = radii;
    f.values.assign(radii.size(), 0.0);
    detail::screen_radii(f, tr, p, q);
    for (std::size_t k = 0; k < radii.size(); ++k) {
        if (!f.used[k]) continue;
        const auto c = detail::cylinder(p, radii[k], q);
        double sup = 0.0;
        for (std::size_t n = 1; n < tr.snapshots.size(); ++n) {
            const auto sec = detail::section(c, tr.snapshots[n].time);
            if (!sec) continue;
            const auto& a = tr.snapshots[n - 1];
            const auto& b = tr.snapshots[n];
            const double dt = b.time - a.time;
            std::vector<double> d(b.u.size());
            for (std::size_t m = 0; m < d.size(); ++m) d[m] = (b.u[m] - a.u[m]) / dt;
            const Field ut(tr.grid, std::move(d), b.time);
            const FieldSampler smp(ut, g.gamma());
            sup = std::max(sup, detail::section_sup(
                                    g, p.x, *sec, [&](int i, int j) { return ut.at(i, j); },
                                    [&](double x, double y) { return smp(x, y).value; }));
        }
        f.values[k] = sup;
    }
    detail::fit_loglog(f);
    return f;
}

} // namespace fracsig::lab
