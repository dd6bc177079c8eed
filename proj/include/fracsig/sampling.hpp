#pragma once

// Point evaluation of nodal fields and quadrature over half-discs centred
// on the thin space.

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fracsig/mesh.hpp"
#include "fracsig/special.hpp"

namespace fracsig {

/// zeta_g(y) = y^{1-g}/(1-g): div(y^g grad .)-harmonic functions are affine in
/// it to leading order near y = 0.
inline double y_of_flux_coordinate(double z, double g) { return std::pow((1.0 - g) * z, 1.0 / (1.0 - g)); }

/// xi_g(y) = y^{1+g}/(1+g), so that y^g dy = d xi.
inline double measure_coordinate(double y, double g) { return std::pow(y, 1.0 + g) / (1.0 + g); }
inline double y_of_measure_coordinate(double xi, double g) { return std::pow((1.0 + g) * xi, 1.0 / (1.0 + g)); }

struct FieldSample {
    double value = 0.0;
    double d_x = 0.0;
    double d_zeta = 0.0;  // derivative in zeta_g; equals y^g d_y
};

/// Bilinear interpolation in (x, zeta_g) for a field whose natural weight
/// exponent is g (g = gamma for u, -gamma for the flux field w).
class FieldSampler {
public:
    FieldSampler(const Field& f, double g) : f_(&f), g_(g) {
        const auto& ys = f.grid->y_nodes();
        zeta_.resize(ys.size());
        for (std::size_t j = 0; j < ys.size(); ++j) zeta_[j] = flux_coordinate(ys[j], g);
    }

    double weight_exponent() const { return g_; }
    const Grid& grid() const { return *f_->grid; }

    FieldSample operator()(double x, double y) const {
        const Grid& gr = *f_->grid;
        const int i = gr.locate_x(x), j = gr.locate_y(y);
        const double hx = gr.x(i + 1) - gr.x(i);
        const double a = std::clamp((x - gr.x(i)) / hx, 0.0, 1.0);
        const double dz = zeta_[j + 1] - zeta_[j];
        const double b = std::clamp((flux_coordinate(std::max(y, 0.0), g_) - zeta_[j]) / dz, 0.0, 1.0);
        const double u00 = f_->at(i, j), u10 = f_->at(i + 1, j), u01 = f_->at(i, j + 1), u11 = f_->at(i + 1, j + 1);
        FieldSample s;
        s.value = (1 - a) * (1 - b) * u00 + a * (1 - b) * u10 + (1 - a) * b * u01 + a * b * u11;
        s.d_x = ((1 - b) * (u10 - u00) + b * (u11 - u01)) / hx;
        s.d_zeta = ((1 - a) * (u01 - u00) + a * (u11 - u10)) / dz;
        return s;
    }

private:
    const Field* f_;
    double g_;
    std::vector<double> zeta_;
};

/// Integral over the upper half-circle of radius r about (x0, 0) of
/// f(x, y) y^g ds. The substitution theta = (pi/2) v^{1/(1+g)} near each end
/// absorbs the sin^g singularity.
template <class F>
double half_circle_integral(F&& f, double x0, double r, double g, int points = 48) {
    static thread_local special::GaussRule rule;
    if (static_cast<int>(rule.nodes.size()) != points) rule = special::gauss_legendre(points);
    const double m = 1.0 / (1.0 + g);
    double total = 0.0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        const double v = 0.5 * (rule.nodes[q] + 1.0);
        const double wq = 0.5 * rule.weights[q];
        const double th = 0.5 * std::numbers::pi * std::pow(v, m);
        const double jac = 0.5 * std::numbers::pi * m * std::pow(v, m - 1.0);
        for (double theta : {th, std::numbers::pi - th}) {
            const double x = x0 + r * std::cos(theta), y = r * std::sin(theta);
            total += wq * jac * f(x, y) * std::pow(y, g) * r;
        }
    }
    return total;
}

/// Weighted Dirichlet energy of the interpolant over the half-disc B_r(x0, 0):
/// the x-part is integrated in (x, xi_g), the y-part in (x, zeta_g), where the
/// integrands are smooth. Cells cut by the circle are subdivided.
inline double half_disc_energy(const FieldSampler& s, double x0, double r, int sub = 8) {
    const Grid& gr = s.grid();
    const double g = s.weight_exponent();
    static const auto rule = special::gauss_legendre(3);
    const int i0 = gr.locate_x(x0 - r), i1 = gr.locate_x(x0 + r);
    const int j1 = gr.locate_y(r);
    double total = 0.0;
    for (int j = 0; j <= j1; ++j) {
        const double ya = gr.y(j), yb = gr.y(j + 1);
        for (int i = i0; i <= i1; ++i) {
            const double xa = gr.x(i), xb = gr.x(i + 1);
            const double nx = std::clamp(x0, xa, xb) - x0, ny = std::clamp(0.0, ya, yb);
            if (nx * nx + ny * ny >= r * r) continue;
            const double fx = std::max(std::abs(xa - x0), std::abs(xb - x0));
            const bool inside = fx * fx + yb * yb <= r * r;
            const int k = inside ? 1 : sub;
            const double xia = measure_coordinate(ya, g), xib = measure_coordinate(yb, g);
            const double za = flux_coordinate(ya, g), zb = flux_coordinate(yb, g);
            for (int p = 0; p < k; ++p)
                for (int q = 0; q < k; ++q) {
                    const double sxa = xa + (xb - xa) * p / k, sxb = xa + (xb - xa) * (p + 1) / k;
                    for (std::size_t a = 0; a < rule.nodes.size(); ++a) {
                        const double x = 0.5 * (sxa + sxb) + 0.5 * (sxb - sxa) * rule.nodes[a];
                        const double wx = 0.5 * (sxb - sxa) * rule.weights[a];
                        for (std::size_t b = 0; b < rule.nodes.size(); ++b) {
                            // x-part in xi
                            {
                                const double lo = xia + (xib - xia) * q / k, hi = xia + (xib - xia) * (q + 1) / k;
                                const double xi = 0.5 * (lo + hi) + 0.5 * (hi - lo) * rule.nodes[b];
                                const double y = y_of_measure_coordinate(xi, g);
                                if ((x - x0) * (x - x0) + y * y < r * r) {
                                    const auto v = s(x, y);
                                    total += wx * 0.5 * (hi - lo) * rule.weights[b] * v.d_x * v.d_x;
                                }
                            }
                            // y-part in zeta: y^g u_y^2 dy = (d_zeta u)^2 d zeta
                            {
                                const double lo = za + (zb - za) * q / k, hi = za + (zb - za) * (q + 1) / k;
                                const double z = 0.5 * (lo + hi) + 0.5 * (hi - lo) * rule.nodes[b];
                                const double y = y_of_flux_coordinate(z, g);
                                if ((x - x0) * (x - x0) + y * y < r * r) {
                                    const auto v = s(x, y);
                                    total += wx * 0.5 * (hi - lo) * rule.weights[b] * v.d_zeta * v.d_zeta;
                                }
                            }
                        }
                    }
                }
        }
    }
    return total;
}

} // namespace fracsig
