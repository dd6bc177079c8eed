#pragma once

// The bounded profile h_gamma(z), z = y/t, that turns G_gamma into the
// fundamental solution with pole off the thin space:
//     h'' + (gamma/z + 1) h' + (gamma/(2z)) h = 0,   h(0) = 1.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "fracsig/error.hpp"
#include "fracsig/weighted_ops.hpp"

namespace fracsig {

struct HGammaTable {
    double gamma = 0.0;
    std::vector<double> z;
    std::vector<double> h;
    std::vector<double> dh;

    double z_max() const { return z.back(); }

    /// Cubic Hermite interpolation; constant extension beyond z_max.
    double operator()(double zq) const {
        if (zq <= 0.0) return h.front();
        if (zq >= z.back()) return h.back();
        auto it = std::upper_bound(z.begin(), z.end(), zq);
        const std::size_t k = static_cast<std::size_t>(it - z.begin()) - 1;
        const double d = z[k + 1] - z[k];
        const double s = (zq - z[k]) / d;
        const double s2 = s * s, s3 = s2 * s;
        return (2 * s3 - 3 * s2 + 1) * h[k] + (s3 - 2 * s2 + s) * d * dh[k] + (-2 * s3 + 3 * s2) * h[k + 1] +
               (s3 - s2) * d * dh[k + 1];
    }
};

namespace detail {

/// Power series of the solution analytic at z = 0, normalised by h(0) = 1.
/// Coefficients obey a_{k+1} = -a_k (k + gamma/2) / ((k + 1)(k + gamma)).
inline std::array<double, 2> h_gamma_series(double gamma, double z) {
    if (gamma == 0.0) return {1.0, 0.0};
    double a = 1.0, h = 1.0, dh = 0.0, zk = 1.0;
    for (int k = 0; k < 400; ++k) {
        const double next = -a * (k + 0.5 * gamma) / ((k + 1.0) * (k + gamma));
        dh += (k + 1.0) * next * zk;
        zk *= z;
        h += next * zk;
        a = next;
        if (std::abs(next * zk) < 1e-18 && k > 4) break;
    }
    return {h, dh};
}

} // namespace detail

/// Tabulates h_gamma on [0, z_max]. A Frobenius series starts the solution
/// off the singular point z = 0, then an embedded Runge-Kutta-Fehlberg 4(5)
/// pair integrates it with steps capped at `max_step` so the Hermite table
/// keeps its accuracy between nodes. The limiting case gamma = 1 is accepted.
inline HGammaTable solve_h_gamma(double gamma, double z_max, double tol = 1e-13, double max_step = 0.01) {
    require(gamma > -1.0 && gamma <= 1.0, "gamma must lie in (-1, 1]");
    require(z_max > 0.0, "z_max must be positive");
    HGammaTable tab;
    tab.gamma = gamma;
    tab.z.push_back(0.0);
    tab.h.push_back(1.0);
    tab.dh.push_back(gamma == 0.0 ? 0.0 : -0.5);

    const double z0 = std::min(0.02, 0.5 * z_max);
    auto start = detail::h_gamma_series(gamma, z0);
    tab.z.push_back(z0);
    tab.h.push_back(start[0]);
    tab.dh.push_back(start[1]);

    auto rhs = [gamma](double z, const std::array<double, 2>& y) -> std::array<double, 2> {
        return {y[1], -(gamma / z + 1.0) * y[1] - 0.5 * gamma / z * y[0]};
    };

    // Fehlberg tableau
    static constexpr double c2 = 1.0 / 4, c3 = 3.0 / 8, c4 = 12.0 / 13, c6 = 1.0 / 2;
    static constexpr double a21 = 1.0 / 4;
    static constexpr double a31 = 3.0 / 32, a32 = 9.0 / 32;
    static constexpr double a41 = 1932.0 / 2197, a42 = -7200.0 / 2197, a43 = 7296.0 / 2197;
    static constexpr double a51 = 439.0 / 216, a52 = -8.0, a53 = 3680.0 / 513, a54 = -845.0 / 4104;
    static constexpr double a61 = -8.0 / 27, a62 = 2.0, a63 = -3544.0 / 2565, a64 = 1859.0 / 4104,
                            a65 = -11.0 / 40;
    static constexpr double b1 = 25.0 / 216, b3 = 1408.0 / 2565, b4 = 2197.0 / 4104, b5 = -1.0 / 5;
    static constexpr double e1 = 1.0 / 360, e3 = -128.0 / 4275, e4 = -2197.0 / 75240, e5 = 1.0 / 50,
                            e6 = 2.0 / 55;

    double z = z0;
    std::array<double, 2> y = start;
    double step = std::min(max_step, 0.1 * z0);
    while (z < z_max) {
        step = std::min({step, max_step, z_max - z});
        if (step < 1e-14) throw ConvergenceError("h_gamma integration step underflow", step);
        auto add = [](const std::array<double, 2>& a, double s, std::initializer_list<std::array<double, 2>> ks,
                      std::initializer_list<double> cs) {
            std::array<double, 2> r = a;
            auto c = cs.begin();
            for (const auto& k : ks) {
                r[0] += s * (*c) * k[0];
                r[1] += s * (*c) * k[1];
                ++c;
            }
            return r;
        };
        const auto k1 = rhs(z, y);
        const auto k2 = rhs(z + c2 * step, add(y, step, {k1}, {a21}));
        const auto k3 = rhs(z + c3 * step, add(y, step, {k1, k2}, {a31, a32}));
        const auto k4 = rhs(z + c4 * step, add(y, step, {k1, k2, k3}, {a41, a42, a43}));
        const auto k5 = rhs(z + step, add(y, step, {k1, k2, k3, k4}, {a51, a52, a53, a54}));
        const auto k6 = rhs(z + c6 * step, add(y, step, {k1, k2, k3, k4, k5}, {a61, a62, a63, a64, a65}));
        const auto y4 = add(y, step, {k1, k3, k4, k5}, {b1, b3, b4, b5});
        double err = 0.0;
        for (int c = 0; c < 2; ++c)
            err = std::max(err, std::abs(step * (e1 * k1[c] + e3 * k3[c] + e4 * k4[c] + e5 * k5[c] + e6 * k6[c])));
        if (err <= tol || step <= 1e-12) {
            z += step;
            y = y4;
            if (!std::isfinite(y[0]) || std::abs(y[0]) > 1e3)
                throw ConvergenceError("h_gamma left the bounded branch", y[0]);
            tab.z.push_back(z);
            tab.h.push_back(y[0]);
            tab.dh.push_back(y[1]);
        }
        const double factor = err > 0.0 ? 0.9 * std::pow(tol / err, 0.2) : 4.0;
        step *= std::clamp(factor, 0.2, 4.0);
    }
    return tab;
}

/// F_gamma = G_gamma(x, y - 1, t) * h_gamma(y / t): fundamental solution with
/// pole at (0, 1, 0).
inline double eval_F_gamma(double x1, double y, double t, const HeatKernelParams& params, const HGammaTable& h) {
    if (t <= 0.0) return 0.0;
    return eval_G_gamma(x1, y - 1.0, t, params) * h(y / t);
}

} // namespace fracsig
