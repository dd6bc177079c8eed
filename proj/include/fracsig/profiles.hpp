#pragma once

// Closed-form reference solutions.

#include <algorithm>
#include <cmath>

#include "fracsig/error.hpp"

namespace fracsig {

/// Degree-(1+s) Signorini profile travelling with speed omega:
///   u0 = rho^{1+s} (2 cos^{2(s+1)}(theta/2) - (1+s) cos^{2s}(theta/2)) / (1 - s^2)
/// with rho, theta the polar coordinates of (x1 - x0 + omega (t - t0), |y|).
/// It vanishes on the thin ray theta = pi, which is the contact set.
struct SignoriniProfile {
    double s = 0.5;
    double omega = 0.0;
    double x0 = 0.0;
    double t0 = 0.0;

    double gamma() const { return 1.0 - 2.0 * s; }
    double shifted_x(double x1, double t) const { return x1 - x0 + omega * (t - t0); }
    /// Free boundary position at time t.
    double free_boundary(double t) const { return x0 - omega * (t - t0); }
};

namespace detail {

struct HalfAngles {
    double rho, c, sn;  // rho, cos(theta/2), sin(theta/2)
};

inline HalfAngles half_angles(double X, double Y) {
    const double rho = std::hypot(X, Y);
    if (rho == 0.0) return {0.0, 1.0, 0.0};
    // rho + X and rho - X cancel near the thin ray; use Y^2 = (rho + X)(rho - X)
    const double plus = X >= 0.0 ? rho + X : Y * Y / (rho - X);
    const double minus = X <= 0.0 ? rho - X : Y * Y / (rho + X);
    return {rho, std::sqrt(plus / (2.0 * rho)), std::sqrt(minus / (2.0 * rho))};
}

} // namespace detail

inline double eval_profile(const SignoriniProfile& p, double x1, double y, double t) {
    const double s = p.s, k = 1.0 + s;
    const auto a = detail::half_angles(p.shifted_x(x1, t), std::abs(y));
    if (a.rho == 0.0) return 0.0;
    return std::pow(a.rho, k) * (2.0 * std::pow(a.c, 2.0 * k) - k * std::pow(a.c, 2.0 * s)) / (1.0 - s * s);
}

/// Spatial gradient (d/dx1, d/dy) for y > 0, differentiated by hand in polar form.
struct Gradient2 {
    double dx, dy;
};

inline Gradient2 profile_gradient(const SignoriniProfile& p, double x1, double y, double t) {
    const double s = p.s, k = 1.0 + s;
    const double X = p.shifted_x(x1, t), Y = std::abs(y);
    const auto a = detail::half_angles(X, Y);
    if (a.rho == 0.0) return {0.0, 0.0};
    const double cth = X / a.rho, sth = Y / a.rho;
    const double Th = (2.0 * std::pow(a.c, 2.0 * k) - k * std::pow(a.c, 2.0 * s)) / (1.0 - s * s);
    // sin(theta) * Theta'(theta), regular on the contact ray
    const double sTh = 2.0 * a.sn * a.sn / (1.0 - s * s) * (-2.0 * k * std::pow(a.c, 2.0 * k) + k * s * std::pow(a.c, 2.0 * s));
    // Theta'(theta) itself (singular on the contact ray when s < 1/2)
    const double dTh = a.sn / (1.0 - s * s) * (-2.0 * k * std::pow(a.c, 2.0 * k - 1.0) + k * s * std::pow(a.c, 2.0 * s - 1.0));
    const double rs = std::pow(a.rho, s);
    const double gy = rs * (k * Th * sth + dTh * cth);
    return {rs * (k * Th * cth - sTh), y < 0.0 ? -gy : gy};
}

/// Time derivative omega * du0/dx1.
inline double profile_time_derivative(const SignoriniProfile& p, double x1, double y, double t) {
    return p.omega * profile_gradient(p, x1, y, t).dx;
}

/// Thin-boundary flux lim_{y->0+} y^gamma du0/dy: zero on the positivity set,
/// -(2s/(1-s)) 2^{-2s} |X|^{1-s} on the contact ray.
inline double profile_boundary_flux(const SignoriniProfile& p, double x1, double t) {
    const double X = p.shifted_x(x1, t), s = p.s;
    if (X >= 0.0) return 0.0;
    return -(2.0 * s / (1.0 - s)) * std::pow(2.0, -2.0 * s) * std::pow(-X, 1.0 - s);
}

/// Flux field y^gamma du0/dy for y > 0 (continuous up to y = 0).
inline double profile_flux_field(const SignoriniProfile& p, double x1, double y, double t) {
    if (y <= 0.0) return profile_boundary_flux(p, x1, t);
    return std::pow(y, p.gamma()) * profile_gradient(p, x1, y, t).dy;
}

/// y^{2s}: L_gamma-harmonic with flux identically 2s.
inline double eval_flux_calibrator(double y, double s) {
    require(y >= 0.0, "flux calibrator needs y >= 0");
    return std::pow(y, 2.0 * s);
}

/// Coefficient (2n - 1) / (2 (1 + gamma)) of y^2 in the caloric quadratic.
inline double caloric_quadratic_coefficient(int n, double gamma) {
    return (2.0 * n - 1.0) / (2.0 * (1.0 + gamma));
}

/// |x'|^2 - (2n - 1)/(2(1 + gamma)) y^2 - t, L_gamma-caloric for every n, gamma.
inline double eval_caloric_quadratic(double x1, double y, double t, int n, double gamma) {
    require(gamma > -1.0 && gamma < 1.0, "gamma must lie in (-1, 1)");
    return x1 * x1 - caloric_quadratic_coefficient(n, gamma) * y * y - t;
}

} // namespace fracsig
