#pragma once

// Smallest Gaussian-weighted Rayleigh quotient
//
//   lambda_0 = inf  int y^{-gamma} |grad w|^2 e^{-|z|^2/4}  /  int y^{-gamma} w^2 e^{-|z|^2/4}
//
// over the upper half-plane with w = 0 on the negative thin half-line,
// discretised with bilinear elements on a truncated, graded box.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "fracsig/error.hpp"
#include "fracsig/special.hpp"

namespace fracsig::lab {

struct RayleighOptions {
    double extent = 10.0;     // truncation: x in [-L, L], y in [0, L]
    int nx = 192;             // cells in x
    int ny = 96;              // cells in y
    double grading = 2.0;     // nodes L * |v|^grading for uniform v; clusters at the tip
    bool constrained = true;  // impose w = 0 on {y = 0, x <= 0}
    int max_iters = 2000;
    double tol = 1e-10;
};

struct RayleighSystem {
    std::vector<double> x, y;
    std::vector<int> dof;  // node -> unknown, -1 if fixed to zero
    int unknowns = 0;
    Eigen::SparseMatrix<double> K, M;
};

struct RayleighResult {
    double lambda = 0.0;
    int iterations = 0;
    bool converged = false;
    double last_change = 0.0;
};

namespace detail {

/// 1D element matrices for linear elements, weight given per element by a
/// quadrature in a coordinate t with y = ymap(t) and dy * weight = wt(t) dt.
struct Element1D {
    double mass[2][2];
    double stiff[2][2];
};

} // namespace detail

inline RayleighSystem build_rayleigh_system(double gamma, const RayleighOptions& o = {}) {
    require(gamma > -1.0 && gamma < 1.0, "gamma must lie in (-1, 1)");
    require(o.nx >= 2 && o.ny >= 2 && o.extent > 0.0, "invalid Rayleigh mesh");
    RayleighSystem sys;
    const double L = o.extent;
    for (int i = 0; i <= o.nx; ++i) {
        const double v = -1.0 + 2.0 * i / o.nx;
        sys.x.push_back(L * (v < 0 ? -1.0 : 1.0) * std::pow(std::abs(v), o.grading));
    }
    for (int j = 0; j <= o.ny; ++j) sys.y.push_back(L * std::pow(static_cast<double>(j) / o.ny, o.grading));

    const auto rule = special::gauss_legendre(8);
    // x: weight e^{-x^2/4}
    auto elem_x = [&](double a, double b) {
        detail::Element1D e{};
        const double h = b - a;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            const double x = 0.5 * (a + b) + 0.5 * h * rule.nodes[q];
            const double w = 0.5 * h * rule.weights[q] * std::exp(-0.25 * x * x);
            const double phi[2] = {(b - x) / h, (x - a) / h}, dphi[2] = {-1.0 / h, 1.0 / h};
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c) {
                    e.mass[r][c] += w * phi[r] * phi[c];
                    e.stiff[r][c] += w * dphi[r] * dphi[c];
                }
        }
        return e;
    };
    // y: weight y^{-gamma} e^{-y^2/4}, integrated in t = y^{1-gamma}
    const double p = 1.0 - gamma;
    auto elem_y = [&](double a, double b) {
        detail::Element1D e{};
        const double h = b - a;
        const double ta = std::pow(a, p), tb = std::pow(b, p);
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            const double t = 0.5 * (ta + tb) + 0.5 * (tb - ta) * rule.nodes[q];
            const double y = std::pow(t, 1.0 / p);
            const double w = 0.5 * (tb - ta) * rule.weights[q] / p * std::exp(-0.25 * y * y);
            const double phi[2] = {(b - y) / h, (y - a) / h}, dphi[2] = {-1.0 / h, 1.0 / h};
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c) {
                    e.mass[r][c] += w * phi[r] * phi[c];
                    e.stiff[r][c] += w * dphi[r] * dphi[c];
                }
        }
        return e;
    };

    const int NX = o.nx + 1, NY = o.ny + 1;
    sys.dof.assign(static_cast<std::size_t>(NX) * NY, -1);
    for (int j = 0; j < NY; ++j)
        for (int i = 0; i < NX; ++i) {
            const bool outer = i == 0 || i == o.nx || j == o.ny;
            const bool blocked = o.constrained && j == 0 && sys.x[i] <= 0.0;
            if (!outer && !blocked) sys.dof[j * NX + i] = sys.unknowns++;
        }
    std::vector<Eigen::Triplet<double>> tk, tm;
    for (int j = 0; j < o.ny; ++j) {
        const auto ey = elem_y(sys.y[j], sys.y[j + 1]);
        for (int i = 0; i < o.nx; ++i) {
            const auto ex = elem_x(sys.x[i], sys.x[i + 1]);
            for (int a = 0; a < 4; ++a) {
                const int ia = a & 1, ja = a >> 1;
                const int ra = sys.dof[(j + ja) * NX + i + ia];
                if (ra < 0) continue;
                for (int b = 0; b < 4; ++b) {
                    const int ib = b & 1, jb = b >> 1;
                    const int rb = sys.dof[(j + jb) * NX + i + ib];
                    if (rb < 0) continue;
                    tk.emplace_back(ra, rb, ex.stiff[ia][ib] * ey.mass[ja][jb] + ex.mass[ia][ib] * ey.stiff[ja][jb]);
                    tm.emplace_back(ra, rb, ex.mass[ia][ib] * ey.mass[ja][jb]);
                }
            }
        }
    }
    sys.K.resize(sys.unknowns, sys.unknowns);
    sys.M.resize(sys.unknowns, sys.unknowns);
    sys.K.setFromTriplets(tk.begin(), tk.end());
    sys.M.setFromTriplets(tm.begin(), tm.end());
    return sys;
}

/// Inverse power iteration on K w = lambda M w.
inline RayleighResult rayleigh_lambda0(double gamma, const RayleighOptions& o = {}) {
    const auto sys = build_rayleigh_system(gamma, o);
    require(sys.unknowns > 0, "no free unknowns");
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(sys.K);
    if (ldlt.info() != Eigen::Success) throw ConvergenceError("Rayleigh stiffness factorisation failed", 0.0);
    Eigen::VectorXd v = Eigen::VectorXd::Ones(sys.unknowns);
    RayleighResult res;
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= o.max_iters; ++it) {
        Eigen::VectorXd z = ldlt.solve(sys.M * v);
        const double nrm = std::sqrt(z.dot(sys.M * z));
        v = z / nrm;
        const double lam = v.dot(sys.K * v);
        res.iterations = it;
        res.lambda = lam;
        res.last_change = std::abs(lam - prev);
        if (res.last_change <= o.tol * std::max(std::abs(lam), 1.0)) {
            res.converged = true;
            return res;
        }
        prev = lam;
    }
    throw ConvergenceError("inverse power iteration stagnated", res.last_change);
}

} // namespace fracsig::lab
