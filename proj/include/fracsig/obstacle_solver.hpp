#pragma once

// Backward-Euler steppers for the thin obstacle problem
//
//   div(y^gamma grad u) - y^gamma u_t = y^gamma f     in the slab, y > 0
//   u >= psi,  w <= 0,  w (u - psi) = 0               on y = 0
//   u = phi                                           on x = +-X, y = Y
//
// where w = lim y^gamma u_y. The source f is given per unit weight, so the
// interior equation reads u_t = L_gamma u - f.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "fracsig/error.hpp"
#include "fracsig/mesh.hpp"
#include "fracsig/weighted_ops.hpp"

namespace fracsig {

using ObstacleFn = std::function<double(double x1, double t)>;
using SpaceTimeFn = std::function<double(double x1, double y, double t)>;

struct ObstacleProblem {
    double s = 0.5;
    ObstacleFn obstacle;  // may return -infinity (no constraint)
    SpaceTimeFn data;     // boundary values and initial state
    SpaceTimeFn source;   // empty means f = 0
    double T = 1.0;
    std::string description;

    double gamma() const { return 1.0 - 2.0 * s; }

    void validate() const {
        require(s > 0.0 && s < 1.0, "s must lie in (0, 1)");
        require(static_cast<bool>(obstacle), "problem has no obstacle");
        require(static_cast<bool>(data), "problem has no boundary/initial data");
        require(T > 0.0, "final time must be positive");
    }

    /// phi(x, 0, 0) >= psi(x, 0) on the thin nodes of `grid`.
    bool compatible(const Grid& grid) const {
        for (int i = 0; i < grid.nodes_x(); ++i)
            if (data(grid.x(i), 0.0, 0.0) < obstacle(grid.x(i), 0.0)) return false;
        return true;
    }
};

struct PenaltyParams {
    double eps = 1e-3;
    double kappa = 1.0;  // 1 reproduces beta_eps itself; 1/eps is a standard penalty
};

/// beta_eps(v) = -exp(eps / (v - eps)) for v <= eps, 0 otherwise. Range (-1, 0].
inline double beta_eps(double v, double eps) {
    require(eps > 0.0, "eps must be positive");
    if (v >= eps) return 0.0;
    return -std::exp(eps / (v - eps));
}

inline double beta_eps_derivative(double v, double eps) {
    if (v >= eps) return 0.0;
    const double d = v - eps;
    return std::exp(eps / d) * eps / (d * d);
}

enum class SchemeKind { projected, penalized };
enum class InnerSolver { active_set, psor };

inline std::string to_string(SchemeKind k) { return k == SchemeKind::projected ? "projected" : "penalized"; }
inline std::string to_string(InnerSolver k) { return k == InnerSolver::active_set ? "active_set" : "psor"; }

struct Scheme {
    SchemeKind kind = SchemeKind::projected;
    InnerSolver inner = InnerSolver::active_set;
    PenaltyParams penalty;
    double comp_tol = 1e-9;     // PSOR update tolerance / Newton residual tolerance
    int max_iters = 200;        // active-set or Newton iterations
    int max_sweeps = 200000;    // PSOR sweeps
    double relaxation = 1.6;    // PSOR over-relaxation factor
};

struct IterationStats {
    int iterations = 0;
    double residual = 0.0;
};

struct SolverState {
    Field u;
    std::vector<double> flux;            // w on the y = 0 row, one per x node
    std::vector<std::uint8_t> contact;   // 1 where the node is in the coincidence set
    std::vector<double> obstacle;        // psi on the y = 0 row
    IterationStats stats;

    double time() const { return u.time; }
};

struct ComplementarityMetrics {
    double max_violation_u = 0.0;  // max (psi - u)^+
    double max_violation_w = 0.0;  // max w^+
    double max_product = 0.0;      // max |w (u - psi)|
};

/// Complementarity defects over the interior thin nodes (x = +-X carry
/// Dirichlet data and are excluded).
inline ComplementarityMetrics complementarity_residual(const SolverState& st) {
    ComplementarityMetrics m;
    const Grid& g = *st.u.grid;
    for (int i = 1; i < g.nx(); ++i) {
        const double u = st.u.at(i, 0), psi = st.obstacle[i], w = st.flux[i];
        if (std::isfinite(psi)) {
            m.max_violation_u = std::max(m.max_violation_u, psi - u);
            m.max_product = std::max(m.max_product, std::abs(w * (u - psi)));
        }
        m.max_violation_w = std::max(m.max_violation_w, w);
    }
    return m;
}

/// Assembles and solves one backward-Euler level. The unknowns are all
/// nodes; outer-boundary nodes are fixed by the data, and on the thin row
/// the Signorini law is imposed either by projection or by penalty.
class ObstacleStepper {
public:
    ObstacleStepper(GridPtr grid, ObstacleProblem problem, Scheme scheme)
        : grid_(std::move(grid)), problem_(std::move(problem)), scheme_(scheme) {
        problem_.validate();
        require(std::abs(grid_->gamma() - problem_.gamma()) < 1e-12, "grid gamma does not match 1 - 2s");
        stencil_ = build_stencil(grid_);
        if (scheme_.kind == SchemeKind::penalized) require(scheme_.penalty.eps > 0.0, "eps must be positive");
    }

    const Grid& grid() const { return *grid_; }
    const ObstacleProblem& problem() const { return problem_; }
    const Scheme& scheme() const { return scheme_; }

    /// State at t = 0 from the data; the flux is the one-sided zeta difference.
    SolverState initial_state() const {
        SolverState st;
        st.u = sample_field(grid_, [&](double x, double y) { return problem_.data(x, y, 0.0); }, 0.0);
        st.obstacle = obstacle_row(0.0);
        st.flux = flux_trace(st.u, *grid_).values;
        st.contact.assign(grid_->nodes_x(), 0);
        for (int i = 0; i < grid_->nodes_x(); ++i) st.contact[i] = st.u.at(i, 0) <= st.obstacle[i] ? 1 : 0;
        return st;
    }

    SolverState step(const SolverState& prev, double dt) const {
        require(dt > 0.0, "dt must be positive");
        return scheme_.kind == SchemeKind::projected ? step_projected(prev, dt) : step_penalized(prev, dt);
    }

    SolverState step_projected(const SolverState& prev, double dt) const {
        Level lv = setup_level(prev, dt);
        SolverState next;
        next.u = Field(grid_, lv.u, prev.time() + dt);
        next.obstacle = lv.psi_row;
        if (scheme_.inner == InnerSolver::active_set)
            next.stats = active_set_solve(lv, prev.contact, next.u.values);
        else
            next.stats = psor_solve(lv, next.u.values);
        finish_state(lv, next);
        return next;
    }

    SolverState step_penalized(const SolverState& prev, double dt) const {
        Level lv = setup_level(prev, dt);
        SolverState next;
        next.u = Field(grid_, lv.u, prev.time() + dt);
        next.obstacle = lv.psi_row;
        next.stats = newton_penalty_solve(lv, next.u.values);
        const Grid& g = *grid_;
        const auto& pp = scheme_.penalty;
        next.flux.assign(g.nodes_x(), 0.0);
        next.contact.assign(g.nodes_x(), 0);
        const auto res = residual(lv, next.u.values);
        for (int i = 0; i < g.nodes_x(); ++i) {
            const std::size_t k = g.index(i, 0);
            if (g.is_signorini(i, 0)) {
                const double v = next.u.values[k] - lv.psi_row[i];
                next.flux[i] = pp.kappa * beta_eps(v, pp.eps);
                next.contact[i] = v < pp.eps ? 1 : 0;
            } else {
                next.flux[i] = -res[k] / g.dual_dx(i);
            }
        }
        check_finite(next);
        return next;
    }

private:
    struct Level {
        double t = 0.0, dt = 0.0;
        std::vector<double> u;        // initial guess with Dirichlet values inserted
        std::vector<double> rhs;      // m u_old / dt - m f
        std::vector<double> diag;     // m / dt + sum of conductances
        std::vector<std::uint8_t> dirichlet;
        std::vector<double> psi_row;
    };

    std::vector<double> obstacle_row(double t) const {
        std::vector<double> psi(grid_->nodes_x());
        for (int i = 0; i < grid_->nodes_x(); ++i) psi[i] = problem_.obstacle(grid_->x(i), t);
        return psi;
    }

    Level setup_level(const SolverState& prev, double dt) const {
        const Grid& g = *grid_;
        Level lv;
        lv.dt = dt;
        lv.t = prev.time() + dt;
        const std::size_t n = g.node_count();
        lv.u = prev.u.values;
        lv.rhs.resize(n);
        lv.diag.resize(n);
        lv.dirichlet.assign(n, 0);
        lv.psi_row = obstacle_row(lv.t);
        const auto& st = stencil_;
        for (int j = 0; j <= g.ny(); ++j)
            for (int i = 0; i <= g.nx(); ++i) {
                const std::size_t k = g.index(i, j);
                const double m = st.measure[k];
                const double f = problem_.source ? problem_.source(g.x(i), g.y(j), lv.t) : 0.0;
                lv.rhs[k] = m * prev.u.values[k] / dt - m * f;
                lv.diag[k] = m / dt + st.west[k] + st.east[k] + st.south[k] + st.north[k];
                if (g.is_outer_boundary(i, j)) {
                    lv.dirichlet[k] = 1;
                    lv.u[k] = problem_.data(g.x(i), g.y(j), lv.t);
                }
            }
        return lv;
    }

    /// (A u - rhs) on every node; on the thin row this equals -dx * w.
    std::vector<double> residual(const Level& lv, const std::vector<double>& u) const {
        const Grid& g = *grid_;
        std::vector<double> r(u.size());
        for (int j = 0; j <= g.ny(); ++j)
            for (int i = 0; i <= g.nx(); ++i) {
                const std::size_t k = g.index(i, j);
                r[k] = stencil_.measure[k] / lv.dt * u[k] - stencil_flux(stencil_, u, i, j) - lv.rhs[k];
            }
        return r;
    }

    void finish_state(const Level& lv, SolverState& next) const {
        const Grid& g = *grid_;
        const auto res = residual(lv, next.u.values);
        next.flux.assign(g.nodes_x(), 0.0);
        next.contact.assign(g.nodes_x(), 0);
        for (int i = 0; i < g.nodes_x(); ++i) {
            const std::size_t k = g.index(i, 0);
            next.flux[i] = -res[k] / g.dual_dx(i);
            if (g.is_signorini(i, 0)) {
                if (next.u.values[k] <= lv.psi_row[i]) {
                    next.u.values[k] = lv.psi_row[i];
                    next.contact[i] = 1;
                }
            } else {
                next.contact[i] = next.u.values[k] <= lv.psi_row[i] ? 1 : 0;
            }
        }
        check_finite(next);
    }

    static void check_finite(const SolverState& st) {
        if (!st.u.finite()) {
            std::ostringstream os;
            os << "non-finite field at t = " << st.time();
            throw ConvergenceError(os.str(), std::numeric_limits<double>::infinity());
        }
    }

    /// Solves A u = rhs with the nodes in `fixed` held at their current values.
    void solve_fixed(const Level& lv, const std::vector<std::uint8_t>& fixed, std::vector<double>& u,
                     const std::vector<double>& extra_diag = {}) const {
        const Grid& g = *grid_;
        const std::size_t n = g.node_count();
        std::vector<int> map(n, -1);
        int nf = 0;
        for (std::size_t k = 0; k < n; ++k)
            if (!fixed[k]) map[k] = nf++;
        if (nf == 0) return;
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(nf) * 5);
        Eigen::VectorXd b(nf);
        const auto& st = stencil_;
        for (int j = 0; j <= g.ny(); ++j)
            for (int i = 0; i <= g.nx(); ++i) {
                const std::size_t k = g.index(i, j);
                const int r = map[k];
                if (r < 0) continue;
                double d = lv.diag[k] + (extra_diag.empty() ? 0.0 : extra_diag[k]);
                double bk = lv.rhs[k];
                auto couple = [&](double c, std::size_t nb) {
                    if (c == 0.0) return;
                    if (map[nb] >= 0) {
                        if (map[nb] < r) {
                            trip.emplace_back(r, map[nb], -c);
                            trip.emplace_back(map[nb], r, -c);
                        }
                    } else {
                        bk += c * u[nb];
                    }
                };
                if (i > 0) couple(st.west[k], g.index(i - 1, j));
                if (i < g.nx()) couple(st.east[k], g.index(i + 1, j));
                if (j > 0) couple(st.south[k], g.index(i, j - 1));
                if (j < g.ny()) couple(st.north[k], g.index(i, j + 1));
                trip.emplace_back(r, r, d);
                b[r] = bk;
            }
        Eigen::SparseMatrix<double> A(nf, nf);
        A.setFromTriplets(trip.begin(), trip.end());
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
        if (ldlt.info() != Eigen::Success) throw ConvergenceError("sparse factorisation failed", 0.0);
        const Eigen::VectorXd x = ldlt.solve(b);
        for (std::size_t k = 0; k < n; ++k)
            if (map[k] >= 0) u[k] = x[map[k]];
    }

    /// Primal-dual active set iteration on the thin row.
    IterationStats active_set_solve(const Level& lv, const std::vector<std::uint8_t>& warm,
                                    std::vector<double>& u) const {
        const Grid& g = *grid_;
        std::vector<std::uint8_t> fixed = lv.dirichlet;
        std::vector<std::uint8_t> active(g.nodes_x(), 0);
        for (int i = 1; i < g.nx(); ++i) {
            const bool was = i < static_cast<int>(warm.size()) && warm[i];
            active[i] = (std::isfinite(lv.psi_row[i]) && (was || u[g.index(i, 0)] <= lv.psi_row[i])) ? 1 : 0;
        }
        IterationStats stats;
        for (int it = 1; it <= scheme_.max_iters; ++it) {
            for (int i = 1; i < g.nx(); ++i) {
                const std::size_t k = g.index(i, 0);
                fixed[k] = active[i];
                if (active[i]) u[k] = lv.psi_row[i];
            }
            solve_fixed(lv, fixed, u);
            const auto res = residual(lv, u);
            bool changed = false;
            double viol = 0.0;
            for (int i = 1; i < g.nx(); ++i) {
                const std::size_t k = g.index(i, 0);
                if (!std::isfinite(lv.psi_row[i])) continue;
                const double lambda = active[i] ? res[k] : 0.0;
                const std::uint8_t next = lambda + lv.diag[k] * (lv.psi_row[i] - u[k]) > 0.0 ? 1 : 0;
                if (active[i]) viol = std::max(viol, -lambda);
                else viol = std::max(viol, lv.psi_row[i] - u[k]);
                if (next != active[i]) changed = true;
                active[i] = next;
            }
            stats.iterations = it;
            stats.residual = viol;
            if (!changed) return stats;
        }
        throw ConvergenceError("active-set iteration did not settle", stats.residual);
    }

    /// Projected successive over-relaxation.
    IterationStats psor_solve(const Level& lv, std::vector<double>& u) const {
        const Grid& g = *grid_;
        const auto& st = stencil_;
        const double om = scheme_.relaxation;
        IterationStats stats;
        for (int sweep = 1; sweep <= scheme_.max_sweeps; ++sweep) {
            double delta = 0.0;
            for (int colour = 0; colour < 2; ++colour)
                for (int j = 0; j <= g.ny(); ++j)
                    for (int i = (j + colour) % 2; i <= g.nx(); i += 2) {
                        const std::size_t k = g.index(i, j);
                        if (lv.dirichlet[k]) continue;
                        double s = lv.rhs[k];
                        if (i > 0) s += st.west[k] * u[g.index(i - 1, j)];
                        if (i < g.nx()) s += st.east[k] * u[g.index(i + 1, j)];
                        if (j > 0) s += st.south[k] * u[g.index(i, j - 1)];
                        if (j < g.ny()) s += st.north[k] * u[g.index(i, j + 1)];
                        double v = (1.0 - om) * u[k] + om * s / lv.diag[k];
                        if (j == 0) v = std::max(v, lv.psi_row[i]);
                        delta = std::max(delta, std::abs(v - u[k]));
                        u[k] = v;
                    }
            stats.iterations = sweep;
            stats.residual = delta;
            if (delta <= scheme_.comp_tol * 1e-3) return stats;
        }
        throw ConvergenceError("PSOR did not converge", stats.residual);
    }

    /// Newton iteration for the penalised thin-row law w = kappa beta_eps(u - psi).
    IterationStats newton_penalty_solve(const Level& lv, std::vector<double>& u) const {
        const Grid& g = *grid_;
        const auto& pp = scheme_.penalty;
        auto full_residual = [&](const std::vector<double>& v) {
            auto r = residual(lv, v);
            for (int i = 1; i < g.nx(); ++i) {
                const std::size_t k = g.index(i, 0);
                r[k] += g.dual_dx(i) * pp.kappa * beta_eps(v[k] - lv.psi_row[i], pp.eps);
            }
            for (std::size_t k = 0; k < r.size(); ++k)
                if (lv.dirichlet[k]) r[k] = 0.0;
            return r;
        };
        auto norm = [](const std::vector<double>& r) {
            double s = 0.0;
            for (double x : r) s = std::max(s, std::abs(x));
            return s;
        };
        double scale = 0.0;
        for (std::size_t k = 0; k < lv.rhs.size(); ++k) scale = std::max(scale, std::abs(lv.rhs[k]));
        scale = std::max(scale, 1.0);

        IterationStats stats;
        auto r = full_residual(u);
        double rn = norm(r);
        for (int it = 1; it <= scheme_.max_iters; ++it) {
            stats.iterations = it;
            stats.residual = rn;
            if (rn <= scheme_.comp_tol * 1e-3 * scale) return stats;
            // Newton correction: J du = -r, with J = A + dx kappa beta'
            std::vector<double> extra(u.size(), 0.0), rhs_shift(u.size(), 0.0);
            for (int i = 1; i < g.nx(); ++i) {
                const std::size_t k = g.index(i, 0);
                extra[k] = g.dual_dx(i) * pp.kappa * beta_eps_derivative(u[k] - lv.psi_row[i], pp.eps);
            }
            // Solve J du = -r through the shared assembly: J (u + du) = J u - r
            Level lin = lv;
            auto Ju = residual(lv, u);  // A u - rhs
            for (std::size_t k = 0; k < u.size(); ++k) {
                const double Au = Ju[k] + lv.rhs[k];
                lin.rhs[k] = Au + extra[k] * u[k] - r[k];
            }
            std::vector<double> cand = u;
            solve_fixed(lin, lv.dirichlet, cand, extra);
            double step = 1.0;
            for (int ls = 0; ls < 30; ++ls) {
                std::vector<double> trial(u.size());
                for (std::size_t k = 0; k < u.size(); ++k) trial[k] = u[k] + step * (cand[k] - u[k]);
                auto rt = full_residual(trial);
                const double tn = norm(rt);
                if (tn < rn || ls == 29) {
                    u = std::move(trial);
                    r = std::move(rt);
                    rn = tn;
                    break;
                }
                step *= 0.5;
            }
        }
        if (rn <= scheme_.comp_tol * scale) return stats;
        throw ConvergenceError("penalty Newton iteration did not converge", rn);
    }

    GridPtr grid_;
    ObstacleProblem problem_;
    Scheme scheme_;
    OperatorStencil stencil_;
};

} // namespace fracsig
