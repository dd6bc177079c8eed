#pragma once

// The twelve acceptance checks. Each returns a CriterionResult with the
// measured numbers in `measured`; criterion 7 is advisory.

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fracsig/h_gamma.hpp"
#include "fracsig/harness.hpp"
#include "fracsig/rayleigh.hpp"
#include "fracsig/regularity_lab.hpp"
#include "fracsig/weighted_ops.hpp"

namespace fracsig::acceptance {

using harness::CriterionResult;
using harness::ExperimentConfig;
using json = nlohmann::json;

struct SuiteOptions {
    std::uint64_t seed = 1;
    int workers = 0;
};

namespace detail {

inline std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

inline GridPtr make_grid(double s, int nx, int ny, double X = 1.0, double Y = 1.0,
                         std::optional<Grading> gr = std::nullopt) {
    GridSpec g;
    g.x_extent = X;
    g.y_extent = Y;
    g.nx = nx;
    g.ny = ny;
    g.gamma = 1.0 - 2.0 * s;
    g.grading = gr ? *gr : harness::resolve_grading("auto", g.gamma);
    return build_grid(g);
}

inline ObstacleProblem profile_problem(double s, double omega, double T) {
    SignoriniProfile p;
    p.s = s;
    p.omega = omega;
    ObstacleProblem pr;
    pr.s = s;
    pr.obstacle = [](double, double) { return 0.0; };
    pr.data = [p](double x, double y, double t) { return eval_profile(p, x, y, t); };
    if (omega != 0.0)
        pr.source = [p](double x, double y, double t) { return -profile_time_derivative(p, x, y, t); };
    pr.T = T;
    return pr;
}

/// Travelling-profile configuration shared by the exponent, blow-up and
/// time-derivative checks: omega = 0.3, T = 0.5, 256 x 128, 128 steps.
inline ExperimentConfig traveling_config(double s) {
    ExperimentConfig c;
    c.name = "traveling s=" + fmt(s);
    c.s = s;
    c.T = 0.5;
    c.steps = 128;
    c.ladder = {{256, 128, 0}};
    c.data = {{"id", "profile"}, {"omega", 0.3}};
    c.workers = 1;
    return c;
}

inline ExperimentConfig stationary_config(double s) {
    ExperimentConfig c = traveling_config(s);
    c.name = "stationary s=" + fmt(s);
    c.steps = 16;
    c.data = {{"id", "profile"}};
    return c;
}

inline double h_one_oracle(double z) {
    // (1/2pi) int_0^{2pi} exp(-(z/2)(1 - cos t)) dt by the periodic trapezoid rule
    const int n = 256;
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += std::exp(-0.5 * z * (1.0 - std::cos(2.0 * std::numbers::pi * k / n)));
    return s / n;
}

} // namespace detail

/// Runs the checks in order, sharing the travelling s = 1/2 trajectory
/// between the exponent, blow-up and time-derivative criteria.
class Suite {
public:
    explicit Suite(SuiteOptions o = {}) : opt_(o) {}

    std::vector<CriterionResult> run_all(const std::function<void(const CriterionResult&)>& report = {}) {
        std::vector<CriterionResult> out;
        for (int id = 1; id <= 12; ++id) {
            out.push_back(run(id));
            if (report) report(out.back());
        }
        return out;
    }

    CriterionResult run(int id) {
        const auto t0 = std::chrono::steady_clock::now();
        CriterionResult r;
        r.id = id;
        try {
            switch (id) {
            case 1: r = closed_form_identity(); break;
            case 2: r = flux_exactness(); break;
            case 3: r = caloric_convergence(); break;
            case 4: r = stationarity(); break;
            case 5: r = growth_exponents(); break;
            case 6: r = monotonicity_dichotomy(); break;
            case 7: r = eigenvalue(); break;
            case 8: r = h_gamma(); break;
            case 9: r = complementarity_comparison(); break;
            case 10: r = blowup_free_boundary(); break;
            case 11: r = time_derivative(); break;
            case 12: r = penalization(); break;
            default: throw InvalidArgument("no criterion " + std::to_string(id));
            }
        } catch (const std::exception& e) {
            r.passed = false;
            r.measured = std::string("error: ") + e.what();
        }
        r.id = id;
        if (r.name.empty()) r.name = name(id);
        if (id == 7) r.advisory = true;
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return r;
    }

    static std::string name(int id) {
        static const char* names[] = {"",
                                      "closed-form identity",
                                      "flux exactness",
                                      "caloric polynomial convergence",
                                      "stationarity of the Signorini profile",
                                      "optimal growth exponents",
                                      "monotonicity functional dichotomy",
                                      "eigenvalue (advisory)",
                                      "h_gamma",
                                      "complementarity and comparison",
                                      "blow-up and free boundary",
                                      "time-derivative decay",
                                      "penalization consistency"};
        return id >= 1 && id <= 12 ? names[id] : "unknown";
    }

private:
    SuiteOptions opt_;
    std::shared_ptr<const Trajectory> traveling_half_;

    const Trajectory& traveling_half() {
        if (!traveling_half_) {
            auto rep = harness::run(detail::traveling_config(0.5), true);
            if (!rep.runs[0].ok) throw Error("travelling run failed: " + rep.runs[0].error);
            traveling_half_ = std::make_shared<const Trajectory>(std::move(*rep.runs[0].trajectory));
        }
        return *traveling_half_;
    }

    lab::ThinPoint final_fb_point(const Trajectory& tr) {
        const auto q = lab::free_boundary_point(lab::extract_free_boundary(tr), tr.t_end());
        if (!q) throw Error("no free boundary at the final time");
        return {q->x, q->t};
    }

    // 1
    CriterionResult closed_form_identity() {
        std::mt19937_64 rng(opt_.seed);
        std::uniform_real_distribution<double> X(-1.0, 1.0), Y(0.0, 1.0);
        SignoriniProfile p;
        p.s = 0.5;
        double err = 0.0;
        for (int k = 0; k < 10000; ++k) {
            const double x = X(rng), y = Y(rng);
            const double rho = std::hypot(x, y), th = std::atan2(y, x);
            err = std::max(err, std::abs(eval_profile(p, x, y, 0.0) - (2.0 / 3.0) * std::pow(rho, 1.5) * std::cos(1.5 * th)));
        }
        CriterionResult r;
        r.passed = err <= 1e-12;
        r.measured = "max |u0 - (2/3) rho^{3/2} cos(3 theta/2)| = " + detail::fmt(err, 3) + " over 10^4 points (tol 1e-12)";
        return r;
    }

    // 2
    CriterionResult flux_exactness() {
        struct G {
            int nx, ny;
            double X, Y;
            Grading gr;
        };
        const G grids[] = {{8, 4, 1.0, 1.0, Grading::xi_graded},
                           {33, 17, 2.0, 0.5, Grading::uniform},
                           {64, 32, 1.0, 3.0, Grading::xi_graded},
                           {128, 7, 0.3, 1.0, Grading::uniform}};
        double err = 0.0;
        for (double s : {0.25, 0.5, 0.75})
            for (const auto& g : grids) {
                const auto grid = detail::make_grid(s, g.nx, g.ny, g.X, g.Y, g.gr);
                const auto u = sample_field(grid, [s](double, double y) { return eval_flux_calibrator(y, s); });
                for (double w : flux_trace(u, *grid).values) err = std::max(err, std::abs(w - 2.0 * s));
            }
        CriterionResult r;
        r.passed = err <= 1e-12;
        r.measured = "max |flux_trace(y^{2s}) - 2s| = " + detail::fmt(err, 3) + " over 3 s values x 4 grids (tol 1e-12)";
        return r;
    }

    // 3
    CriterionResult caloric_convergence() {
        std::ostringstream m;
        bool ok = true;
        for (double s : {0.25, 0.75}) {
            ExperimentConfig c;
            c.s = s;
            c.T = 0.5;
            c.ladder = {{64, 32, 32}, {128, 64, 64}, {256, 128, 128}};
            c.obstacle = {{"id", "none"}};
            c.data = {{"id", "caloric_quadratic"}};
            c.workers = opt_.workers;
            const auto tab = harness::convergence_study(c, harness::Reference::exact);
            const double order = tab.rows.back().order_linf;
            ok = ok && order >= 1.8;
            m << "s=" << s << ": Linf " << detail::fmt(tab.rows[0].linf, 3) << " -> " << detail::fmt(tab.rows[2].linf, 3)
              << ", orders " << detail::fmt(tab.rows[1].order_linf, 3) << ", " << detail::fmt(order, 3) << "; ";
        }
        CriterionResult r;
        r.passed = ok;
        r.measured = m.str() + "finest 256x128/128 steps, need order >= 1.8";
        return r;
    }

    // 4
    CriterionResult stationarity() {
        const double s = 0.5;
        const auto g = detail::make_grid(s, 128, 64);
        const auto pr = detail::profile_problem(s, 0.0, 1.0);
        ObstacleStepper stepper(g, pr, Scheme{});
        const SolverState init = stepper.initial_state();
        // discrete steady state: one implicit step with a very long time step
        const SolverState steady = stepper.step(init, 1e8);
        double disc = 0.0;
        for (std::size_t k = 0; k < init.u.values.size(); ++k)
            disc = std::max(disc, std::abs(steady.u.values[k] - init.u.values[k]));
        const auto tr = solve(pr, g, Scheme{}, {1.0, 100, 1});
        double drift = 0.0;
        for (const auto& sn : tr.snapshots)
            for (std::size_t k = 0; k < sn.u.size(); ++k) drift = std::max(drift, std::abs(sn.u[k] - init.u.values[k]));
        const double dx = g->x(1) - g->x(0);
        double fb_dev = 0.0;
        bool single = true;
        const auto pts = lab::extract_free_boundary(tr);
        if (pts.size() != tr.snapshots.size()) single = false;
        for (const auto& p : pts) {
            if (p.curve != 0) single = false;
            fb_dev = std::max(fb_dev, std::abs(p.x));
        }
        CriterionResult r;
        r.passed = drift <= 3.0 * disc && single && fb_dev <= dx;
        r.measured = "drift " + detail::fmt(drift, 3) + " vs 3 x discretization error " + detail::fmt(3 * disc, 3) +
                     "; free boundary within " + detail::fmt(fb_dev / dx, 3) + " cells of 0 over 100 steps" +
                     (single ? "" : " (extra interfaces found)");
        return r;
    }

    // 5
    CriterionResult growth_exponents() {
        std::vector<ExperimentConfig> cfgs;
        const json diags = json::array({{{"kind", "growth"}, {"radii", {{"min", 1.0 / 32}, {"max", 0.25}, {"count", 4}}}},
                                        {{"kind", "flux"}, {"radii", {{"min", 1.0 / 32}, {"max", 0.25}, {"count", 4}}}}});
        for (double s : {0.25, 0.5, 0.75}) {
            cfgs.push_back(detail::stationary_config(s));
            cfgs.push_back(detail::traveling_config(s));
        }
        for (auto& c : cfgs) c.diagnostics = diags;
        std::vector<harness::Report> reps(cfgs.size());
        harness::parallel_for(cfgs.size(), harness::worker_count(opt_.workers), [&](std::size_t k) {
            reps[k] = harness::run(cfgs[k], cfgs[k].s == 0.5 && cfgs[k].data.contains("omega"));
        });
        bool ok = true;
        std::ostringstream m;
        for (std::size_t k = 0; k < cfgs.size(); ++k) {
            const auto& run = reps[k].runs[0];
            if (!run.ok) throw Error(cfgs[k].name + ": " + run.error);
            if (run.trajectory && !traveling_half_) traveling_half_ = std::make_shared<const Trajectory>(*run.trajectory);
            const double s = cfgs[k].s;
            double e[2] = {0, 0};
            for (int d = 0; d < 2; ++d) {
                const auto& dr = run.diagnostics[d];
                if (!dr.error.empty()) throw Error(cfgs[k].name + ": " + dr.error);
                e[d] = dr.summary.at("exponent").get<double>();
            }
            ok = ok && std::abs(e[0] - (1 + s)) <= 0.1 && std::abs(e[1] - (1 - s)) <= 0.1;
            m << cfgs[k].name << ": u " << detail::fmt(e[0], 3) << "/" << 1 + s << ", w " << detail::fmt(e[1], 3) << "/"
              << 1 - s << "; ";
        }
        CriterionResult r;
        r.passed = ok;
        r.measured = m.str() + "tol 0.1";
        return r;
    }

    // 6
    CriterionResult monotonicity_dichotomy() {
        const double s = 0.5, X = 0.6;
        const auto g = detail::make_grid(s, 512, 256, X, X);
        auto tr = solve(detail::profile_problem(s, 0.0, 0.2), g, Scheme{}, {0.2, 4, 4});
        tr.snapshots = {tr.snapshots.back()};  // stationary: one frozen slab
        lab::PhiOptions o;
        o.alpha = 1.0 - s;
        o.delta = 0.05;
        const auto radii = lab::log_radii(1.0 / 64, 1.0 / 4, 5);
        const auto rep = lab::monotonicity_phi(tr, {0.0, tr.t_end()}, radii, o);
        bool resolved = true;
        for (bool u : rep.under_resolved) resolved = resolved && !u;

        // sub-threshold synthetic flux w = -rho^{alpha}
        const double alpha = 0.2, delta = 0.05;
        const auto w = sample_field(g, [&](double x, double y) { return -std::pow(std::hypot(x, y), alpha); });
        std::vector<double> phi;
        for (double r : radii) phi.push_back(lab::monotonicity_phi({{&w, 0.0, r * r}}, 0.0, r, s));
        const auto fit = lab::fit_power_law(radii, phi);
        const double envelope = 2 * alpha + delta - 1 - (1 - 2 * s);

        CriterionResult r;
        r.passed = rep.bounded_regime && resolved && rep.max_min_ratio <= 10.0 && fit.exponent >= envelope - 0.15;
        r.measured = "profile: max/min phi over [2^-6, 2^-2] = " + detail::fmt(rep.max_min_ratio, 4) +
                     " (need <= 10" + (resolved ? "" : ", under-resolved") + "); synthetic alpha=0.2: slope " +
                     detail::fmt(fit.exponent, 3) + " vs envelope " + detail::fmt(envelope, 3) + " - 0.15";
        return r;
    }

    // 7
    CriterionResult eigenvalue() {
        std::ostringstream m;
        bool ok = true;
        for (double gamma : {0.0, 0.5}) {
            const double s = 0.5 * (1 - gamma), target = s * (1 - s);
            const auto res = lab::rayleigh_lambda0(gamma);
            const double rel = std::abs(res.lambda - target) / target;
            ok = ok && rel <= 0.02;
            m << "gamma=" << gamma << ": lambda0 " << detail::fmt(res.lambda, 5) << " vs s(1-s) " << detail::fmt(target, 5)
              << " (rel " << detail::fmt(rel, 3) << "; (1-s)/2 = " << detail::fmt(0.5 * (1 - s), 5) << "); ";
        }
        CriterionResult r;
        r.passed = ok;
        r.advisory = true;
        r.measured = m.str() + "tol 2%, non-blocking";
        return r;
    }

    // 8
    CriterionResult h_gamma() {
        const auto h0 = solve_h_gamma(0.0, 20.0);
        double e0 = 0.0;
        for (int k = 0; k < 50; ++k) e0 = std::max(e0, std::abs(h0(20.0 * k / 49.0) - 1.0));
        const auto h1 = solve_h_gamma(1.0, 10.0);
        double e1 = 0.0;
        for (int k = 0; k < 50; ++k) {
            const double z = 10.0 * k / 49.0;
            e1 = std::max(e1, std::abs(h1(z) - detail::h_one_oracle(z)));
        }
        CriterionResult r;
        r.passed = e0 <= 1e-10 && e1 <= 1e-8;
        r.measured = "gamma=0: max |h-1| = " + detail::fmt(e0, 3) + " (tol 1e-10); gamma=1: max |h - integral| = " +
                     detail::fmt(e1, 3) + " at 50 points (tol 1e-8)";
        return r;
    }

    // 9
    CriterionResult complementarity_comparison() {
        struct Outcome {
            double comp = 0.0, cmp = 0.0;
            bool contact = false;
        };
        std::vector<Outcome> out(20);
        harness::parallel_for(out.size(), harness::worker_count(opt_.workers), [&](std::size_t n) {
            std::mt19937_64 rng(opt_.seed * 7919 + n);
            std::uniform_real_distribution<double> U(0.0, 1.0);
            const double s = 0.25 + 0.5 * U(rng);
            const double h = 0.3 * U(rng), k = 0.5 + 1.5 * U(rng), d = U(rng);
            const double lift_psi = 0.1 * U(rng), lift_data = lift_psi + 0.1 * U(rng);
            const auto modes = harness::detail::random_modes(opt_.seed * 1000003ull + n, 0.5);
            auto make = [&](double lp, double ld) {
                ObstacleProblem p;
                p.s = s;
                p.obstacle = [=](double x, double t) { return std::exp(-d * t) * (h - k * x * x) + lp; };
                p.data = [=](double x, double y, double) { return modes(x, y) + ld * (1.0 + x * x); };
                p.T = 0.2;
                return p;
            };
            const auto g = detail::make_grid(s, 32, 16);
            ObstacleStepper lo(g, make(0.0, 0.0), Scheme{}), hi(g, make(lift_psi, lift_data), Scheme{});
            SolverState a = lo.initial_state(), b = hi.initial_state();
            Outcome o;
            for (int step = 1; step <= 10; ++step) {
                a = lo.step(a, 0.02);
                b = hi.step(b, 0.02);
                for (const auto& st : {a, b}) {
                    const auto m = complementarity_residual(st);
                    o.comp = std::max({o.comp, m.max_violation_u, m.max_violation_w, m.max_product});
                    for (int i = 1; i < g->nx(); ++i) o.contact = o.contact || st.contact[i];
                }
                for (std::size_t q = 0; q < a.u.values.size(); ++q) o.cmp = std::max(o.cmp, a.u.values[q] - b.u.values[q]);
            }
            out[n] = o;
        });
        double comp = 0.0, cmp = 0.0;
        int touching = 0;
        for (const auto& o : out) {
            comp = std::max(comp, o.comp);
            cmp = std::max(cmp, o.cmp);
            touching += o.contact ? 1 : 0;
        }
        CriterionResult r;
        r.passed = comp <= 1e-8 && cmp <= 1e-10;
        r.measured = "20 seeded instances: max complementarity component " + detail::fmt(comp, 3) +
                     " (tol 1e-8); max (u_low - u_high) = " + detail::fmt(cmp, 3) + " (must be <= 0); " + std::to_string(touching) + "/20 with contact";
        return r;
    }

    // 10
    CriterionResult blowup_free_boundary() {
        const Trajectory& tr = traveling_half();
        const auto p = final_fb_point(tr);
        const auto b = lab::blowup_compare(tr, p, 0.25, 0.5);
        const auto pts = lab::extract_free_boundary(tr, {16});
        double lo = 1.0, hi = -1.0;
        for (const auto& q : pts)
            if (q.curve == 0 && q.t >= 0.1 && q.t <= 0.4) {
                lo = std::min(lo, q.normal_t);
                hi = std::max(hi, q.normal_t);
            }
        const double rel = std::abs(b.omega_hat - 0.3) / 0.3;
        CriterionResult r;
        r.passed = rel <= 0.1 && hi >= lo && hi - lo <= 0.05;
        r.measured = "omega_hat " + detail::fmt(b.omega_hat, 4) + " vs 0.3 (rel " + detail::fmt(rel, 3) +
                     ", blow-up sup error " + detail::fmt(b.linf_error, 3) + "); normal_t range " +
                     detail::fmt(hi - lo, 3) + " over t in [0.1, 0.4] (tol 0.05)";
        return r;
    }

    // 11
    CriterionResult time_derivative() {
        const Trajectory& tr = traveling_half();
        const auto p = final_fb_point(tr);
        const auto radii = lab::log_radii(1.0 / 32, 0.25, 4);
        const auto dens = lab::parabolic_density(tr, p, radii, 0.05);
        const auto f = lab::time_derivative_decay(tr, p, radii, 0.05);
        double dmin = 1.0;
        for (double v : dens.ratios) dmin = std::min(dmin, v);
        CriterionResult r;
        r.passed = !f.degenerate && f.exponent >= 0.1 && f.residual <= 0.2;
        r.measured = "alpha_hat " + detail::fmt(f.exponent, 3) + " (need >= 0.1), residual " + detail::fmt(f.residual, 3) +
                     " (need <= 0.2), min density " + detail::fmt(dmin, 3);
        return r;
    }

    // 12
    CriterionResult penalization() {
        const double s = 0.5;
        const auto g = detail::make_grid(s, 64, 32);
        const auto pr = detail::profile_problem(s, 0.0, 0.25);
        const TimeSchedule sched{0.25, 16, 1};
        const auto ref = solve(pr, g, Scheme{}, sched);
        std::vector<double> dist;
        for (double eps : {1e-1, 1e-2, 1e-3}) {
            Scheme sc;
            sc.kind = SchemeKind::penalized;
            sc.penalty = {eps, 1.0 / eps};
            const auto tr = solve(pr, g, sc, sched);
            double d = 0.0;
            for (std::size_t n = 0; n < tr.snapshots.size(); ++n)
                for (std::size_t k = 0; k < tr.snapshots[n].u.size(); ++k)
                    d = std::max(d, std::abs(tr.snapshots[n].u[k] - ref.snapshots[n].u[k]));
            dist.push_back(d);
        }
        const bool mono = dist[1] <= dist[0] && dist[2] <= dist[1];
        CriterionResult r;
        r.passed = mono && dist[2] <= 5e-2;
        r.measured = "max |u_eps - u| = " + detail::fmt(dist[0], 3) + ", " + detail::fmt(dist[1], 3) + ", " +
                     detail::fmt(dist[2], 3) + " for eps = 1e-1, 1e-2, 1e-3 (monotone, <= 5e-2 at 1e-3)";
        return r;
    }
};

inline std::string format_line(const CriterionResult& r) {
    std::ostringstream os;
    const char* verdict = r.passed ? "PASS" : (r.advisory ? "FAIL (advisory)" : "FAIL");
    os << "criterion " << (r.id < 10 ? " " : "") << r.id << " " << verdict << "  " << r.name << ": " << r.measured
       << " [" << detail::fmt(r.seconds, 3) << " s]";
    return os.str();
}

} // namespace fracsig::acceptance
