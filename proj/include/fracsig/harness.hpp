#pragma once

// Config-driven experiment runner: named problem families, refinement
// ladders, diagnostics pipelines, reports and convergence studies.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "fracsig/error.hpp"
#include "fracsig/grid_io.hpp"
#include "fracsig/mesh.hpp"
#include "fracsig/obstacle_solver.hpp"
#include "fracsig/profiles.hpp"
#include "fracsig/regularity_lab.hpp"
#include "fracsig/trajectory.hpp"
#include "fracsig/trajectory_io.hpp"

namespace fracsig::harness {

using json = nlohmann::json;

inline constexpr const char* code_version = "fracsig 0.1.0";

// ---------------------------------------------------------------------------
// Configuration

struct Level {
    int nx = 64;
    int ny = 32;
    int steps = 0;  // 0: scale the base step count with nx
};

struct ExperimentConfig {
    std::string name = "experiment";
    double s = 0.5;
    double T = 0.5;
    int steps = 32;  // time steps on the first ladder level
    int output_every = 1;
    double x_extent = 1.0;
    double y_extent = 1.0;
    std::string grading = "auto";  // auto | uniform | xi_graded
    std::vector<Level> ladder{{64, 32, 0}};
    json obstacle = {{"id", "zero"}};
    json data = {{"id", "profile"}};
    Scheme scheme;
    json diagnostics = json::array();
    std::string out;
    std::uint64_t seed = 1;
    int workers = 0;  // 0: hardware concurrency
    bool save_snapshots = false;

    double gamma() const { return 1.0 - 2.0 * s; }
};

inline Grading resolve_grading(const std::string& g, double gamma) {
    if (g == "auto") return gamma > 0.0 ? Grading::uniform : Grading::xi_graded;
    return grading_from_string(g);
}

inline json scheme_to_json(const Scheme& s) {
    json j = io::scheme_json(s);
    j.update(io::tolerances_json(s));
    return j;
}

inline Scheme scheme_from_json(const json& j) {
    Scheme s;
    const std::string kind = j.value("kind", "projected");
    if (kind == "projected") s.kind = SchemeKind::projected;
    else if (kind == "penalized") s.kind = SchemeKind::penalized;
    else throw InvalidArgument("unknown scheme kind '" + kind + "'");
    const std::string inner = j.value("inner", "active_set");
    if (inner == "active_set") s.inner = InnerSolver::active_set;
    else if (inner == "psor") s.inner = InnerSolver::psor;
    else throw InvalidArgument("unknown inner solver '" + inner + "'");
    s.penalty.eps = j.value("eps", s.penalty.eps);
    s.penalty.kappa = j.value("kappa", s.penalty.kappa);
    s.comp_tol = j.value("comp_tol", s.comp_tol);
    s.max_iters = j.value("max_iters", s.max_iters);
    s.max_sweeps = j.value("max_sweeps", s.max_sweeps);
    s.relaxation = j.value("relaxation", s.relaxation);
    return s;
}

inline json to_json(const ExperimentConfig& c) {
    json ladder = json::array();
    for (const auto& l : c.ladder) ladder.push_back({l.nx, l.ny, l.steps});
    return {{"name", c.name},
            {"s", c.s},
            {"T", c.T},
            {"steps", c.steps},
            {"output_every", c.output_every},
            {"domain", {{"x_extent", c.x_extent}, {"y_extent", c.y_extent}}},
            {"grid", {{"grading", c.grading}, {"ladder", ladder}}},
            {"obstacle", c.obstacle},
            {"data", c.data},
            {"scheme", scheme_to_json(c.scheme)},
            {"diagnostics", c.diagnostics},
            {"out", c.out},
            {"seed", c.seed},
            {"workers", c.workers},
            {"save_snapshots", c.save_snapshots}};
}

inline ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    try {
        static const std::vector<std::string> known = {"name",   "s",       "T",           "steps",       "output_every",
                                                       "domain", "grid",    "obstacle",    "data",        "scheme",
                                                       "diagnostics", "out", "seed",       "workers",     "save_snapshots",
                                                       "gamma"};
        for (const auto& [k, v] : j.items())
            if (std::find(known.begin(), known.end(), k) == known.end())
                throw InvalidArgument("unknown config key '" + k + "'");
        c.name = j.value("name", c.name);
        if (j.contains("s") && j.contains("gamma")) throw InvalidArgument("config sets both s and gamma");
        c.s = j.value("s", c.s);
        if (j.contains("gamma")) c.s = 0.5 * (1.0 - j.at("gamma").get<double>());
        c.T = j.value("T", c.T);
        c.steps = j.value("steps", c.steps);
        c.output_every = j.value("output_every", c.output_every);
        if (j.contains("domain")) {
            c.x_extent = j.at("domain").value("x_extent", c.x_extent);
            c.y_extent = j.at("domain").value("y_extent", c.y_extent);
        }
        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            c.grading = g.value("grading", c.grading);
            if (g.contains("ladder")) {
                c.ladder.clear();
                for (const auto& l : g.at("ladder")) {
                    if (!l.is_array() || l.size() < 2 || l.size() > 3)
                        throw InvalidArgument("ladder entries are [nx, ny] or [nx, ny, steps]");
                    c.ladder.push_back({l[0].get<int>(), l[1].get<int>(), l.size() == 3 ? l[2].get<int>() : 0});
                }
            }
        }
        if (j.contains("obstacle")) c.obstacle = j.at("obstacle");
        if (j.contains("data")) c.data = j.at("data");
        if (j.contains("scheme")) c.scheme = scheme_from_json(j.at("scheme"));
        if (j.contains("diagnostics")) c.diagnostics = j.at("diagnostics");
        c.out = j.value("out", c.out);
        c.seed = j.value("seed", c.seed);
        c.workers = j.value("workers", c.workers);
        c.save_snapshots = j.value("save_snapshots", c.save_snapshots);
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed config: ") + e.what());
    }
    return c;
}

/// Applies "a.b.c=value" to a config document. The key must already exist;
/// the value is parsed as JSON, falling back to a plain string.
inline void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidArgument("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    json* node = &doc;
    std::size_t pos = 0;
    while (true) {
        const auto dot = key.find('.', pos);
        const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (!node->is_object() || !node->contains(part)) throw InvalidArgument("override key '" + key + "' does not exist");
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        pos = dot + 1;
    }
    json v = json::parse(text, nullptr, false);
    *node = v.is_discarded() ? json(text) : v;
}

inline std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string config_hash(const ExperimentConfig& c) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json(c).dump())));
    return buf;
}

// ---------------------------------------------------------------------------
// Registry of problem families

struct Family {
    ObstacleFn obstacle;
    SpaceTimeFn data;
    SpaceTimeFn source;
    std::function<double(double, double, double)> exact;  // empty when unknown
    std::function<double(double, double)> exact_flux;
    std::string description;
};

namespace detail {

inline double param(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw InvalidArgument(std::string("parameter '") + key + "' must be a number");
    return j.at(key).get<double>();
}

inline void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& what) {
    for (const auto& [k, v] : j.items())
        if (k != "id" && std::find(allowed.begin(), allowed.end(), k) == allowed.end())
            throw InvalidArgument("unknown parameter '" + k + "' for " + what);
}

/// Smooth random field: a few cosine modes in x decaying in y, drawn from seed.
struct RandomModes {
    std::vector<double> amp, freq, phase;
    double base = 0.0, decay = 1.0;

    double operator()(double x, double y) const {
        double v = base;
        for (std::size_t k = 0; k < amp.size(); ++k) v += amp[k] * std::cos(freq[k] * x + phase[k]);
        return v * std::exp(-decay * y);
    }
};

inline RandomModes random_modes(std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    RandomModes m;
    m.base = scale * (0.2 + 0.3 * U(rng));
    for (int k = 0; k < 3; ++k) {
        m.amp.push_back(scale * 0.3 * (2 * U(rng) - 1) / (k + 1));
        m.freq.push_back(1.0 + 3.0 * U(rng));
        m.phase.push_back(6.283185307179586 * U(rng));
    }
    m.decay = 0.5 + U(rng);
    return m;
}

} // namespace detail

inline const std::vector<std::string>& obstacle_ids() {
    static const std::vector<std::string> ids = {"none", "zero", "constant", "paraboloid"};
    return ids;
}

inline const std::vector<std::string>& data_ids() {
    static const std::vector<std::string> ids = {"profile", "caloric_quadratic", "flux_calibrator", "bump", "random"};
    return ids;
}

/// Builds the obstacle/data/source callables for a config. Unknown ids and
/// parameters are rejected here, before any run starts.
inline Family make_family(const ExperimentConfig& c) {
    using detail::param;
    Family f;
    const json& ob = c.obstacle;
    const json& da = c.data;
    if (!ob.is_object() || !ob.contains("id") || !ob.at("id").is_string()) throw InvalidArgument("obstacle needs an id");
    if (!da.is_object() || !da.contains("id") || !da.at("id").is_string()) throw InvalidArgument("data needs an id");
    const std::string oid = ob.at("id"), did = da.at("id");
    const double s = c.s, gamma = c.gamma();

    if (oid == "none") {
        detail::check_keys(ob, {}, "obstacle none");
        f.obstacle = [](double, double) { return -std::numeric_limits<double>::infinity(); };
    } else if (oid == "zero") {
        detail::check_keys(ob, {}, "obstacle zero");
        f.obstacle = [](double, double) { return 0.0; };
    } else if (oid == "constant") {
        detail::check_keys(ob, {"value"}, "obstacle constant");
        const double v = param(ob, "value", 0.0);
        f.obstacle = [v](double, double) { return v; };
    } else if (oid == "paraboloid") {
        // psi = e^{-decay t} (height - curvature x^2)
        detail::check_keys(ob, {"height", "curvature", "decay"}, "obstacle paraboloid");
        const double h = param(ob, "height", 0.2), k = param(ob, "curvature", 1.0), d = param(ob, "decay", 0.0);
        f.obstacle = [h, k, d](double x, double t) { return std::exp(-d * t) * (h - k * x * x); };
    } else {
        throw InvalidArgument("unknown obstacle id '" + oid + "'");
    }

    if (did == "profile") {
        detail::check_keys(da, {"omega", "x0", "t0"}, "data profile");
        SignoriniProfile p;
        p.s = s;
        p.omega = param(da, "omega", 0.0);
        p.x0 = param(da, "x0", 0.0);
        p.t0 = param(da, "t0", 0.0);
        f.data = [p](double x, double y, double t) { return eval_profile(p, x, y, t); };
        // u_t = L u - f with L u0 = 0 makes the travelling profile exact for f = -u0_t
        if (p.omega != 0.0)
            f.source = [p](double x, double y, double t) { return -profile_time_derivative(p, x, y, t); };
        if (oid == "zero") {
            f.exact = f.data;
            f.exact_flux = [p](double x, double t) { return profile_boundary_flux(p, x, t); };
        }
        f.description = "Signorini profile s=" + std::to_string(s) + " omega=" + std::to_string(p.omega);
    } else if (did == "caloric_quadratic") {
        detail::check_keys(da, {}, "data caloric_quadratic");
        f.data = [gamma](double x, double y, double t) { return eval_caloric_quadratic(x, y, t, 2, gamma); };
        if (oid == "none" || oid == "constant") {
            f.exact = f.data;
            f.exact_flux = [](double, double) { return 0.0; };
        }
        f.description = "caloric quadratic gamma=" + std::to_string(gamma);
    } else if (did == "flux_calibrator") {
        // -y^{2s}: in contact with psi = 0 everywhere, flux -2s <= 0
        detail::check_keys(da, {}, "data flux_calibrator");
        f.data = [s](double, double y, double) { return -eval_flux_calibrator(y, s); };
        if (oid == "zero") {
            f.exact = f.data;
            f.exact_flux = [s](double, double) { return -2.0 * s; };
        }
        f.description = "flux calibrator -y^{2s}";
    } else if (did == "bump") {
        // height exp(-(x^2 + y^2)/width^2) + offset
        detail::check_keys(da, {"height", "width", "offset"}, "data bump");
        const double h = param(da, "height", 0.5), w = param(da, "width", 0.5), o = param(da, "offset", 0.0);
        require(w > 0.0, "bump width must be positive");
        f.data = [h, w, o](double x, double y, double) { return o + h * std::exp(-(x * x + y * y) / (w * w)); };
        f.description = "Gaussian bump";
    } else if (did == "random") {
        detail::check_keys(da, {"index", "scale"}, "data random");
        const auto m = detail::random_modes(c.seed * 1000003ull + static_cast<std::uint64_t>(param(da, "index", 0.0)),
                                            param(da, "scale", 1.0));
        f.data = [m](double x, double y, double) { return m(x, y); };
        f.description = "random smooth data seed=" + std::to_string(c.seed);
    } else {
        throw InvalidArgument("unknown data id '" + did + "'");
    }
    return f;
}

inline const std::vector<std::string>& diagnostic_kinds() {
    static const std::vector<std::string> k = {"growth", "flux", "density", "time_decay", "blowup",
                                               "free_boundary", "phi", "frequency"};
    return k;
}

/// Full validation: value ranges, registry ids, ladder shape, diagnostics.
inline void validate(const ExperimentConfig& c) {
    require(c.s > 0.0 && c.s < 1.0, "s must lie in (0, 1)");
    require(c.T > 0.0, "T must be positive");
    require(c.steps >= 1, "steps must be >= 1");
    require(c.output_every >= 1, "output_every must be >= 1");
    require(!c.ladder.empty(), "grid ladder is empty");
    resolve_grading(c.grading, c.gamma());
    for (std::size_t k = 0; k < c.ladder.size(); ++k) {
        const auto& l = c.ladder[k];
        require(l.nx >= 2 && l.ny >= 2 && l.steps >= 0, "ladder levels need nx, ny >= 2");
        if (k > 0) require(l.nx > c.ladder[k - 1].nx && l.ny > c.ladder[k - 1].ny, "ladder is not strictly refining");
    }
    make_family(c);
    require(c.diagnostics.is_array(), "diagnostics must be a list");
    for (const auto& d : c.diagnostics) {
        require(d.is_object() && d.contains("kind") && d.at("kind").is_string(), "each diagnostic needs a kind");
        const std::string k = d.at("kind");
        if (std::find(diagnostic_kinds().begin(), diagnostic_kinds().end(), k) == diagnostic_kinds().end())
            throw InvalidArgument("unknown diagnostic '" + k + "'");
    }
    require(c.workers >= 0, "workers must be >= 0");
}

inline GridPtr level_grid(const ExperimentConfig& c, const Level& l) {
    GridSpec g;
    g.x_extent = c.x_extent;
    g.y_extent = c.y_extent;
    g.nx = l.nx;
    g.ny = l.ny;
    g.gamma = c.gamma();
    g.grading = resolve_grading(c.grading, c.gamma());
    return build_grid(g);
}

inline int level_steps(const ExperimentConfig& c, std::size_t k) {
    const auto& l = c.ladder[k];
    if (l.steps > 0) return l.steps;
    return std::max(1, static_cast<int>(std::lround(static_cast<double>(c.steps) * l.nx / c.ladder.front().nx)));
}

inline ObstacleProblem make_problem(const ExperimentConfig& c, const Family& f) {
    ObstacleProblem p;
    p.s = c.s;
    p.obstacle = f.obstacle;
    p.data = f.data;
    p.source = f.source;
    p.T = c.T;
    p.description = f.description;
    return p;
}

/// Worker count: config value (0 = hardware), capped by FRACSIG_WORKERS.
inline int worker_count(int requested) {
    int n = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("FRACSIG_WORKERS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && cap >= 1) n = std::min<int>(n, static_cast<int>(cap));
    }
    return std::max(1, n);
}

/// Runs fn(k) for k < count on up to `workers` threads. Each task owns its
/// outputs; exceptions must be handled inside fn.
template <class Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
    const int n = std::min<int>(workers, static_cast<int>(count));
    if (n <= 1) {
        for (std::size_t k = 0; k < count; ++k) fn(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < n; ++w)
        pool.emplace_back([&] {
            for (std::size_t k = next++; k < count; k = next++) fn(k);
        });
    for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// Diagnostics

struct DiagnosticRow {
    std::string diagnostic;
    double key = 0.0;  // radius, or time for free boundary rows
    double value = 0.0;
    bool used = true;
};

struct DiagnosticResult {
    std::string kind;
    json summary = json::object();
    std::vector<DiagnosticRow> rows;
    std::string error;
};

namespace detail {

inline std::vector<double> radii_param(const json& d, const std::vector<double>& fallback) {
    if (!d.contains("radii")) return fallback;
    const auto& r = d.at("radii");
    if (r.is_object()) return lab::log_radii(r.at("min").get<double>(), r.at("max").get<double>(), r.at("count").get<int>());
    return r.get<std::vector<double>>();
}

inline lab::FitOptions fit_options(const json& d) {
    lab::FitOptions o;
    if (d.contains("flavor")) o.flavor = lab::flavor_from_string(d.at("flavor").get<std::string>());
    o.C1 = d.value("C1", o.C1);
    o.C2 = d.value("C2", o.C2);
    o.C3 = d.value("C3", o.C3);
    o.min_cells = d.value("min_cells", o.min_cells);
    return o;
}

/// Point of a diagnostic: explicit [x, t], or the free boundary (curve 0)
/// at time "t" (default: the final time).
inline lab::ThinPoint resolve_point(const Trajectory& tr, const json& d) {
    if (d.contains("point") && d.at("point").is_array()) {
        const auto& p = d.at("point");
        return {p.at(0).get<double>(), p.at(1).get<double>()};
    }
    const double t = d.value("t", tr.t_end());
    const auto pts = lab::extract_free_boundary(tr, {1});
    const auto q = lab::free_boundary_point(pts, t, d.value("curve", 0));
    if (!q) throw InvalidArgument("no free boundary point to center the diagnostic on");
    return {q->x, q->t};
}

inline void add_fit(DiagnosticResult& r, const lab::ExponentFit& f) {
    for (std::size_t k = 0; k < f.radii.size(); ++k) r.rows.push_back({r.kind, f.radii[k], f.values[k], f.used[k]});
    r.summary["exponent"] = f.exponent;
    r.summary["residual"] = f.residual;
    r.summary["status"] = f.status;
    r.summary["notes"] = f.notes;
}

} // namespace detail

inline DiagnosticResult run_diagnostic(const Trajectory& tr, const json& d) {
    DiagnosticResult r;
    r.kind = d.at("kind").get<std::string>();
    const std::vector<double> default_radii = lab::log_radii(1.0 / 32, 1.0 / 4, 4);
    try {
        if (r.kind == "free_boundary") {
            const int hw = d.value("half_width", 1);
            const auto pts = lab::extract_free_boundary(tr, {hw});
            const double lo = d.value("t_min", -std::numeric_limits<double>::infinity());
            const double hi = d.value("t_max", std::numeric_limits<double>::infinity());
            double nmin = std::numeric_limits<double>::infinity(), nmax = -nmin;
            int count = 0;
            for (const auto& p : pts) {
                if (p.curve != d.value("curve", 0) || p.t < lo || p.t > hi) continue;
                r.rows.push_back({"free_boundary", p.t, p.x, true});
                nmin = std::min(nmin, p.normal_t);
                nmax = std::max(nmax, p.normal_t);
                ++count;
            }
            r.summary["points"] = count;
            r.summary["normal_t_range"] = count > 0 ? nmax - nmin : 0.0;
            return r;
        }
        const auto p = detail::resolve_point(tr, d);
        r.summary["x0"] = p.x;
        r.summary["t0"] = p.t;
        const auto radii = detail::radii_param(d, default_radii);
        if (r.kind == "growth") {
            detail::add_fit(r, lab::fit_growth_exponent(tr, p, radii, detail::fit_options(d)));
        } else if (r.kind == "flux") {
            detail::add_fit(r, lab::fit_flux_exponent(tr, p, radii, detail::fit_options(d)));
        } else if (r.kind == "time_decay") {
            detail::add_fit(r, lab::time_derivative_decay(tr, p, radii, d.value("c0", 0.05), detail::fit_options(d)));
        } else if (r.kind == "density") {
            const auto rep = lab::parabolic_density(tr, p, radii, d.value("c0", 0.05));
            for (std::size_t k = 0; k < radii.size(); ++k) r.rows.push_back({r.kind, radii[k], rep.ratios[k], true});
            r.summary["positive"] = rep.positive;
            r.summary["min_ratio"] = *std::min_element(rep.ratios.begin(), rep.ratios.end());
        } else if (r.kind == "blowup") {
            lab::BlowupOptions o;
            o.omega_lo = d.value("omega_min", o.omega_lo);
            o.omega_hi = d.value("omega_max", o.omega_hi);
            const auto b = lab::blowup_compare(tr, p, d.value("r", 0.25), tr.s, o);
            r.summary["omega_hat"] = b.omega_hat;
            r.summary["linf_error"] = b.linf_error;
            r.summary["samples"] = b.samples;
        } else if (r.kind == "phi") {
            lab::PhiOptions o;
            o.alpha = d.value("alpha", 1.0 - tr.s);
            o.delta = d.value("delta", 0.0);
            Trajectory view = tr;
            if (d.value("stationary", false)) view.snapshots = {tr.snapshots[tr.nearest(p.t)]};
            const auto rep = lab::monotonicity_phi(view, p, radii, o);
            for (std::size_t k = 0; k < radii.size(); ++k)
                r.rows.push_back({r.kind, radii[k], rep.phi[k], !rep.under_resolved[k]});
            r.summary["max_min_ratio"] = rep.max_min_ratio;
            r.summary["exponent"] = rep.fit.exponent;
            r.summary["envelope_exponent"] = rep.envelope_exponent;
            r.summary["bounded_regime"] = rep.bounded_regime;
        } else if (r.kind == "frequency") {
            const auto rep = lab::almgren_frequency(tr.field(tr.nearest(p.t)), p.x, radii);
            for (std::size_t k = 0; k < radii.size(); ++k) r.rows.push_back({r.kind, radii[k], rep.values[k], true});
            r.summary["limit"] = rep.limit;
        }
    } catch (const std::exception& e) {
        r.error = e.what();
    }
    return r;
}

// ---------------------------------------------------------------------------
// Runs and reports

struct ErrorNorms {
    double linf = 0.0;
    double weighted_l2 = 0.0;
    double flux_linf = 0.0;
};

/// Errors of a snapshot against an exact solution; weighted L2 uses the
/// dual-box measures, flux errors the interior thin nodes.
inline ErrorNorms snapshot_errors(const Grid& g, const Snapshot& sn, const Family& f) {
    ErrorNorms e;
    double mass = 0.0;
    for (int j = 0; j <= g.ny(); ++j)
        for (int i = 0; i <= g.nx(); ++i) {
            const double d = sn.u[g.index(i, j)] - f.exact(g.x(i), g.y(j), sn.time);
            e.linf = std::max(e.linf, std::abs(d));
            e.weighted_l2 += g.dual_measure(i, j) * d * d;
            mass += g.dual_measure(i, j);
        }
    e.weighted_l2 = std::sqrt(e.weighted_l2 / mass);
    if (f.exact_flux)
        for (int i = 1; i < g.nx(); ++i)
            e.flux_linf = std::max(e.flux_linf, std::abs(sn.flux[i] - f.exact_flux(g.x(i), sn.time)));
    return e;
}

struct RunResult {
    std::size_t level = 0;
    int nx = 0, ny = 0, steps = 0;
    bool ok = false;
    std::string error;
    json metrics = json::object();
    std::vector<DiagnosticResult> diagnostics;
    std::optional<Trajectory> trajectory;
};

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    bool advisory = false;
    std::string measured;
    double seconds = 0.0;
};

struct Report {
    std::string name;
    std::string config_hash;
    std::string version = code_version;
    std::uint64_t seed = 0;
    json config;
    std::vector<RunResult> runs;
    std::vector<CriterionResult> criteria;

    bool all_ok() const {
        for (const auto& r : runs)
            if (!r.ok) return false;
        for (const auto& c : criteria)
            if (!c.passed && !c.advisory) return false;
        return true;
    }
};

inline RunResult run_level(const ExperimentConfig& c, const Family& fam, std::size_t k, bool keep_trajectory) {
    RunResult r;
    r.level = k;
    r.nx = c.ladder[k].nx;
    r.ny = c.ladder[k].ny;
    r.steps = level_steps(c, k);
    try {
        const auto g = level_grid(c, c.ladder[k]);
        auto tr = solve(make_problem(c, fam), g, c.scheme, {c.T, r.steps, c.output_every});
        const auto& last = tr.snapshots.back();
        r.metrics["final_time"] = last.time;
        r.metrics["contact_nodes"] = std::count(last.contact.begin(), last.contact.end(), 1);
        double vu = 0.0, vw = 0.0, prod = 0.0;
        for (int i = 1; i < g->nx(); ++i) {
            const double psi = last.obstacle[i], u = last.u[g->index(i, 0)], w = last.flux[i];
            if (std::isfinite(psi)) {
                vu = std::max(vu, psi - u);
                prod = std::max(prod, std::abs(w * (u - psi)));
            }
            vw = std::max(vw, w);
        }
        r.metrics["violation_u"] = vu;
        r.metrics["violation_w"] = vw;
        r.metrics["max_product"] = prod;
        if (fam.exact) {
            const auto e = snapshot_errors(*g, last, fam);
            r.metrics["linf_error"] = e.linf;
            r.metrics["weighted_l2_error"] = e.weighted_l2;
            if (fam.exact_flux) r.metrics["flux_linf_error"] = e.flux_linf;
        }
        for (const auto& d : c.diagnostics) r.diagnostics.push_back(run_diagnostic(tr, d));
        if (!c.out.empty() && c.save_snapshots) {
            json problem = {{"obstacle", c.obstacle}, {"data", c.data}, {"T", c.T}, {"s", c.s}};
            io::save_trajectory((std::filesystem::path(c.out) / ("level_" + std::to_string(k))).string(), tr, problem);
        }
        if (keep_trajectory) r.trajectory = std::move(tr);
        r.ok = true;
    } catch (const std::exception& e) {
        r.error = e.what();
    }
    return r;
}

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

} // namespace detail

inline std::string runs_csv(const Report& rep) {
    std::string out = "level,nx,ny,steps,ok,linf_error,weighted_l2_error,flux_linf_error,contact_nodes,violation_u,"
                      "violation_w,max_product,error\n";
    for (const auto& r : rep.runs) {
        auto m = [&](const char* k) { return r.metrics.contains(k) ? detail::num(r.metrics.at(k).get<double>()) : ""; };
        out += std::to_string(r.level) + "," + std::to_string(r.nx) + "," + std::to_string(r.ny) + "," +
               std::to_string(r.steps) + "," + (r.ok ? "1" : "0") + "," + m("linf_error") + "," +
               m("weighted_l2_error") + "," + m("flux_linf_error") + "," + m("contact_nodes") + "," +
               m("violation_u") + "," + m("violation_w") + "," + m("max_product") + "," +
               detail::csv_field(r.error) + "\n";
    }
    return out;
}

/// One row per radius (or interface time) per diagnostic per level.
inline std::string diagnostics_csv(const Report& rep) {
    std::string out = "level,diagnostic,key,value,used\n";
    for (const auto& r : rep.runs)
        for (const auto& d : r.diagnostics)
            for (const auto& row : d.rows)
                out += std::to_string(r.level) + "," + row.diagnostic + "," + detail::num(row.key) + "," +
                       detail::num(row.value) + "," + (row.used ? "1" : "0") + "\n";
    return out;
}

inline json summary_json(const Report& rep) {
    json runs = json::array();
    for (const auto& r : rep.runs) {
        json diags = json::array();
        for (const auto& d : r.diagnostics) {
            json j = d.summary;
            j["kind"] = d.kind;
            if (!d.error.empty()) j["error"] = d.error;
            diags.push_back(j);
        }
        runs.push_back({{"level", r.level},
                        {"nx", r.nx},
                        {"ny", r.ny},
                        {"steps", r.steps},
                        {"ok", r.ok},
                        {"error", r.error},
                        {"metrics", r.metrics},
                        {"diagnostics", diags}});
    }
    json crit = json::array();
    for (const auto& c : rep.criteria)
        crit.push_back({{"id", c.id},
                        {"name", c.name},
                        {"passed", c.passed},
                        {"advisory", c.advisory},
                        {"measured", c.measured}});
    return {{"name", rep.name},
            {"provenance", {{"config_hash", rep.config_hash}, {"version", rep.version}, {"seed", rep.seed}}},
            {"config", rep.config},
            {"runs", runs},
            {"criteria", crit},
            {"ok", rep.all_ok()}};
}

inline void write_report(const Report& rep, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path d(dir);
    io::write_file((d / "runs.csv").string(), runs_csv(rep));
    io::write_file((d / "diagnostics.csv").string(), diagnostics_csv(rep));
    io::write_file((d / "summary.json").string(), summary_json(rep).dump(2) + "\n");
}

/// Validates, runs every ladder level (concurrently, each run isolated) and
/// persists the report when an output directory is configured.
inline Report run(const ExperimentConfig& c, bool keep_trajectories = false) {
    validate(c);
    const Family fam = make_family(c);
    Report rep;
    rep.name = c.name;
    rep.config = to_json(c);
    rep.config_hash = config_hash(c);
    rep.seed = c.seed;
    rep.runs.resize(c.ladder.size());
    parallel_for(c.ladder.size(), worker_count(c.workers),
                 [&](std::size_t k) { rep.runs[k] = run_level(c, fam, k, keep_trajectories); });
    if (!c.out.empty()) write_report(rep, c.out);
    return rep;
}

// ---------------------------------------------------------------------------
// Convergence studies

enum class Reference { exact, finest };

struct StudyRow {
    int nx = 0, ny = 0, steps = 0;
    double linf = 0.0, weighted_l2 = 0.0, flux_linf = 0.0;
    double order_linf = std::numeric_limits<double>::quiet_NaN();
    double order_l2 = std::numeric_limits<double>::quiet_NaN();
};

struct StudyTable {
    Reference reference = Reference::exact;
    std::vector<StudyRow> rows;
    std::string error;
};

/// Errors at the final time per ladder level, against the exact solution or
/// against the finest level (sampled bilinearly at the coarse nodes; the
/// finest row is then omitted). Orders are log(e_k / e_{k+1}) / log(h_k / h_{k+1}).
inline StudyTable convergence_study(const ExperimentConfig& c, Reference ref) {
    validate(c);
    require(c.ladder.size() >= 3, "convergence study needs at least three ladder levels");
    const Family fam = make_family(c);
    if (ref == Reference::exact && !fam.exact)
        throw InvalidArgument("no exact reference for data '" + c.data.value("id", "") + "' with obstacle '" +
                              c.obstacle.value("id", "") + "'");
    std::vector<RunResult> runs(c.ladder.size());
    parallel_for(c.ladder.size(), worker_count(c.workers),
                 [&](std::size_t k) { runs[k] = run_level(c, fam, k, true); });
    StudyTable tab;
    tab.reference = ref;
    for (const auto& r : runs)
        if (!r.ok) throw Error("level " + std::to_string(r.level) + " failed: " + r.error);
    const std::size_t n = ref == Reference::exact ? runs.size() : runs.size() - 1;
    const Trajectory& fine = *runs.back().trajectory;
    const Field fine_u = fine.field(fine.snapshots.size() - 1);
    const FieldSampler fine_smp(fine_u, fine.grid->gamma());
    for (std::size_t k = 0; k < n; ++k) {
        const Trajectory& tr = *runs[k].trajectory;
        const Grid& g = *tr.grid;
        const auto& last = tr.snapshots.back();
        StudyRow row;
        row.nx = runs[k].nx;
        row.ny = runs[k].ny;
        row.steps = runs[k].steps;
        if (ref == Reference::exact) {
            const auto e = snapshot_errors(g, last, fam);
            if (c.obstacle.value("id", "") == "constant" && runs[k].metrics.value("contact_nodes", 0) > 0)
                throw InvalidArgument("exact reference assumes an inactive constraint, but contact occurred");
            row.linf = e.linf;
            row.weighted_l2 = e.weighted_l2;
            row.flux_linf = e.flux_linf;
        } else {
            double mass = 0.0;
            for (int j = 0; j <= g.ny(); ++j)
                for (int i = 0; i <= g.nx(); ++i) {
                    const double d = last.u[g.index(i, j)] - fine_smp(g.x(i), g.y(j)).value;
                    row.linf = std::max(row.linf, std::abs(d));
                    row.weighted_l2 += g.dual_measure(i, j) * d * d;
                    mass += g.dual_measure(i, j);
                }
            row.weighted_l2 = std::sqrt(row.weighted_l2 / mass);
            for (int i = 1; i < g.nx(); ++i)
                row.flux_linf = std::max(row.flux_linf, std::abs(last.flux[i] - lab::detail::row_at(*fine.grid, fine.snapshots.back().flux, g.x(i))));
        }
        tab.rows.push_back(row);
    }
    for (std::size_t k = 1; k < tab.rows.size(); ++k) {
        const double hr = std::log(static_cast<double>(tab.rows[k].nx) / tab.rows[k - 1].nx);
        auto order = [&](double a, double b) {
            return a > 0.0 && b > 0.0 ? std::log(a / b) / hr : std::numeric_limits<double>::quiet_NaN();
        };
        tab.rows[k].order_linf = order(tab.rows[k - 1].linf, tab.rows[k].linf);
        tab.rows[k].order_l2 = order(tab.rows[k - 1].weighted_l2, tab.rows[k].weighted_l2);
    }
    return tab;
}

inline std::string study_csv(const StudyTable& t) {
    std::string out = "nx,ny,steps,linf_error,weighted_l2_error,flux_linf_error,order_linf,order_weighted_l2\n";
    auto o = [](double v) { return std::isnan(v) ? std::string() : detail::num(v); };
    for (const auto& r : t.rows)
        out += std::to_string(r.nx) + "," + std::to_string(r.ny) + "," + std::to_string(r.steps) + "," +
               detail::num(r.linf) + "," + detail::num(r.weighted_l2) + "," + detail::num(r.flux_linf) + "," +
               o(r.order_linf) + "," + o(r.order_l2) + "\n";
    return out;
}

} // namespace fracsig::harness
