// fracsig: solve | diagnose | profile | study | accept
//
// Usage errors exit 2, runtime failures exit 1 with a one-line JSON error
// record on stderr.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fracsig/acceptance.hpp"
#include "fracsig/h_gamma.hpp"
#include "fracsig/harness.hpp"
#include "fracsig/profiles.hpp"
#include "fracsig/trajectory_io.hpp"
#include "fracsig/weighted_ops.hpp"

using json = nlohmann::json;
using namespace fracsig;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Flags {
    std::optional<double> s, gamma, eps, kappa;
    std::string grid, out;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
    int verbose = 0;
};

void add_model_flags(CLI::App* cmd, Flags& f, bool with_scheme) {
    auto* s = cmd->add_option("--s", f.s, "fractional order s in (0, 1)");
    auto* g = cmd->add_option("--gamma", f.gamma, "weight exponent gamma = 1 - 2s");
    s->excludes(g);
    g->excludes(s);
    cmd->add_option("--grid", f.grid, "grid as NX or NXxNY (NY defaults to NX/2)");
    if (with_scheme) {
        cmd->add_option("--eps", f.eps, "penalty parameter eps (scheme.eps)");
        cmd->add_option("--kappa", f.kappa, "penalty scale kappa (scheme.kappa)");
    }
    cmd->add_option("--out", f.out, with_scheme ? "output directory" : "output CSV file (default: stdout)");
    cmd->add_option("--seed", f.seed, "seed for randomized audits");
    cmd->add_flag("-v,--verbose", f.verbose, "progress on stderr");
}

std::pair<int, int> parse_grid(const std::string& text) {
    try {
        std::size_t pos = 0;
        const int nx = std::stoi(text, &pos);
        int ny = nx / 2;
        if (pos < text.size()) {
            if (text[pos] != 'x' && text[pos] != 'X') throw UsageError("");
            std::size_t p2 = 0;
            ny = std::stoi(text.substr(pos + 1), &p2);
            if (pos + 1 + p2 != text.size()) throw UsageError("");
        }
        if (nx < 2 || ny < 2) throw UsageError("");
        return {nx, ny};
    } catch (const std::exception&) {
        throw UsageError("--grid expects NX or NXxNY with NX, NY >= 2, got '" + text + "'");
    }
}

json load_json(const std::string& path) {
    if (!std::filesystem::exists(path)) throw UsageError("config file '" + path + "' does not exist");
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file '" + path + "'");
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw UsageError("config file '" + path + "' is not a JSON object");
    return j;
}

double s_from(const Flags& f, double fallback) {
    if (f.s) return *f.s;
    if (f.gamma) return 0.5 * (1.0 - *f.gamma);
    return fallback;
}

/// Config file + flags + --set overrides. Keys are checked against the
/// canonical (default-filled) document, so every override names a real key.
harness::ExperimentConfig build_config(const std::string& path, const Flags& f, int ladder_levels) {
    try {
        json doc = harness::to_json(harness::config_from_json(load_json(path)));
        if (f.s || f.gamma) doc["s"] = s_from(f, 0.5);
        if (!f.grid.empty()) {
            auto [nx, ny] = parse_grid(f.grid);
            json ladder = json::array();
            for (int k = 0; k < ladder_levels; ++k) ladder.push_back({nx << k, ny << k, 0});
            doc["grid"]["ladder"] = ladder;
        }
        if (f.eps) doc["scheme"]["eps"] = *f.eps;
        if (f.kappa) doc["scheme"]["kappa"] = *f.kappa;
        if (!f.out.empty()) doc["out"] = f.out;
        if (f.seed) doc["seed"] = *f.seed;
        for (const auto& a : f.sets) harness::apply_override(doc, a);
        auto c = harness::config_from_json(doc);
        harness::validate(c);
        return c;
    } catch (const InvalidArgument& e) {
        throw UsageError(path + ": " + e.what());
    }
}

void emit(const std::string& out_dir, const std::string& name, const std::string& text) {
    if (out_dir.empty()) {
        std::cout << text;
        return;
    }
    std::filesystem::create_directories(out_dir);
    io::write_file((std::filesystem::path(out_dir) / name).string(), text);
}

int cmd_solve(const std::string& path, Flags f) {
    auto c = build_config(path, f, 1);
    if (c.ladder.size() > 1) c.ladder = {c.ladder.back()};
    c.save_snapshots = !c.out.empty();
    if (f.verbose) std::cerr << "solving " << c.name << " on " << c.ladder[0].nx << "x" << c.ladder[0].ny << "\n";
    const auto rep = harness::run(c);
    std::cout << harness::summary_json(rep).dump(2) << "\n";
    if (!rep.runs[0].ok) throw Error(rep.runs[0].error);
    return 0;
}

int cmd_study(const std::string& path, Flags f, const std::string& reference) {
    harness::Reference ref;
    if (reference == "exact") ref = harness::Reference::exact;
    else if (reference == "finest") ref = harness::Reference::finest;
    else throw UsageError("--reference must be exact or finest");
    const auto c = build_config(path, f, 3);
    if (c.ladder.size() < 3) throw UsageError(path + ": a study needs a ladder of at least three levels");
    harness::StudyTable tab;
    try {
        tab = harness::convergence_study(c, ref);
    } catch (const InvalidArgument& e) {
        throw UsageError(path + ": " + e.what());
    }
    emit(c.out, "study.csv", harness::study_csv(tab));
    return 0;
}

int cmd_diagnose(const std::string& dir, Flags f, const std::string& config) {
    json diags = json::array({{{"kind", "growth"}},
                              {{"kind", "flux"}},
                              {{"kind", "density"}},
                              {{"kind", "time_decay"}},
                              {{"kind", "blowup"}},
                              {{"kind", "free_boundary"}}});
    if (!config.empty()) {
        const json j = load_json(config);
        if (!j.contains("diagnostics") || !j.at("diagnostics").is_array())
            throw UsageError("'" + config + "' has no diagnostics list");
        diags = j.at("diagnostics");
    }
    for (const auto& d : diags) {
        if (!d.is_object() || !d.contains("kind") || !d.at("kind").is_string())
            throw UsageError("each diagnostic needs a kind");
        const auto& k = harness::diagnostic_kinds();
        if (std::find(k.begin(), k.end(), d.at("kind").get<std::string>()) == k.end())
            throw UsageError("unknown diagnostic '" + d.at("kind").get<std::string>() + "'");
    }
    if (!std::filesystem::exists(std::filesystem::path(dir) / "manifest.json"))
        throw UsageError("'" + dir + "' is not a saved trajectory (no manifest.json)");
    const Trajectory tr = io::load_trajectory(dir);
    harness::Report rep;
    rep.name = "diagnose " + dir;
    rep.config = {{"trajectory", dir}, {"diagnostics", diags}};
    rep.config_hash = harness::config_hash(harness::ExperimentConfig{});
    harness::RunResult run;
    run.ok = true;
    run.nx = tr.grid->nx();
    run.ny = tr.grid->ny();
    run.steps = static_cast<int>(tr.snapshots.size()) - 1;
    for (const auto& d : diags) {
        if (f.verbose) std::cerr << "diagnostic " << d.at("kind").get<std::string>() << "\n";
        run.diagnostics.push_back(harness::run_diagnostic(tr, d));
    }
    rep.runs.push_back(std::move(run));
    if (!f.out.empty()) harness::write_report(rep, f.out);
    std::cout << harness::summary_json(rep).dump(2) << "\n";
    return 0;
}

int cmd_profile(Flags f, const std::string& kind, double t, double omega) {
    const double s = s_from(f, 0.5);
    if (!(s > 0.0 && s < 1.0)) throw UsageError("s must lie in (0, 1) (gamma in (-1, 1))");
    const auto [nx, ny] = parse_grid(f.grid.empty() ? "64" : f.grid);
    const double gamma = 1.0 - 2.0 * s;
    std::string csv;
    char buf[128];
    if (kind == "u0") {
        SignoriniProfile p;
        p.s = s;
        p.omega = omega;
        csv = "x,y,u0\n";
        for (int j = 0; j <= ny; ++j)
            for (int i = 0; i <= nx; ++i) {
                const double x = -1.0 + 2.0 * i / nx, y = static_cast<double>(j) / ny;
                std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", x, y, eval_profile(p, x, y, t));
                csv += buf;
            }
    } else if (kind == "G") {
        if (!(t > 0.0)) throw UsageError("--t must be positive for the heat kernel");
        const auto k = make_heat_kernel(2, gamma);
        csv = "x,y,G\n";
        for (int j = 0; j <= ny; ++j)
            for (int i = 0; i <= nx; ++i) {
                const double x = -2.0 + 4.0 * i / nx, y = 2.0 * j / ny;
                std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", x, y, eval_G_gamma(x, y, t, k));
                csv += buf;
            }
    } else if (kind == "h") {
        const double zmax = 10.0;
        const auto h = solve_h_gamma(gamma, zmax);
        csv = "z,h\n";
        for (int i = 0; i <= nx; ++i) {
            const double z = zmax * i / nx;
            std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", z, h(z));
            csv += buf;
        }
    } else {
        throw UsageError("--kind must be u0, G or h");
    }
    if (f.out.empty()) std::cout << csv;
    else {
        const std::filesystem::path p(f.out);
        if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
        io::write_file(f.out, csv);
    }
    return 0;
}

int cmd_accept(Flags f, const std::string& suite) {
    if (suite != "primary") throw UsageError("unknown suite '" + suite + "' (available: primary)");
    acceptance::SuiteOptions o;
    if (f.seed) o.seed = *f.seed;
    acceptance::Suite s(o);
    bool ok = true;
    harness::Report rep;
    rep.name = "acceptance";
    rep.seed = o.seed;
    rep.criteria = s.run_all([&](const harness::CriterionResult& r) {
        std::cout << acceptance::format_line(r) << std::endl;
        if (!r.passed && !r.advisory) ok = false;
    });
    std::cout << "acceptance: " << (ok ? "PASS" : "FAIL") << "\n";
    if (!f.out.empty()) {
        std::filesystem::create_directories(f.out);
        io::write_file((std::filesystem::path(f.out) / "acceptance.json").string(),
                       harness::summary_json(rep).dump(2) + "\n");
    }
    return ok ? 0 : 1;
}

void error_line(const char* kind, const std::string& command, const std::string& message) {
    std::cerr << "fracsig: error: " << json{{"kind", kind}, {"command", command}, {"message", message}}.dump() << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fracsig: thin obstacle problems for the fractional heat operator"};
    app.require_subcommand(1);
    Flags f;
    std::string path, reference = "exact", kind = "u0", diag_config, suite = "primary";
    double t = 0.0, omega = 0.0;

    auto* solve = app.add_subcommand("solve", "run one trajectory from a JSON config");
    solve->add_option("config", path, "experiment config (JSON)")->required();
    add_model_flags(solve, f, true);
    solve->add_option("--set", f.sets, "override a config key: dotted.key=value");

    auto* diagnose = app.add_subcommand("diagnose", "run diagnostics on a saved trajectory");
    diagnose->add_option("trajectory", path, "trajectory directory written by solve")->required();
    diagnose->add_option("--config", diag_config, "JSON file with a diagnostics list");
    diagnose->add_option("--out", f.out, "output directory");
    diagnose->add_flag("-v,--verbose", f.verbose, "progress on stderr");

    auto* profile = app.add_subcommand("profile", "tabulate closed forms (u0, G, h) as CSV");
    add_model_flags(profile, f, false);
    profile->add_option("--kind", kind, "u0 | G | h");
    profile->add_option("--t", t, "time (u0 shift, or G evaluation time)");
    profile->add_option("--omega", omega, "travelling speed for u0");

    auto* study = app.add_subcommand("study", "convergence ladder from a JSON config");
    study->add_option("config", path, "experiment config (JSON)")->required();
    add_model_flags(study, f, true);
    study->add_option("--set", f.sets, "override a config key: dotted.key=value");
    study->add_option("--reference", reference, "exact | finest");

    auto* accept = app.add_subcommand("accept", "run the acceptance suite");
    accept->add_option("--suite", suite, "suite name (primary)");
    accept->add_option("--out", f.out, "output directory");
    accept->add_option("--seed", f.seed, "seed for randomized checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        if (command == "profile" && f.grid.empty()) f.grid = "64";
        if (command == "solve") return cmd_solve(path, f);
        if (command == "study") return cmd_study(path, f, reference);
        if (command == "diagnose") return cmd_diagnose(path, f, diag_config);
        if (command == "profile") return cmd_profile(f, kind, t, omega);
        if (command == "accept") return cmd_accept(f, suite);
    } catch (const UsageError& e) {
        error_line("usage", command, e.what());
        return 2;
    } catch (const std::exception& e) {
        error_line("runtime", command, e.what());
        return 1;
    }
    return 2;
}
