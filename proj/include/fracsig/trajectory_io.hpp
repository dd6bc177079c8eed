#pragma once

// Trajectories on disk: a directory with
//
//   grid.bin            the grid blob
//   snap_NNNNN.bin      one blob per snapshot (grid header + time, arrays
//                       u, flux, contact, obstacle)
//   manifest.json       {times, files, scheme, tolerances, problem}

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "fracsig/grid_io.hpp"
#include "fracsig/trajectory.hpp"

namespace fracsig::io {

inline json scheme_json(const Scheme& s) {
    return {{"kind", to_string(s.kind)},
            {"inner", to_string(s.inner)},
            {"eps", s.penalty.eps},
            {"kappa", s.penalty.kappa},
            {"relaxation", s.relaxation}};
}

inline json tolerances_json(const Scheme& s) {
    return {{"comp_tol", s.comp_tol}, {"max_iters", s.max_iters}, {"max_sweeps", s.max_sweeps}};
}

inline Blob snapshot_blob(const Grid& g, const Snapshot& sn) {
    Blob b;
    b.header = grid_header(g);
    b.header["format"] = "fracsig-snapshot";
    b.header["time"] = sn.time;
    b.arrays.emplace_back("x_nodes", g.x_nodes());
    b.arrays.emplace_back("y_nodes", g.y_nodes());
    b.arrays.emplace_back("u", sn.u);
    b.arrays.emplace_back("flux", sn.flux);
    b.arrays.emplace_back("contact", std::vector<double>(sn.contact.begin(), sn.contact.end()));
    b.arrays.emplace_back("obstacle", sn.obstacle);
    return b;
}

inline Snapshot snapshot_from_blob(const Blob& b, const Grid& g) {
    Snapshot sn;
    sn.time = b.header.at("time").get<double>();
    sn.u = b.array("u");
    sn.flux = b.array("flux");
    for (double c : b.array("contact")) sn.contact.push_back(c != 0.0 ? 1 : 0);
    sn.obstacle = b.array("obstacle");
    if (sn.u.size() != g.node_count() || sn.flux.size() != static_cast<std::size_t>(g.nodes_x()) ||
        sn.contact.size() != sn.flux.size() || sn.obstacle.size() != sn.flux.size())
        throw Error("snapshot arrays do not match the grid");
    return sn;
}

inline std::string snapshot_name(std::size_t k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "snap_%05zu.bin", k);
    return buf;
}

inline void save_trajectory(const std::string& dir, const Trajectory& tr, const json& problem = json::object()) {
    namespace fs = std::filesystem;
    require(!tr.empty(), "trajectory is empty");
    fs::create_directories(dir);
    save_grid((fs::path(dir) / "grid.bin").string(), *tr.grid);
    json times = json::array(), files = json::array();
    for (std::size_t k = 0; k < tr.snapshots.size(); ++k) {
        const std::string name = snapshot_name(k);
        write_file((fs::path(dir) / name).string(), encode(snapshot_blob(*tr.grid, tr.snapshots[k])));
        times.push_back(tr.snapshots[k].time);
        files.push_back(name);
    }
    json m = {{"format", "fracsig-trajectory"},
              {"version", 1},
              {"s", tr.s},
              {"gamma", tr.gamma()},
              {"grid", "grid.bin"},
              {"times", times},
              {"files", files},
              {"scheme", scheme_json(tr.settings)},
              {"tolerances", tolerances_json(tr.settings)},
              {"problem", problem}};
    m["scheme"]["kind"] = tr.scheme;
    m["problem"]["description"] = tr.description;
    write_file((fs::path(dir) / "manifest.json").string(), m.dump(2) + "\n");
}

inline Trajectory load_trajectory(const std::string& dir) {
    namespace fs = std::filesystem;
    const auto path = fs::path(dir) / "manifest.json";
    if (!fs::exists(path)) throw Error("no trajectory manifest at '" + path.string() + "'");
    json m;
    try {
        m = json::parse(read_file(path.string()));
    } catch (const json::exception& e) {
        throw Error("cannot parse '" + path.string() + "': " + e.what());
    }
    if (m.value("format", "") != "fracsig-trajectory") throw Error("'" + path.string() + "' is not a trajectory manifest");
    Trajectory tr;
    tr.grid = load_grid((fs::path(dir) / m.at("grid").get<std::string>()).string());
    tr.s = m.at("s").get<double>();
    tr.scheme = m.at("scheme").value("kind", "");
    tr.description = m.at("problem").value("description", "");
    const auto& sc = m.at("scheme");
    const auto& tol = m.at("tolerances");
    tr.settings.kind = tr.scheme == "penalized" ? SchemeKind::penalized : SchemeKind::projected;
    tr.settings.inner = sc.value("inner", "active_set") == "psor" ? InnerSolver::psor : InnerSolver::active_set;
    tr.settings.penalty.eps = sc.value("eps", tr.settings.penalty.eps);
    tr.settings.penalty.kappa = sc.value("kappa", tr.settings.penalty.kappa);
    tr.settings.relaxation = sc.value("relaxation", tr.settings.relaxation);
    tr.settings.comp_tol = tol.value("comp_tol", tr.settings.comp_tol);
    tr.settings.max_iters = tol.value("max_iters", tr.settings.max_iters);
    tr.settings.max_sweeps = tol.value("max_sweeps", tr.settings.max_sweeps);
    const auto& files = m.at("files");
    for (const auto& f : files) {
        const Blob b = decode(read_file((fs::path(dir) / f.get<std::string>()).string()));
        tr.snapshots.push_back(snapshot_from_blob(b, *tr.grid));
    }
    if (std::abs(tr.gamma() - tr.grid->gamma()) > 1e-12) throw Error("manifest s does not match the grid gamma");
    return tr;
}

} // namespace fracsig::io
