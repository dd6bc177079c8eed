#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "fracsig/error.hpp"
#include "fracsig/mesh.hpp"
#include "fracsig/obstacle_solver.hpp"

namespace fracsig {

/// One stored time level.
struct Snapshot {
    double time = 0.0;
    std::vector<double> u;               // nodal values
    std::vector<double> flux;            // thin-row w
    std::vector<std::uint8_t> contact;   // thin-row coincidence indicator
    std::vector<double> obstacle;        // thin-row psi
};

/// Time-ordered snapshots on one grid.
struct Trajectory {
    GridPtr grid;
    double s = 0.5;
    std::string scheme;
    Scheme settings;  // full scheme parameters when produced by the solver
    std::string description;
    std::vector<Snapshot> snapshots;

    double gamma() const { return 1.0 - 2.0 * s; }
    bool empty() const { return snapshots.empty(); }
    double t_begin() const { return snapshots.front().time; }
    double t_end() const { return snapshots.back().time; }

    void push(const SolverState& st) {
        snapshots.push_back({st.time(), st.u.values, st.flux, st.contact, st.obstacle});
    }

    Field field(std::size_t k) const { return Field(grid, snapshots.at(k).u, snapshots.at(k).time); }

    /// Index of the snapshot closest in time to t.
    std::size_t nearest(double t) const {
        require(!snapshots.empty(), "trajectory is empty");
        auto it = std::lower_bound(snapshots.begin(), snapshots.end(), t,
                                   [](const Snapshot& s, double v) { return s.time < v; });
        if (it == snapshots.end()) return snapshots.size() - 1;
        std::size_t k = static_cast<std::size_t>(it - snapshots.begin());
        if (k > 0 && std::abs(snapshots[k - 1].time - t) <= std::abs(snapshots[k].time - t)) --k;
        return k;
    }
};

/// Builds a trajectory by sampling closed forms; the flux and contact rows
/// are supplied by the caller's functions.
template <class U, class W, class Psi>
Trajectory sample_trajectory(const GridPtr& grid, double s, const std::vector<double>& times, U&& u, W&& w,
                             Psi&& psi) {
    Trajectory tr;
    tr.grid = grid;
    tr.s = s;
    tr.scheme = "closed_form";
    for (double t : times) {
        Snapshot snap;
        snap.time = t;
        snap.u.resize(grid->node_count());
        for (int j = 0; j < grid->nodes_y(); ++j)
            for (int i = 0; i < grid->nodes_x(); ++i) snap.u[grid->index(i, j)] = u(grid->x(i), grid->y(j), t);
        snap.flux.resize(grid->nodes_x());
        snap.contact.resize(grid->nodes_x());
        snap.obstacle.resize(grid->nodes_x());
        for (int i = 0; i < grid->nodes_x(); ++i) {
            snap.flux[i] = w(grid->x(i), t);
            snap.obstacle[i] = psi(grid->x(i), t);
            snap.contact[i] = snap.u[grid->index(i, 0)] <= snap.obstacle[i] ? 1 : 0;
        }
        tr.snapshots.push_back(std::move(snap));
    }
    return tr;
}

/// Uniform backward-Euler schedule.
struct TimeSchedule {
    double T = 1.0;
    int steps = 16;
    int output_every = 1;
};

/// Runs the stepper over the schedule and records every `output_every`-th
/// state (plus the initial and final ones). Step failures are rethrown
/// with the time at which they happened.
inline Trajectory solve(const ObstacleProblem& problem, const GridPtr& grid, const Scheme& scheme,
                        const TimeSchedule& schedule) {
    require(schedule.steps >= 1 && schedule.T > 0.0, "schedule needs T > 0 and at least one step");
    require(schedule.output_every >= 1, "output_every must be >= 1");
    ObstacleStepper stepper(grid, problem, scheme);
    Trajectory tr;
    tr.grid = grid;
    tr.s = problem.s;
    tr.scheme = to_string(scheme.kind);
    tr.settings = scheme;
    tr.description = problem.description;
    SolverState st = stepper.initial_state();
    tr.push(st);
    const double dt = schedule.T / schedule.steps;
    for (int n = 1; n <= schedule.steps; ++n) {
        try {
            st = stepper.step(st, dt);
        } catch (const Error& e) {
            std::ostringstream os;
            os << "step " << n << " (t = " << n * dt << "): " << e.what();
            throw Error(os.str());
        }
        st.u.time = n * dt;  // avoid drift from repeated addition
        if (n % schedule.output_every == 0 || n == schedule.steps) tr.push(st);
    }
    return tr;
}

} // namespace fracsig
