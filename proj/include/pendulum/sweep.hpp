#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "pendulum/connection.hpp"
#include "pendulum/cycle.hpp"
#include "pendulum/model.hpp"

// Grid drivers over the single-point analyses: the critical curve
// beta0(gamma), mean-velocity (depinning) curves, and phase-portrait
// bundles. Rows are computed independently and reduced in grid order, so
// output does not depend on the worker count.

namespace pendulum {

struct SweepRow {
    double gamma = std::numeric_limits<double>::quiet_NaN();
    double beta = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> beta0;
    double mean_velocity = 0.0;
    bool cycle_found = false;
    double bracket_width = std::numeric_limits<double>::quiet_NaN();
    int evaluations = 0;
    std::string error;   ///< empty when the row computed cleanly
};

namespace detail {

/// Index-sharded parallel loop; fn(i) must not throw. Each index is computed
/// exactly once by exactly one thread, so results are identical for any
/// worker count.
template <typename Fn>
void parallel_index(std::size_t n, int workers, Fn&& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (std::size_t t = 0; t < w; ++t) {
        pool.emplace_back([t, w, n, &fn] {
            for (std::size_t i = t; i < n; i += w) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace detail

/// One critical-drive row per damping value; per-row failures are recorded
/// in the row instead of aborting the sweep.
inline std::vector<SweepRow> critical_curve(std::span<const double> gammas, double tol,
                                            const IntegrationControls& controls,
                                            int workers = 1) {
    std::vector<SweepRow> rows(gammas.size());
    detail::parallel_index(gammas.size(), workers, [&](std::size_t i) {
        SweepRow& row = rows[i];
        row.gamma = gammas[i];
        try {
            const CriticalResult cr = critical_beta(gammas[i], tol, controls);
            row.beta0 = cr.beta0;
            row.bracket_width = cr.bracket_width;
            row.evaluations = cr.evaluations;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    });
    return rows;
}

enum class VelocityMode {
    Independent,   ///< each row answers "does the unique attracting cycle exist"
    UpSweep,       ///< continuation from the pinned state: depins only past beta = 1
    DownSweep,     ///< continuation from the running state: survives down to beta0
};

/// Mean-velocity rows over a drive grid at fixed damping. Pinned rows carry
/// velocity exactly 0. The sweep modes trace the hysteresis loop between
/// beta0 and 1 that the bistable window implies; they follow the grid in the
/// order given and are inherently sequential.
inline std::vector<SweepRow> velocity_curve(double gamma, std::span<const double> betas,
                                            double tol, const IntegrationControls& controls,
                                            int workers = 1,
                                            VelocityMode mode = VelocityMode::Independent) {
    if (!(gamma > 0.0)) throw DomainError("velocity_curve: gamma must be positive");
    std::vector<SweepRow> rows(betas.size());

    // One threshold computation serves every row that needs the gate.
    std::optional<double> beta0;
    std::string beta0_error;
    const bool need_gate =
        mode != VelocityMode::UpSweep &&
        std::ranges::any_of(betas, [](double b) { return b <= 1.0; });
    if (need_gate) {
        try {
            beta0 = critical_beta(gamma, tol, controls).beta0;
        } catch (const std::exception& e) {
            beta0_error = e.what();
        }
    }

    auto run_row = [&](std::size_t i, bool gate) {
        SweepRow& row = rows[i];
        row.gamma = gamma;
        row.beta = betas[i];
        row.beta0 = beta0;
        if (gate && betas[i] <= 1.0 && !beta0) {
            row.error = beta0_error.empty() ? "critical drive unavailable" : beta0_error;
            return;
        }
        try {
            const PeriodicOrbit orbit =
                find_limit_cycle(ModelParams(betas[i], gamma), tol, controls, beta0);
            row.mean_velocity = orbit.mean_velocity;
            row.cycle_found = true;
        } catch (const NoCycleError&) {
            // pinned: every trajectory ends in a sink
        } catch (const DegenerateCycleError&) {
            row.error = "degenerate: drive within tolerance of the critical value";
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    };

    switch (mode) {
    case VelocityMode::Independent:
        detail::parallel_index(betas.size(), workers, [&](std::size_t i) { run_row(i, true); });
        break;

    case VelocityMode::UpSweep: {
        // Pinned until the equilibria vanish; no threshold needed.
        for (std::size_t i = 0; i < betas.size(); ++i) {
            SweepRow& row = rows[i];
            row.gamma = gamma;
            row.beta = betas[i];
            if (betas[i] <= 1.0) continue;   // stays at the sink / saddle-node
            run_row(i, false);
        }
        break;
    }

    case VelocityMode::DownSweep: {
        // First row answers independently; afterwards the running state is
        // continued by warm-starting the map at the previous cycle height.
        std::optional<double> z_prev;
        for (std::size_t i = 0; i < betas.size(); ++i) {
            SweepRow& row = rows[i];
            row.gamma = gamma;
            row.beta = betas[i];
            row.beta0 = beta0;
            try {
                const ModelParams mp(betas[i], gamma);
                std::optional<double> z;
                if (i == 0 || !z_prev) {
                    if (betas[i] > 1.0 || (beta0 && betas[i] > *beta0 + tol))
                        z = probe_cycle(mp, tol, controls);
                } else {
                    z = iterate_to_fixed_point(*z_prev, mp, tol, controls);
                }
                if (z) {
                    const PoincareResult lap = poincare_map(*z, mp, controls);
                    if (lap.z) {
                        row.mean_velocity = 2.0 * pi / lap.transit_time;
                        row.cycle_found = true;
                        z_prev = *z;
                    } else {
                        z_prev.reset();
                    }
                } else {
                    z_prev.reset();
                }
            } catch (const std::exception& e) {
                row.error = e.what();
                z_prev.reset();
            }
        }
        break;
    }
    }
    return rows;
}

/// Trajectory bundle over the main window with the standard overlays.
struct PhasePortrait {
    double beta = 0.0;
    double gamma = 0.0;
    double phi_min = 0.0, phi_max = 0.0;    ///< main interval
    std::vector<TrajectorySegment> trajectories;   ///< one per seed
    std::vector<std::string> seed_errors;          ///< parallel; empty = clean
    std::vector<PhaseState> nullcline;             ///< curve G (gamma > 0 only)
    std::vector<FixedPoint> fixed_points;
    std::optional<ShootOutcome> separatrix_shot;
};

/// Integrate each seed until it is captured, leaves the window, or the span
/// runs out, and attach the nullcline, equilibria and separatrix overlays.
/// At beta = 1 the separatrix shot leaves the saddle-node along its neutral
/// direction, which is algebraically slow: shot_offset trades fidelity for
/// an attainable escape time.
inline PhasePortrait phase_portrait(const ModelParams& p, std::span<const PhaseState> seeds,
                                    const IntegrationControls& controls,
                                    double shot_offset = 1e-3) {
    PhasePortrait out;
    out.beta = p.beta;
    out.gamma = p.gamma;
    const double p0 = (p.beta <= 1.0) ? phi_zero(p) : 0.5 * pi;
    out.phi_min = -pi - p0;
    out.phi_max = pi - p0;

    out.fixed_points = equilibria(p, -1, 1);

    if (p.gamma > 0.0) {
        constexpr int n = 512;
        out.nullcline.reserve(n + 1);
        for (int i = 0; i <= n; ++i) {
            const double phi = out.phi_min + (out.phi_max - out.phi_min) * i / n;
            out.nullcline.push_back({phi, curve_g(phi, p)});
        }
    }

    if (p.beta <= 1.0) {
        try {
            out.separatrix_shot = shoot_unstable_manifold(p, shot_offset, controls);
        } catch (const std::exception&) {
            out.separatrix_shot.reset();
        }
    }

    EventSet ev;
    ev.lines.push_back({out.phi_min - 0.5, -1});
    ev.lines.push_back({out.phi_max + 0.5, +1});
    for (const auto& fp : out.fixed_points)
        if (fp.kind == FixedPointKind::Sink) ev.capture_targets.push_back(fp);

    out.trajectories.resize(seeds.size());
    out.seed_errors.resize(seeds.size());
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        try {
            out.trajectories[i] = integrate_time(seeds[i], p, controls, ev);
        } catch (const std::exception& e) {
            out.seed_errors[i] = e.what();
        }
    }
    return out;
}

} // namespace pendulum
