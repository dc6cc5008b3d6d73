#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "pendulum/connection.hpp"
#include "pendulum/integrate.hpp"
#include "pendulum/model.hpp"

// Poincare return map on the cylinder (section at fixed phi, return after
// 2*pi) and the unique positive rotational limit cycle above the critical
// drive. The map contracts with the exact factor exp(-gamma * T), which the
// solver exploits and the diagnostics re-measure.

namespace pendulum {

/// No rotational cycle exists at these parameters (drive below threshold).
/// Carries the last observed fall to the axis as evidence.
struct NoCycleError : std::runtime_error {
    NoCycleError(const std::string& what, TrajectorySegment ev)
        : std::runtime_error(what), evidence(std::move(ev)) {}
    TrajectorySegment evidence;
};

/// The drive sits within tolerance of the critical value: the limiting
/// trajectory is a saddle connection, not a cycle.
struct DegenerateCycleError : std::runtime_error {
    DegenerateCycleError(const std::string& what, double beta0_)
        : std::runtime_error(what), beta0(beta0_) {}
    double beta0;
};

/// Section angle: through the left saddle while equilibria exist, phi = 0
/// otherwise.
inline double section_phi(const ModelParams& p) {
    return (p.beta <= 1.0) ? -pi - phi_zero(p) : 0.0;
}

struct PoincareResult {
    /// z after one lap of the cylinder; empty if the trajectory fell to the
    /// axis floor first.
    std::optional<double> z;
    double transit_time = 0.0;   ///< time for the traversed arc
    double z_integral = 0.0;     ///< integral of z dphi over the traversed arc
    TrajectorySegment path;
};

/// One application of the section-to-section map from height z0 > 0.
inline PoincareResult poincare_map(double z0, const ModelParams& p,
                                   const IntegrationControls& controls,
                                   SampleMode mode = SampleMode::Endpoints) {
    if (!(z0 > 0.0)) throw DomainError("poincare_map: z0 must be positive");
    const double s = section_phi(p);
    TrajectorySegment seg = integrate_graph(z0, s, s + 2.0 * pi, p, controls,
                                            default_z_floor, mode);
    PoincareResult r;
    const auto& last = terminal_sample(seg);
    r.transit_time = last.time;
    r.z_integral = seg.z_integral;
    if (std::holds_alternative<SpanExhausted>(seg.terminal)) r.z = last.state.z;
    r.path = std::move(seg);
    return r;
}

/// Iterate the return map from z0 until successive heights differ by less
/// than the contraction-adjusted tolerance. Empty if an iterate falls to the
/// axis (no cycle reachable from z0).
inline std::optional<double> iterate_to_fixed_point(double z0, const ModelParams& p,
                                                    double tol,
                                                    const IntegrationControls& controls,
                                                    int max_laps = 2000,
                                                    TrajectorySegment* last_path = nullptr) {
    if (!(tol > 0.0)) throw DomainError("iterate_to_fixed_point: tol must be positive");
    double z = z0;
    double prev_delta = std::numeric_limits<double>::infinity();
    for (int lap = 0; lap < max_laps; ++lap) {
        PoincareResult r = poincare_map(z, p, controls,
                                        last_path ? SampleMode::Steps : SampleMode::Endpoints);
        if (last_path) *last_path = std::move(r.path);
        if (!r.z) return std::nullopt;
        const double delta = std::abs(*r.z - z);
        z = *r.z;
        if (lap > 0) {
            // distance to the fixed point is bounded by delta * c/(1-c)
            const double c = std::min(delta / prev_delta, 0.999);
            if (delta * std::max(c / (1.0 - c), 0.05) <= tol) return z;
        }
        prev_delta = std::max(delta, 1e-300);
    }
    // Contraction exp(-gamma*T) < 1 makes a stall unreachable in exact
    // arithmetic; fall back to bisection on the residual P(z) - z if it
    // happens anyway. A fall to the axis counts as "fixed point is above".
    auto residual_positive = [&](double zq) -> std::optional<bool> {
        PoincareResult r = poincare_map(zq, p, controls);
        if (!r.z) return true;
        const double f = *r.z - zq;
        if (f == 0.0) return std::nullopt;   // landed exactly
        return f > 0.0;
    };
    double lo = z, hi = z;
    auto s0 = residual_positive(z);
    if (!s0) return z;
    if (*s0) {
        for (int k = 0; k < 60; ++k) {
            hi *= 2.0;
            auto s = residual_positive(hi);
            if (!s) return hi;
            if (!*s) break;
            lo = hi;
        }
    } else {
        for (int k = 0; k < 60; ++k) {
            lo *= 0.5;
            auto s = residual_positive(lo);
            if (!s) return lo;
            if (*s) break;
            hi = lo;
        }
    }
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        auto s = residual_positive(mid);
        if (!s) return mid;
        if (*s)
            lo = mid;
        else
            hi = mid;
    }
    // A basin edge can masquerade as a bracket when no fixed point exists;
    // accept the result only if it really closes up.
    const double zf = 0.5 * (lo + hi);
    PoincareResult rf = poincare_map(zf, p, controls);
    if (!rf.z || std::abs(*rf.z - zf) > 10.0 * tol) return std::nullopt;
    return zf;
}

/// Fixed point of the return map reached from the trapping line
/// z = (beta+1)/gamma, with no existence gate: empty means every iterate
/// fell to the axis, i.e. no rotational cycle at these parameters.
inline std::optional<double> probe_cycle(const ModelParams& p, double tol,
                                         const IntegrationControls& controls,
                                         TrajectorySegment* last_path = nullptr) {
    if (!(p.gamma > 0.0)) throw DomainError("probe_cycle: gamma must be positive");
    const double z_high = (p.beta + 1.0) / p.gamma;
    return iterate_to_fixed_point(z_high, p, tol, controls, 2000, last_path);
}

struct PeriodicOrbit {
    std::vector<PhaseState> samples;   ///< z_T on a uniform phi grid, both endpoints
    double z_start = 0.0;              ///< fixed point of the return map
    double period_T = 0.0;             ///< time per lap
    double mean_velocity = 0.0;        ///< 2*pi / period_T
    double phase_integral = 0.0;       ///< integral of z dphi over one lap
    double contraction = 0.0;          ///< measured return-map derivative
    double section = 0.0;              ///< section angle
    int map_iterations = 0;
};

inline constexpr int default_orbit_grid = 256;

/// Locate the rotational limit cycle for drives above critical.
///
/// For beta <= 1 the existence gate compares against the critical drive
/// (computed here unless the caller already knows it): below threshold
/// throws NoCycleError with the falling trajectory attached, within tol of
/// threshold throws DegenerateCycleError. The fixed point is then reached by
/// iterating the map down from the trapping line.
inline PeriodicOrbit find_limit_cycle(const ModelParams& p, double tol,
                                      const IntegrationControls& controls,
                                      std::optional<double> known_beta0 = std::nullopt,
                                      int grid = default_orbit_grid) {
    if (!(p.gamma > 0.0)) throw DomainError("find_limit_cycle: gamma must be positive");
    if (!(tol > 0.0)) throw DomainError("find_limit_cycle: tol must be positive");
    if (grid < 8) throw DomainError("find_limit_cycle: grid too coarse");

    if (p.beta <= 1.0) {
        const double beta0 =
            known_beta0 ? *known_beta0 : critical_beta(p.gamma, tol, controls).beta0;
        if (std::abs(p.beta - beta0) < tol)
            throw DegenerateCycleError(
                "find_limit_cycle: drive within tolerance of the critical value "
                "(pseudo-periodic boundary)",
                beta0);
        if (p.beta < beta0) {
            TrajectorySegment evidence;
            (void)probe_cycle(p, tol, controls, &evidence);
            throw NoCycleError("find_limit_cycle: no rotational cycle below the "
                               "critical drive (beta0 = " +
                                   std::to_string(beta0) + ")",
                               std::move(evidence));
        }
    }

    PeriodicOrbit orbit;
    orbit.section = section_phi(p);

    const double z_high = (p.beta + 1.0) / p.gamma;
    double z = z_high;
    int iters = 0;
    {
        double prev_delta = std::numeric_limits<double>::infinity();
        for (; iters < 2000; ++iters) {
            PoincareResult r = poincare_map(z, p, controls);
            if (!r.z) {
                TrajectorySegment evidence = std::move(r.path);
                throw NoCycleError(
                    "find_limit_cycle: map iterate fell to the axis", std::move(evidence));
            }
            const double delta = std::abs(*r.z - z);
            z = *r.z;
            if (iters > 0) {
                const double c = std::min(delta / prev_delta, 0.999);
                if (delta * std::max(c / (1.0 - c), 0.05) <= tol) break;
            }
            prev_delta = std::max(delta, 1e-300);
        }
    }
    orbit.z_start = z;
    orbit.map_iterations = iters + 1;

    // one clean lap for the exact diagnostics
    PoincareResult lap = poincare_map(z, p, controls);
    if (!lap.z) throw NoCycleError("find_limit_cycle: converged height fell on re-lap",
                                   std::move(lap.path));
    orbit.period_T = lap.transit_time;
    orbit.mean_velocity = 2.0 * pi / lap.transit_time;
    orbit.phase_integral = lap.z_integral;

    // measured return-map derivative (central difference)
    {
        const double h = std::max(1e-3 * z, 1e-6);
        const PoincareResult up = poincare_map(z + h, p, controls);
        const PoincareResult dn = poincare_map(z - h, p, controls);
        if (up.z && dn.z) orbit.contraction = (*up.z - *dn.z) / (2.0 * h);
    }

    // sample onto the uniform grid by chaining short graph arcs
    orbit.samples.reserve(static_cast<std::size_t>(grid) + 1);
    orbit.samples.push_back({orbit.section, z});
    double zk = z;
    const double dphi = 2.0 * pi / grid;
    for (int k = 1; k <= grid; ++k) {
        const double a = orbit.section + (k - 1) * dphi;
        const double b = orbit.section + k * dphi;
        TrajectorySegment arc = integrate_graph(zk, a, b, p, controls, default_z_floor,
                                                SampleMode::Endpoints);
        if (!std::holds_alternative<SpanExhausted>(arc.terminal))
            throw NoCycleError("find_limit_cycle: orbit sampling fell to the axis",
                               std::move(arc));
        zk = terminal_sample(arc).state.z;
        orbit.samples.push_back({b, zk});
    }
    return orbit;
}

/// Report for the absence-of-contractible-cycles check: the field divergence
/// is the constant -gamma, and trajectories seeded around each sink spiral
/// inward with a non-increasing turning-point envelope.
struct FirstKindCycleCheck {
    double divergence = 0.0;
    bool vacuous = false;        ///< no sinks exist (beta >= 1)
    int orbits_checked = 0;
    bool orbits_decay = true;
    bool pass = false;
};

inline FirstKindCycleCheck verify_no_first_kind_cycle(const ModelParams& p,
                                                      const IntegrationControls& controls) {
    if (!(p.gamma > 0.0))
        throw DomainError("verify_no_first_kind_cycle: gamma must be positive");

    FirstKindCycleCheck rep;
    rep.divergence = -p.gamma;

    const auto sinks = equilibria(p, 0, 0);
    if (sinks.empty() || sinks[0].kind != FixedPointKind::Sink) {
        rep.vacuous = true;
        rep.pass = rep.divergence < 0.0;
        return rep;
    }
    const FixedPoint& sink = sinks[0];

    const double r0 = 0.05;   // inside the linearization neighbourhood
    const double angles[4] = {0.0, 0.5 * pi, pi, 1.5 * pi};
    for (double a : angles) {
        const PhaseState seed{sink.phi + r0 * std::cos(a), r0 * std::sin(a)};
        EventSet ev;
        ev.capture_targets = {sink};
        TrajectorySegment seg = integrate_time(seed, p, controls, ev, SampleMode::Steps);
        ++rep.orbits_checked;

        const bool captured = std::holds_alternative<EquilibriumCapture>(seg.terminal);
        // turning points of the distance to the sink must not grow
        double prev_peak = std::numeric_limits<double>::infinity();
        bool decays = true;
        const auto& s = seg.samples;
        auto dist = [&sink](const TrajectorySample& t) {
            return std::hypot(t.state.phi - sink.phi, t.state.z);
        };
        for (std::size_t i = 1; i + 1 < s.size(); ++i) {
            const double d = dist(s[i]);
            if (d > dist(s[i - 1]) && d >= dist(s[i + 1])) {
                if (d > prev_peak * (1.0 + 1e-9) + 1e-12) decays = false;
                prev_peak = d;
            }
        }
        if (!captured || !decays) rep.orbits_decay = false;
    }
    rep.pass = rep.divergence < 0.0 && rep.orbits_decay;
    return rep;
}

} // namespace pendulum
