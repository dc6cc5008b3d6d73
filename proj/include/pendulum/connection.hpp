#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "pendulum/integrate.hpp"
#include "pendulum/model.hpp"

// Shooting along the unstable manifold of the left saddle and bisection on
// the drive to locate the saddle-connection threshold beta0(gamma), plus the
// smallest damping for which the threshold saturates at 1.

namespace pendulum {

enum class ShootKind {
    HitAxis,     ///< came down to z = 0 (or spiralled into the sink): subcritical
    HitLineK1,   ///< crossed the vertical line through the right saddle: supercritical
    HitSaddle,   ///< entered the capture disc of the right saddle: on the connection
};

struct ShootOutcome {
    ShootKind kind = ShootKind::HitAxis;
    double phi_c = std::numeric_limits<double>::quiet_NaN();   ///< HitAxis landing angle
    double z_c = std::numeric_limits<double>::quiet_NaN();     ///< HitLineK1 crossing height
    TrajectorySegment trajectory;
};

/// Default displacement along the unstable eigenvector for manifold shots.
/// The eigendirection is exact, so the transverse error is O(offset^2).
inline constexpr double default_shoot_offset = 1e-7;

/// Launch the trajectory leaving the saddle at phi = -pi - arcsin(beta) into
/// the upper half-plane and classify its fate.
///
/// Requires 0 <= beta <= 1 (at beta = 1 the saddle-node is shot along its
/// neutral direction, slope 0). gamma = 0 is allowed: the saddle exists and
/// the conservative connection is a valid shot target. An asymptotic
/// approach to the sink with no axis crossing (over-damped case, where the
/// sink is a node) reports HitAxis at the sink's angle: the landing point C
/// has degenerated to the left end of its admissible interval.
inline ShootOutcome shoot_unstable_manifold(const ModelParams& p, double offset,
                                            const IntegrationControls& controls,
                                            SampleMode mode = SampleMode::Steps) {
    if (p.beta > 1.0)
        throw DomainError("shoot_unstable_manifold: no saddle exists for beta > 1");
    if (!(offset > 0.0))
        throw DomainError("shoot_unstable_manifold: offset must be positive");
    controls.validate();

    const double p0 = phi_zero(p);
    const double a0 = -pi - p0;    // departure saddle
    const double a1 = pi - p0;     // target saddle
    const double b0 = p0;          // sink between them

    // Unstable eigendirection (1, lambda1); at beta = 1 the saddle-node's
    // neutral direction (1, 0) plays its role.
    const double lam1 = separatrix_slopes(p).first;
    const double nrm = std::hypot(1.0, lam1);
    const PhaseState start{a0 + offset / nrm, offset * lam1 / nrm};

    EventSet events;
    events.stop_on_axis = true;
    events.axis_arm_phi = start.phi + controls.event_tol;
    events.lines.push_back({a1, +1});

    FixedPoint saddle1;
    saddle1.phi = a1;
    saddle1.kind = (p.beta < 1.0) ? FixedPointKind::Saddle : FixedPointKind::SaddleNode;
    saddle1.index = 1;
    FixedPoint sink0;
    sink0.phi = b0;
    sink0.kind = (p.gamma > 0.0) ? FixedPointKind::Sink : FixedPointKind::Center;
    sink0.index = 0;
    events.capture_targets = {saddle1, sink0};

    TrajectorySegment seg = integrate_time(start, p, controls, events, mode);

    ShootOutcome out;
    out.trajectory = std::move(seg);
    const auto& term = out.trajectory.terminal;

    if (const auto* axis = std::get_if<AxisCrossing>(&term)) {
        out.kind = ShootKind::HitAxis;
        out.phi_c = axis->phi;
    } else if (const auto* line = std::get_if<VerticalLineCrossing>(&term)) {
        out.kind = ShootKind::HitLineK1;
        out.z_c = line->z;
    } else if (const auto* cap = std::get_if<EquilibriumCapture>(&term)) {
        if (cap->point.index == 1) {
            out.kind = ShootKind::HitSaddle;
        } else {
            out.kind = ShootKind::HitAxis;   // node-type sink, approached from z > 0
            out.phi_c = cap->point.phi;
        }
    } else {
        throw ClassificationAmbiguous(
            "shoot_unstable_manifold: trajectory ended without reaching the axis, "
            "the line through the right saddle, or a capture disc (beta=" +
            std::to_string(p.beta) + ", gamma=" + std::to_string(p.gamma) + ")");
    }
    return out;
}

struct CriticalResult {
    double gamma = 0.0;
    double beta0 = 0.0;
    double bracket_width = 0.0;
    int evaluations = 0;
};

/// Locate the critical drive beta0(gamma) in (0, 1] by bisection over the
/// shot classification. A subcritical shot at beta = 1 - tol means the
/// threshold sits inside (1 - tol, 1]: the over-damped plateau. The shot at
/// exactly beta = 1 is never taken (the degenerate capture at the merged
/// saddle-node is ambiguous).
inline CriticalResult critical_beta(double gamma, double tol,
                                    const IntegrationControls& controls,
                                    double offset = default_shoot_offset) {
    if (!(gamma > 0.0)) throw DomainError("critical_beta: gamma must be positive");
    if (!(tol > 0.0 && tol < 1.0)) throw DomainError("critical_beta: tol must be in (0, 1)");

    CriticalResult res;
    res.gamma = gamma;

    auto classify = [&](double beta) {
        ++res.evaluations;
        return shoot_unstable_manifold(ModelParams(beta, gamma), offset, controls,
                                       SampleMode::Endpoints)
            .kind;
    };

    const double hi_probe = 1.0 - tol;
    const ShootKind top = classify(hi_probe);
    if (top != ShootKind::HitLineK1) {
        // HitAxis or HitSaddle at 1 - tol: plateau branch
        res.beta0 = 1.0;
        res.bracket_width = tol;
        return res;
    }

    double lo = 0.0, hi = hi_probe;   // lo subcritical (Lemma-3 side), hi supercritical
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        const ShootKind k = classify(mid);
        if (k == ShootKind::HitAxis) {
            lo = mid;
        } else if (k == ShootKind::HitLineK1) {
            hi = mid;
        } else {
            // landed in the capture disc: the connection is found to disc precision
            res.beta0 = mid;
            res.bracket_width = 0.0;
            return res;
        }
    }
    res.beta0 = 0.5 * (lo + hi);
    res.bracket_width = hi - lo;
    return res;
}

/// Smallest damping with beta0 = 1, by bisection on the plateau predicate.
/// The threshold curve meets 1 tangentially, so the predicate is resolved
/// with an internal drive tolerance fine enough for the requested gamma
/// tolerance (quadratic tangency: d_beta ~ d_gamma^2).
inline double gamma_min(double tol, const IntegrationControls& controls,
                        double offset = default_shoot_offset) {
    if (!(tol > 0.0)) throw DomainError("gamma_min: tol must be positive");

    const double beta_tol = std::min(1e-6, 0.0625 * tol * tol);
    auto on_plateau = [&](double gamma) {
        return critical_beta(gamma, beta_tol, controls, offset).beta0 >= 1.0 - 2.0 * beta_tol;
    };

    double lo = 0.25, hi = 2.0;
    int guard = 0;
    while (!on_plateau(hi)) {
        lo = hi;
        hi *= 2.0;
        if (++guard > 6)
            throw ClassificationAmbiguous("gamma_min: plateau not reached by gamma = 128");
    }
    guard = 0;
    while (on_plateau(lo)) {
        hi = lo;
        lo *= 0.5;
        if (++guard > 10)
            throw ClassificationAmbiguous("gamma_min: plateau persists down to gamma ~ 0");
    }
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (on_plateau(mid))
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace pendulum
