#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "pendulum/detail/rk45.hpp"
#include "pendulum/errors.hpp"
#include "pendulum/model.hpp"

// Adaptive integration of the pendulum field, in time over (phi, z) and in
// the angle variable over the graph form dz/dphi = (beta - sin phi)/z - gamma.
// The graph integration carries elapsed time and the running integral of
// z dphi alongside z, so return-map diagnostics come out of one pass.

namespace pendulum {

struct IntegrationControls {
    double rel_tol   = 1e-10;
    double abs_tol   = 1e-12;
    double max_step  = 1.0;
    double max_span  = 1e6;    ///< bound on the independent variable (t or phi)
    double event_tol = 1e-10;

    void validate() const {
        if (!(rel_tol > 0 && abs_tol > 0 && max_step > 0 && max_span > 0 && event_tol > 0))
            throw DomainError("IntegrationControls: all fields must be positive");
    }
};

/// Default radius of the disc around an equilibrium inside which a trajectory
/// counts as having arrived; saddles and sinks are only reached
/// asymptotically, the disc makes arrival decidable in finite time.
inline constexpr double default_capture_radius = 1e-6;

/// Floor below which the graph form dz/dphi is abandoned (it is singular at
/// z = 0, where the true trajectory crosses the axis vertically).
inline constexpr double default_z_floor = 1e-8;

// -- terminal events ---------------------------------------------------------

struct SpanExhausted {};
struct AxisCrossing {
    double phi;
};
struct VerticalLineCrossing {
    double phi;
    double z;
};
struct EquilibriumCapture {
    FixedPoint point;
};
struct BlowUp {
    PhaseState state;
};

using TerminalEvent =
    std::variant<SpanExhausted, AxisCrossing, VerticalLineCrossing, EquilibriumCapture, BlowUp>;

enum class PathVariable { Time, Angle };

struct TrajectorySample {
    double x = 0.0;        ///< independent variable: t (Time) or phi (Angle)
    PhaseState state;
    double time = 0.0;     ///< elapsed time (== x in Time mode)
};

struct TrajectorySegment {
    PathVariable variable = PathVariable::Time;
    std::vector<TrajectorySample> samples;   ///< strictly ordered in x
    TerminalEvent terminal = SpanExhausted{};
    double z_integral = 0.0;   ///< integral of z dphi over the segment (Angle mode)
};

/// Final state of a segment.
inline const TrajectorySample& terminal_sample(const TrajectorySegment& seg) {
    return seg.samples.back();
}

enum class SampleMode {
    Endpoints,   ///< keep only the first and last sample
    Steps,       ///< one sample per accepted step, thinned above a cap
};

/// Optional stopping conditions for time-domain integration.
struct VerticalLineSpec {
    double phi = 0.0;
    int direction = 0;   // -1 leftward, +1 rightward, 0 either
};

struct EventSet {
    bool stop_on_axis = false;     ///< z crossing 0 (direction below)
    int axis_direction = -1;       ///< default: descending through the axis
    /// Axis event stays disarmed until phi first exceeds this value.
    double axis_arm_phi = -std::numeric_limits<double>::infinity();
    std::vector<VerticalLineSpec> lines;
    std::vector<FixedPoint> capture_targets;
    double capture_radius = default_capture_radius;
};

namespace detail {

inline constexpr std::size_t sample_cap = 1u << 18;

/// Bounded recorder: once the cap is hit, every other retained sample is
/// dropped and the stride doubles, so long integrations stay in memory while
/// ordering is preserved.
struct SampleRecorder {
    SampleMode mode;
    std::vector<TrajectorySample>& out;
    std::size_t stride = 1, seen = 0;

    void push(const TrajectorySample& s) {
        if (mode == SampleMode::Endpoints) {
            if (out.empty())
                out.push_back(s);
            else if (out.size() == 1)
                out.push_back(s);
            else
                out.back() = s;
            return;
        }
        if (seen++ % stride == 0) {
            if (out.size() >= sample_cap) {
                std::vector<TrajectorySample> kept;
                kept.reserve(out.size() / 2 + 1);
                for (std::size_t i = 0; i < out.size(); i += 2) kept.push_back(out[i]);
                out = std::move(kept);
                stride *= 2;
            }
            out.push_back(s);
        }
    }
    /// The terminal state must always be present exactly once.
    void finish(const TrajectorySample& s) {
        if (!out.empty() && out.back().x == s.x) out.back() = s;
        else out.push_back(s);
    }
};

} // namespace detail

/// Integrate the flow from `start` for at most controls.max_span time units
/// or until the first enabled event.
inline TrajectorySegment integrate_time(PhaseState start, const ModelParams& p,
                                        const IntegrationControls& controls,
                                        const EventSet& events = {},
                                        SampleMode mode = SampleMode::Steps) {
    controls.validate();
    if (!(std::isfinite(start.phi) && std::isfinite(start.z)))
        throw DomainError("integrate_time: start state must be finite");

    using V2 = detail::Vec<2>;
    auto field = [&p](double, const V2& y) -> V2 {
        return {y[1], p.beta - std::sin(y[0]) - p.gamma * y[1]};
    };

    enum { ev_axis = 0, ev_line_base = 1 };
    const int ev_capture = ev_line_base + static_cast<int>(events.lines.size());

    std::vector<detail::Event<2>> evs;
    if (events.stop_on_axis) {
        detail::Event<2> e;
        e.value = [](double, const V2& y) { return y[1]; };
        e.direction = events.axis_direction;
        e.id = ev_axis;
        if (std::isfinite(events.axis_arm_phi)) {
            const double arm = events.axis_arm_phi;
            e.armed = [arm](double, const V2& y) { return y[0] > arm; };
        }
        evs.push_back(std::move(e));
    }
    for (std::size_t i = 0; i < events.lines.size(); ++i) {
        detail::Event<2> e;
        const double target = events.lines[i].phi;
        e.value = [target](double, const V2& y) { return y[0] - target; };
        e.direction = events.lines[i].direction;
        e.id = ev_line_base + static_cast<int>(i);
        evs.push_back(std::move(e));
    }
    if (!events.capture_targets.empty()) {
        detail::Event<2> e;
        const auto targets = events.capture_targets;
        const double r = events.capture_radius;
        e.value = [targets, r](double, const V2& y) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& t : targets)
                best = std::min(best, std::hypot(y[0] - t.phi, y[1]));
            return best - r;
        };
        e.direction = -1;
        e.id = ev_capture;
        evs.push_back(std::move(e));
    }

    detail::DriverControls dc{controls.rel_tol, controls.abs_tol, controls.max_step,
                              controls.event_tol};

    TrajectorySegment seg;
    seg.variable = PathVariable::Time;
    detail::SampleRecorder rec{mode, seg.samples};
    rec.push({0.0, start, 0.0});

    auto on_step = [&rec](const detail::DenseStep<2>& s) {
        rec.push({s.x1, {s.y1[0], s.y1[1]}, s.x1});
    };

    const auto res = detail::integrate_adaptive<2>(field, 0.0, {start.phi, start.z},
                                                   controls.max_span, dc, evs, on_step);

    const PhaseState end{res.y[0], res.y[1]};
    rec.finish({res.x, end, res.x});

    using Kind = detail::DriveResult<2>::Kind;
    if (res.kind == Kind::SpanEnd) {
        seg.terminal = SpanExhausted{};
    } else if (res.kind == Kind::BlowUp) {
        seg.terminal = BlowUp{end};
    } else if (res.event_id == ev_axis) {
        seg.terminal = AxisCrossing{end.phi};
    } else if (res.event_id >= ev_capture) {
        const FixedPoint* best = nullptr;
        double bd = std::numeric_limits<double>::infinity();
        for (const auto& t : events.capture_targets) {
            const double d = std::hypot(end.phi - t.phi, end.z);
            if (d < bd) {
                bd = d;
                best = &t;
            }
        }
        seg.terminal = EquilibriumCapture{*best};
    } else {
        const auto& line = events.lines[static_cast<std::size_t>(res.event_id - ev_line_base)];
        seg.terminal = VerticalLineCrossing{line.phi, end.z};
    }
    return seg;
}

/// Integrate the graph form from (phi_begin, z0) to phi_end (phi_end >
/// phi_begin, z0 > 0). Terminates with AxisCrossing if z falls through
/// z_floor before the span ends. Elapsed time and the integral of z dphi
/// accumulate alongside z.
inline TrajectorySegment integrate_graph(double z0, double phi_begin, double phi_end,
                                         const ModelParams& p,
                                         const IntegrationControls& controls,
                                         double z_floor = default_z_floor,
                                         SampleMode mode = SampleMode::Steps) {
    controls.validate();
    if (!(z0 > 0.0)) throw DomainError("integrate_graph: z0 must be positive");
    if (!(phi_end > phi_begin))
        throw DomainError("integrate_graph: phi span must be increasing");
    if (phi_end - phi_begin > controls.max_span)
        throw DomainError("integrate_graph: phi span exceeds max_span");

    using V3 = detail::Vec<3>;   // (z, t, I)
    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto field = [&p, nan](double phi, const V3& y) -> V3 {
        const double z = y[0];
        if (z <= 0.0) return {nan, nan, nan};   // reject steps stepping past the axis
        return {(p.beta - std::sin(phi)) / z - p.gamma, 1.0 / z, z};
    };

    std::vector<detail::Event<3>> evs(1);
    evs[0].value = [z_floor](double, const V3& y) { return y[0] - z_floor; };
    evs[0].direction = -1;
    evs[0].id = 0;

    detail::DriverControls dc{controls.rel_tol, controls.abs_tol, controls.max_step,
                              controls.event_tol};

    TrajectorySegment seg;
    seg.variable = PathVariable::Angle;
    detail::SampleRecorder rec{mode, seg.samples};
    rec.push({phi_begin, {phi_begin, z0}, 0.0});

    double z_acc = 0.0;   // z dphi integral at the last accepted step
    auto on_step = [&rec, &z_acc](const detail::DenseStep<3>& s) {
        rec.push({s.x1, {s.x1, s.y1[0]}, s.y1[1]});
        z_acc = s.y1[2];
    };

    detail::DriveResult<3> res;
    try {
        res = detail::integrate_adaptive<3>(field, phi_begin, {z0, 0.0, 0.0}, phi_end, dc,
                                            evs, on_step);
    } catch (const StiffnessFailure&) {
        // The graph form is singular at the axis: on a plunge (z small with
        // beta - sin phi < 0) the steps collapse like z' ~ C/z before the
        // floor event can fire. The touchdown itself is regular in time, so
        // finish the approach with the time-domain field and report the
        // crossing it localizes.
        const TrajectorySample& stall = seg.samples.back();
        const double zs = stall.state.z;
        if (!(zs < 1e-2 && p.beta - std::sin(stall.x) < 0.0)) throw;

        EventSet axis_only;
        axis_only.stop_on_axis = true;
        IntegrationControls tail = controls;
        tail.max_span = std::min(controls.max_span, 1.0);
        const TrajectorySegment touchdown =
            integrate_time({stall.x, zs}, p, tail, axis_only, SampleMode::Endpoints);
        if (const auto* ax = std::get_if<AxisCrossing>(&touchdown.terminal)) {
            const TrajectorySample& end = terminal_sample(touchdown);
            rec.finish({ax->phi, {ax->phi, end.state.z}, stall.time + end.time});
            seg.z_integral = z_acc;   // the plunge tail adds O(z_stall^3): negligible
            seg.terminal = AxisCrossing{ax->phi};
            return seg;
        }
        throw;
    }

    rec.finish({res.x, {res.x, res.y[0]}, res.y[1]});
    seg.z_integral = res.y[2];

    using Kind = detail::DriveResult<3>::Kind;
    if (res.kind == Kind::SpanEnd)
        seg.terminal = SpanExhausted{};
    else if (res.kind == Kind::BlowUp)
        seg.terminal = BlowUp{PhaseState{res.x, res.y[0]}};
    else
        seg.terminal = AxisCrossing{res.x};
    return seg;
}

} // namespace pendulum
