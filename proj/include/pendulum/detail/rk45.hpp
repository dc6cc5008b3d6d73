#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "pendulum/errors.hpp"

// Dormand-Prince 4(5) embedded pair with PI step-size control, cubic Hermite
// dense output, and first-event localization by bisection on the interpolant.
// Dimension-generic so the same driver serves the time-domain field (phi, z)
// and the graph-form system (z, t, I) in the angle variable.

namespace pendulum::detail {

template <std::size_t N>
using Vec = std::array<double, N>;

template <std::size_t N>
inline bool all_finite(const Vec<N>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

template <std::size_t N>
inline double norm2(const Vec<N>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

/// One accepted step with endpoint derivatives; eval() is the C1 cubic
/// Hermite interpolant (locally 4th order, ample for event localization).
template <std::size_t N>
struct DenseStep {
    double x0 = 0.0, x1 = 0.0;
    Vec<N> y0{}, y1{}, f0{}, f1{};

    Vec<N> eval(double x) const {
        const double h = x1 - x0;
        const double t = (x - x0) / h;
        const double u = 1.0 - t;
        const double h00 = (1.0 + 2.0 * t) * u * u;
        const double h10 = t * u * u;
        const double h01 = t * t * (3.0 - 2.0 * t);
        const double h11 = t * t * (t - 1.0);
        Vec<N> y;
        for (std::size_t i = 0; i < N; ++i)
            y[i] = h00 * y0[i] + h * h10 * f0[i] + h01 * y1[i] + h * h11 * f1[i];
        return y;
    }
};

/// Scalar event g(x, y): fires when g changes sign across an accepted step
/// in the requested direction (-1: + to -, +1: - to +, 0: either). The
/// `armed` predicate latches: crossings are ignored until it first holds at
/// a step end.
template <std::size_t N>
struct Event {
    std::function<double(double, const Vec<N>&)> value;
    int direction = 0;
    std::function<bool(double, const Vec<N>&)> armed;   // null = armed from the start
    int id = 0;
};

struct DriverControls {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double max_step = 1.0;
    double event_tol = 1e-10;
    double blowup_norm = 1e9;
};

template <std::size_t N>
struct DriveResult {
    enum class Kind { SpanEnd, Event, BlowUp } kind = Kind::SpanEnd;
    int event_id = -1;
    double x = 0.0;
    Vec<N> y{};
};

/// One Dormand-Prince step of size h from (x0, y0) without error control;
/// f0 must be rhs(x0, y0). Within an already-accepted step this reproduces
/// the solution to the step's own accuracy, unlike the O(h^4) interpolant.
template <std::size_t N, typename RhsFn>
inline Vec<N> rk_substep(RhsFn&& rhs, double x0, const Vec<N>& y0, const Vec<N>& f0, double h) {
    Vec<N> k2, k3, k4, k5, k6, ytmp, y1;
    for (std::size_t i = 0; i < N; ++i) ytmp[i] = y0[i] + h * (1.0 / 5) * f0[i];
    k2 = rhs(x0 + (1.0 / 5) * h, ytmp);
    for (std::size_t i = 0; i < N; ++i)
        ytmp[i] = y0[i] + h * ((3.0 / 40) * f0[i] + (9.0 / 40) * k2[i]);
    k3 = rhs(x0 + (3.0 / 10) * h, ytmp);
    for (std::size_t i = 0; i < N; ++i)
        ytmp[i] = y0[i] + h * ((44.0 / 45) * f0[i] - (56.0 / 15) * k2[i] + (32.0 / 9) * k3[i]);
    k4 = rhs(x0 + (4.0 / 5) * h, ytmp);
    for (std::size_t i = 0; i < N; ++i)
        ytmp[i] = y0[i] + h * ((19372.0 / 6561) * f0[i] - (25360.0 / 2187) * k2[i] +
                               (64448.0 / 6561) * k3[i] - (212.0 / 729) * k4[i]);
    k5 = rhs(x0 + (8.0 / 9) * h, ytmp);
    for (std::size_t i = 0; i < N; ++i)
        ytmp[i] = y0[i] + h * ((9017.0 / 3168) * f0[i] - (355.0 / 33) * k2[i] +
                               (46732.0 / 5247) * k3[i] + (49.0 / 176) * k4[i] -
                               (5103.0 / 18656) * k5[i]);
    k6 = rhs(x0 + h, ytmp);
    for (std::size_t i = 0; i < N; ++i)
        y1[i] = y0[i] + h * ((35.0 / 384) * f0[i] + (500.0 / 1113) * k3[i] +
                             (125.0 / 192) * k4[i] - (2187.0 / 6784) * k5[i] +
                             (11.0 / 84) * k6[i]);
    return y1;
}

/// Localize the crossing of ev.value inside an accepted step: the Hermite
/// interpolant brackets cheaply, an RK substep from the step start supplies
/// the accurate state at each probe. Stops once |g| <= event_tol or the
/// bracket collapses to double resolution.
template <std::size_t N, typename RhsFn>
inline std::pair<double, Vec<N>> locate_event(RhsFn&& rhs, const DenseStep<N>& step,
                                              const Event<N>& ev, double event_tol) {
    double a = step.x0, b = step.x1;
    double ga = ev.value(a, step.y0);
    double xm = b;
    Vec<N> ym = step.y1;
    for (int it = 0; it < 200; ++it) {
        xm = 0.5 * (a + b);
        if (xm <= a || xm >= b) break;
        ym = rk_substep(rhs, step.x0, step.y0, step.f0, xm - step.x0);
        const double gm = ev.value(xm, ym);
        if (std::abs(gm) <= event_tol) return {xm, ym};
        if ((ga > 0.0) == (gm > 0.0)) {
            a = xm;
            ga = gm;
        } else {
            b = xm;
        }
    }
    return {xm, ym};
}

/// Integrate y' = rhs(x, y) from x0 toward x_end (x_end > x0), reporting each
/// accepted step through on_step(const DenseStep&). Returns at the first
/// triggered event, at span end, or on blow-up. Throws StiffnessFailure when
/// the step size underflows max_step * 1e-12.
///
/// When an event fires the reported final step is truncated at the event; its
/// f1 slot still holds the derivative of the untruncated step end, so samples
/// stay ordered but the truncated step is not a valid interpolant.
template <std::size_t N, typename RhsFn, typename StepSink>
DriveResult<N> integrate_adaptive(RhsFn&& rhs, double x0, Vec<N> y0, double x_end,
                                  const DriverControls& ctl, std::span<Event<N>> events,
                                  StepSink&& on_step) {
    struct EventState {
        double g_prev = 0.0;
        bool armed = false;
    };
    std::vector<EventState> estate(events.size());

    Vec<N> k1 = rhs(x0, y0);
    if (!all_finite(k1))
        throw DomainError("integrate_adaptive: non-finite field at the start state");
    for (std::size_t i = 0; i < events.size(); ++i) {
        estate[i].armed = !events[i].armed || events[i].armed(x0, y0);
        if (estate[i].armed) estate[i].g_prev = events[i].value(x0, y0);
    }

    const double h_min = ctl.max_step * 1e-12;
    double h = std::min({ctl.max_step, 0.1 * (x_end - x0), 1e-2 / (1.0 + norm2(k1))});
    h = std::max(h, h_min);
    double facold = 1e-4;   // PI controller memory
    double x = x0;

    Vec<N> k2, k3, k4, k5, k6, k7, ytmp, y1, yerr;

    while (x < x_end) {
        h = std::min(h, x_end - x);
        DenseStep<N> step;
        bool accepted = false;

        while (!accepted) {
            if (h < h_min) throw StiffnessFailure("adaptive step size underflow", x);

            for (std::size_t i = 0; i < N; ++i)
                ytmp[i] = y0[i] + h * (1.0 / 5) * k1[i];
            k2 = rhs(x + (1.0 / 5) * h, ytmp);
            for (std::size_t i = 0; i < N; ++i)
                ytmp[i] = y0[i] + h * ((3.0 / 40) * k1[i] + (9.0 / 40) * k2[i]);
            k3 = rhs(x + (3.0 / 10) * h, ytmp);
            for (std::size_t i = 0; i < N; ++i)
                ytmp[i] = y0[i] + h * ((44.0 / 45) * k1[i] - (56.0 / 15) * k2[i] +
                                       (32.0 / 9) * k3[i]);
            k4 = rhs(x + (4.0 / 5) * h, ytmp);
            for (std::size_t i = 0; i < N; ++i)
                ytmp[i] = y0[i] + h * ((19372.0 / 6561) * k1[i] - (25360.0 / 2187) * k2[i] +
                                       (64448.0 / 6561) * k3[i] - (212.0 / 729) * k4[i]);
            k5 = rhs(x + (8.0 / 9) * h, ytmp);
            for (std::size_t i = 0; i < N; ++i)
                ytmp[i] = y0[i] + h * ((9017.0 / 3168) * k1[i] - (355.0 / 33) * k2[i] +
                                       (46732.0 / 5247) * k3[i] + (49.0 / 176) * k4[i] -
                                       (5103.0 / 18656) * k5[i]);
            k6 = rhs(x + h, ytmp);
            for (std::size_t i = 0; i < N; ++i)
                y1[i] = y0[i] + h * ((35.0 / 384) * k1[i] + (500.0 / 1113) * k3[i] +
                                     (125.0 / 192) * k4[i] - (2187.0 / 6784) * k5[i] +
                                     (11.0 / 84) * k6[i]);
            k7 = rhs(x + h, y1);
            for (std::size_t i = 0; i < N; ++i)
                yerr[i] = h * ((71.0 / 57600) * k1[i] - (71.0 / 16695) * k3[i] +
                               (71.0 / 1920) * k4[i] - (17253.0 / 339200) * k5[i] +
                               (22.0 / 525) * k6[i] - (1.0 / 40) * k7[i]);

            double err = 0.0;
            const bool bad = !all_finite(y1) || !all_finite(k7);
            if (!bad) {
                for (std::size_t i = 0; i < N; ++i) {
                    const double sc =
                        ctl.abs_tol + ctl.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
                    const double r = yerr[i] / sc;
                    err += r * r;
                }
                err = std::sqrt(err / static_cast<double>(N));
            }
            if (bad || !std::isfinite(err)) {
                h *= 0.5;
                continue;
            }

            // Hairer-style PI controller
            constexpr double safe = 0.9, beta_pi = 0.04, expo = 0.2 - beta_pi * 0.75;
            const double fac11 = std::pow(std::max(err, 1e-32), expo);
            if (err <= 1.0) {
                double fac = std::clamp(fac11 / (std::pow(facold, beta_pi) * safe), 0.2, 5.0);
                step = DenseStep<N>{x, x + h, y0, y1, k1, k7};
                facold = std::max(err, 1e-4);
                x += h;
                y0 = y1;
                k1 = k7;   // FSAL
                h = std::min(h / fac, ctl.max_step);
                accepted = true;
            } else {
                h /= std::min(5.0, fac11 / safe);
            }
        }

        // earliest triggered event inside this step, if any
        bool fired = false;
        double xe_best = 0.0;
        Vec<N> ye_best{};
        int id_best = -1;
        for (std::size_t i = 0; i < events.size(); ++i) {
            const auto& ev = events[i];
            auto& st = estate[i];
            const double g1 = ev.value(step.x1, step.y1);
            const bool was_armed = st.armed;
            if (!st.armed && ev.armed(step.x1, step.y1)) st.armed = true;
            if (was_armed) {
                const bool down = st.g_prev > 0.0 && g1 <= 0.0;
                const bool up = st.g_prev < 0.0 && g1 >= 0.0;
                const bool crossed = (ev.direction < 0 && down) || (ev.direction > 0 && up) ||
                                     (ev.direction == 0 && (down || up));
                if (crossed) {
                    const auto [xe, ye] = locate_event(rhs, step, ev, ctl.event_tol);
                    if (!fired || xe < xe_best) {
                        fired = true;
                        xe_best = xe;
                        ye_best = ye;
                        id_best = ev.id;
                    }
                }
            }
            if (st.armed) st.g_prev = g1;
        }
        if (fired) {
            DriveResult<N> r;
            r.kind = DriveResult<N>::Kind::Event;
            r.event_id = id_best;
            r.x = xe_best;
            r.y = ye_best;
            DenseStep<N> cut = step;
            cut.x1 = xe_best;
            cut.y1 = r.y;
            on_step(cut);
            return r;
        }

        on_step(step);

        double norm = 0.0;
        for (double v : step.y1) norm = std::max(norm, std::abs(v));
        if (norm > ctl.blowup_norm) {
            DriveResult<N> r;
            r.kind = DriveResult<N>::Kind::BlowUp;
            r.x = step.x1;
            r.y = step.y1;
            return r;
        }
    }

    DriveResult<N> r;
    r.kind = DriveResult<N>::Kind::SpanEnd;
    r.x = x;
    r.y = y0;
    return r;
}

} // namespace pendulum::detail
