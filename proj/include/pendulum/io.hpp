#pragma once

#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pendulum/cycle.hpp"
#include "pendulum/integrate.hpp"
#include "pendulum/model.hpp"
#include "pendulum/sweep.hpp"

// Table and figure writers. Every writer is a pure function of its inputs
// (no timestamps, no locale), so identical runs produce identical bytes.
// Numbers are printed with 17 significant digits, which round-trips every
// double exactly.

namespace pendulum::io {

inline constexpr std::string_view version = "0.1.0";

/// Shortest text that still round-trips: %.17g.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Run header carried into every table: what was computed and under which
/// tolerances.
struct RunMeta {
    std::string command;
    std::optional<double> beta;
    std::optional<double> gamma;
    IntegrationControls controls;
    std::optional<double> tol;   ///< bisection / fixed-point tolerance
    int workers = 1;
};

namespace detail {

inline void json_escape(std::string& out, std::string_view s) {
    out += '"';
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        case '\t': out += "\\t"; break;
        default:
            if (static_cast<unsigned char>(c) < 0x20) {
                char buf[8];
                std::snprintf(buf, sizeof buf, "\\u%04x", c);
                out += buf;
            } else {
                out += c;
            }
        }
    }
    out += '"';
}

/// JSON number, or null for non-finite values.
inline void json_number(std::string& out, double v) {
    if (std::isfinite(v))
        out += format_double(v);
    else
        out += "null";
}

/// CSV cell: empty for non-finite values.
inline void csv_number(std::string& out, double v) {
    if (std::isfinite(v)) out += format_double(v);
}

inline void append_meta(std::string& out, const RunMeta& m) {
    out += "\"meta\":{\"version\":";
    json_escape(out, version);
    out += ",\"command\":";
    json_escape(out, m.command);
    out += ",\"params\":{";
    bool first = true;
    if (m.beta) {
        out += "\"beta\":";
        json_number(out, *m.beta);
        first = false;
    }
    if (m.gamma) {
        if (!first) out += ',';
        out += "\"gamma\":";
        json_number(out, *m.gamma);
    }
    out += "},\"tolerances\":{\"rel_tol\":";
    json_number(out, m.controls.rel_tol);
    out += ",\"abs_tol\":";
    json_number(out, m.controls.abs_tol);
    out += ",\"event_tol\":";
    json_number(out, m.controls.event_tol);
    out += ",\"max_step\":";
    json_number(out, m.controls.max_step);
    out += ",\"max_span\":";
    json_number(out, m.controls.max_span);
    if (m.tol) {
        out += ",\"tol\":";
        json_number(out, *m.tol);
    }
    out += "},\"workers\":" + std::to_string(m.workers) + "}";
}

} // namespace detail

inline std::string_view fixed_point_kind_name(FixedPointKind k) {
    switch (k) {
    case FixedPointKind::Saddle: return "saddle";
    case FixedPointKind::Sink: return "sink";
    case FixedPointKind::Center: return "center";
    case FixedPointKind::SaddleNode: return "saddle-node";
    }
    return "unknown";
}

// -- fixed-point tables -------------------------------------------------------

inline std::string equilibria_csv(std::span<const FixedPoint> pts) {
    std::string out = "index,phi,kind,lambda1,lambda2,discriminant\n";
    for (const auto& fp : pts) {
        out += std::to_string(fp.index);
        out += ',';
        detail::csv_number(out, fp.phi);
        out += ',';
        out += fixed_point_kind_name(fp.kind);
        out += ',';
        if (fp.slopes) detail::csv_number(out, fp.slopes->first);
        out += ',';
        if (fp.slopes) detail::csv_number(out, fp.slopes->second);
        out += ',';
        detail::csv_number(out, fp.discriminant);
        out += '\n';
    }
    return out;
}

inline std::string equilibria_json(std::span<const FixedPoint> pts, const RunMeta& meta) {
    std::string out = "{";
    detail::append_meta(out, meta);
    out += ",\"rows\":[";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& fp = pts[i];
        if (i) out += ',';
        out += "{\"index\":" + std::to_string(fp.index) + ",\"phi\":";
        detail::json_number(out, fp.phi);
        out += ",\"kind\":";
        detail::json_escape(out, fixed_point_kind_name(fp.kind));
        out += ",\"lambda1\":";
        detail::json_number(out, fp.slopes ? fp.slopes->first
                                           : std::numeric_limits<double>::quiet_NaN());
        out += ",\"lambda2\":";
        detail::json_number(out, fp.slopes ? fp.slopes->second
                                           : std::numeric_limits<double>::quiet_NaN());
        out += ",\"discriminant\":";
        detail::json_number(out, fp.discriminant);
        out += '}';
    }
    out += "]}\n";
    return out;
}

// -- sweep tables -------------------------------------------------------------

inline std::string sweep_csv(std::span<const SweepRow> rows) {
    std::string out = "gamma,beta,beta0,mean_velocity,cycle_found,bracket_width,evaluations,error\n";
    for (const auto& r : rows) {
        detail::csv_number(out, r.gamma);
        out += ',';
        detail::csv_number(out, r.beta);
        out += ',';
        if (r.beta0) detail::csv_number(out, *r.beta0);
        out += ',';
        detail::csv_number(out, r.mean_velocity);
        out += ',';
        out += r.cycle_found ? "true" : "false";
        out += ',';
        detail::csv_number(out, r.bracket_width);
        out += ',';
        out += std::to_string(r.evaluations);
        out += ',';
        // row errors never contain commas or quotes today; quote anyway
        if (!r.error.empty()) {
            out += '"';
            for (char c : r.error) {
                if (c == '"') out += '"';
                out += c;
            }
            out += '"';
        }
        out += '\n';
    }
    return out;
}

inline std::string sweep_json(std::span<const SweepRow> rows, const RunMeta& meta) {
    std::string out = "{";
    detail::append_meta(out, meta);
    out += ",\"rows\":[";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (i) out += ',';
        out += "{\"gamma\":";
        detail::json_number(out, r.gamma);
        out += ",\"beta\":";
        detail::json_number(out, r.beta);
        out += ",\"beta0\":";
        detail::json_number(out, r.beta0 ? *r.beta0 : std::numeric_limits<double>::quiet_NaN());
        out += ",\"mean_velocity\":";
        detail::json_number(out, r.mean_velocity);
        out += ",\"cycle_found\":";
        out += r.cycle_found ? "true" : "false";
        out += ",\"bracket_width\":";
        detail::json_number(out, r.bracket_width);
        out += ",\"evaluations\":" + std::to_string(r.evaluations);
        out += ",\"error\":";
        detail::json_escape(out, r.error);
        out += '}';
    }
    out += "]}\n";
    return out;
}

// -- orbit reports ------------------------------------------------------------

inline std::string orbit_csv(const PeriodicOrbit& orbit, double beta, double gamma) {
    std::string out =
        "gamma,beta,z_start,period,mean_velocity,phase_integral,contraction,section_phi,"
        "map_iterations\n";
    detail::csv_number(out, gamma);
    out += ',';
    detail::csv_number(out, beta);
    out += ',';
    detail::csv_number(out, orbit.z_start);
    out += ',';
    detail::csv_number(out, orbit.period_T);
    out += ',';
    detail::csv_number(out, orbit.mean_velocity);
    out += ',';
    detail::csv_number(out, orbit.phase_integral);
    out += ',';
    detail::csv_number(out, orbit.contraction);
    out += ',';
    detail::csv_number(out, orbit.section);
    out += ',';
    out += std::to_string(orbit.map_iterations);
    out += '\n';
    return out;
}

inline std::string orbit_json(const PeriodicOrbit& orbit, const RunMeta& meta) {
    std::string out = "{";
    detail::append_meta(out, meta);
    out += ",\"orbit\":{\"z_start\":";
    detail::json_number(out, orbit.z_start);
    out += ",\"period\":";
    detail::json_number(out, orbit.period_T);
    out += ",\"mean_velocity\":";
    detail::json_number(out, orbit.mean_velocity);
    out += ",\"phase_integral\":";
    detail::json_number(out, orbit.phase_integral);
    out += ",\"contraction\":";
    detail::json_number(out, orbit.contraction);
    out += ",\"section_phi\":";
    detail::json_number(out, orbit.section);
    out += ",\"map_iterations\":" + std::to_string(orbit.map_iterations);
    out += ",\"samples\":[";
    for (std::size_t i = 0; i < orbit.samples.size(); ++i) {
        if (i) out += ',';
        out += '[';
        detail::json_number(out, orbit.samples[i].phi);
        out += ',';
        detail::json_number(out, orbit.samples[i].z);
        out += ']';
    }
    out += "]}}\n";
    return out;
}

// -- portraits ----------------------------------------------------------------

/// Rows of (series, kind, x, phi, z): trajectories, the nullcline, the
/// separatrix shot and fixed points share one flat table.
inline std::string portrait_csv(const PhasePortrait& pp) {
    std::string out = "series,kind,x,phi,z\n";
    int series = 0;
    auto emit = [&out](int series_id, std::string_view kind, double x, double phi, double z) {
        out += std::to_string(series_id);
        out += ',';
        out += kind;
        out += ',';
        detail::csv_number(out, x);
        out += ',';
        detail::csv_number(out, phi);
        out += ',';
        detail::csv_number(out, z);
        out += '\n';
    };
    for (const auto& seg : pp.trajectories) {
        for (const auto& s : seg.samples) emit(series, "trajectory", s.x, s.state.phi, s.state.z);
        ++series;
    }
    for (const auto& s : pp.nullcline) emit(series, "nullcline", s.phi, s.phi, s.z);
    if (!pp.nullcline.empty()) ++series;
    if (pp.separatrix_shot) {
        for (const auto& s : pp.separatrix_shot->trajectory.samples)
            emit(series, "separatrix", s.x, s.state.phi, s.state.z);
        ++series;
    }
    for (const auto& fp : pp.fixed_points) {
        emit(series, fixed_point_kind_name(fp.kind), fp.phi, fp.phi, 0.0);
        ++series;
    }
    return out;
}

inline std::string portrait_json(const PhasePortrait& pp, const RunMeta& meta) {
    std::string out = "{";
    detail::append_meta(out, meta);
    out += ",\"portrait\":{\"phi_min\":";
    detail::json_number(out, pp.phi_min);
    out += ",\"phi_max\":";
    detail::json_number(out, pp.phi_max);
    auto series = [&out](std::string_view, const auto& samples, auto&& phi_of, auto&& z_of) {
        out += '[';
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (i) out += ',';
            out += '[';
            detail::json_number(out, phi_of(samples[i]));
            out += ',';
            detail::json_number(out, z_of(samples[i]));
            out += ']';
        }
        out += ']';
    };
    out += ",\"trajectories\":[";
    for (std::size_t i = 0; i < pp.trajectories.size(); ++i) {
        if (i) out += ',';
        series("t", pp.trajectories[i].samples,
               [](const TrajectorySample& s) { return s.state.phi; },
               [](const TrajectorySample& s) { return s.state.z; });
    }
    out += "],\"nullcline\":";
    series("g", pp.nullcline, [](const PhaseState& s) { return s.phi; },
           [](const PhaseState& s) { return s.z; });
    out += ",\"separatrix\":";
    if (pp.separatrix_shot) {
        series("r", pp.separatrix_shot->trajectory.samples,
               [](const TrajectorySample& s) { return s.state.phi; },
               [](const TrajectorySample& s) { return s.state.z; });
    } else {
        out += "[]";
    }
    out += ",\"fixed_points\":[";
    for (std::size_t i = 0; i < pp.fixed_points.size(); ++i) {
        if (i) out += ',';
        out += "{\"phi\":";
        detail::json_number(out, pp.fixed_points[i].phi);
        out += ",\"kind\":";
        detail::json_escape(out, fixed_point_kind_name(pp.fixed_points[i].kind));
        out += '}';
    }
    out += "]}}\n";
    return out;
}

namespace detail {

inline std::string svg_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

/// Thin a polyline to at most `cap` points, keeping first and last.
template <typename T>
std::vector<const T*> thin(const std::vector<T>& v, std::size_t cap) {
    std::vector<const T*> out;
    if (v.empty()) return out;
    const std::size_t stride = v.size() > cap ? (v.size() + cap - 1) / cap : 1;
    for (std::size_t i = 0; i < v.size(); i += stride) out.push_back(&v[i]);
    if (out.back() != &v.back()) out.push_back(&v.back());
    return out;
}

} // namespace detail

/// Standalone SVG of the portrait. World coordinates: phi across the main
/// interval, z in [-(beta+1)/gamma - 1, (beta+1)/gamma + 1] (data-driven when
/// gamma = 0).
inline std::string portrait_svg(const PhasePortrait& pp) {
    double z_half = 0.0;
    if (pp.gamma > 0.0) {
        z_half = (pp.beta + 1.0) / pp.gamma + 1.0;
    } else {
        for (const auto& seg : pp.trajectories)
            for (const auto& s : seg.samples) z_half = std::max(z_half, std::abs(s.state.z));
        if (pp.separatrix_shot)
            for (const auto& s : pp.separatrix_shot->trajectory.samples)
                z_half = std::max(z_half, std::abs(s.state.z));
        z_half += 1.0;
    }
    const double x0 = pp.phi_min, x1 = pp.phi_max;
    const double w = 800.0, h = 600.0;
    const double sx = w / (x1 - x0);
    const double sy = h / (2.0 * z_half);
    auto X = [&](double phi) { return (phi - x0) * sx; };
    auto Y = [&](double z) { return (z_half - z) * sy; };   // z up on screen

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" "
           "viewBox=\"0 0 800 600\">\n";
    out += "<rect width=\"800\" height=\"600\" fill=\"white\"/>\n";
    // axis z = 0
    out += "<line x1=\"0\" y1=\"" + detail::svg_coord(Y(0.0)) + "\" x2=\"800\" y2=\"" +
           detail::svg_coord(Y(0.0)) + "\" stroke=\"#999\" stroke-width=\"1\"/>\n";

    auto polyline = [&](const std::vector<const TrajectorySample*>& pts, const char* color,
                        const char* dash) {
        if (pts.size() < 2) return;
        out += "<polyline fill=\"none\" stroke=\"";
        out += color;
        out += "\" stroke-width=\"1.2\"";
        if (dash[0]) {
            out += " stroke-dasharray=\"";
            out += dash;
            out += '"';
        }
        out += " points=\"";
        for (const auto* s : pts) {
            out += detail::svg_coord(X(s->state.phi));
            out += ',';
            out += detail::svg_coord(Y(s->state.z));
            out += ' ';
        }
        out += "\"/>\n";
    };

    for (const auto& seg : pp.trajectories)
        polyline(detail::thin(seg.samples, 2000), "#1f77b4", "");
    if (!pp.nullcline.empty()) {
        out += "<polyline fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"1.2\" "
               "stroke-dasharray=\"6 3\" points=\"";
        for (const auto& s : pp.nullcline) {
            out += detail::svg_coord(X(s.phi));
            out += ',';
            out += detail::svg_coord(Y(s.z));
            out += ' ';
        }
        out += "\"/>\n";
    }
    if (pp.separatrix_shot)
        polyline(detail::thin(pp.separatrix_shot->trajectory.samples, 2000), "#d62728", "");

    for (const auto& fp : pp.fixed_points) {
        const std::string cx = detail::svg_coord(X(fp.phi)), cy = detail::svg_coord(Y(0.0));
        switch (fp.kind) {
        case FixedPointKind::Saddle:
            out += "<path d=\"M " + cx + " " + cy +
                   " m -5 -5 l 10 10 m -10 0 l 10 -10\" stroke=\"black\" stroke-width=\"1.5\" "
                   "fill=\"none\"/>\n";
            break;
        case FixedPointKind::Sink:
            out += "<circle cx=\"" + cx + "\" cy=\"" + cy + "\" r=\"4\" fill=\"black\"/>\n";
            break;
        case FixedPointKind::Center:
            out += "<circle cx=\"" + cx + "\" cy=\"" + cy +
                   "\" r=\"4\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
            break;
        case FixedPointKind::SaddleNode:
            out += "<rect x=\"" + detail::svg_coord(X(fp.phi) - 4.0) + "\" y=\"" +
                   detail::svg_coord(Y(0.0) - 4.0) +
                   "\" width=\"8\" height=\"8\" fill=\"none\" stroke=\"black\" "
                   "stroke-width=\"1.5\" transform=\"rotate(45 " +
                   cx + " " + cy + ")\"/>\n";
            break;
        }
    }
    out += "</svg>\n";
    return out;
}

} // namespace pendulum::io
