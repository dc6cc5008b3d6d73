// Command-line front end: every analysis as a subcommand with CSV/JSON
// output (SVG for portraits) and a named-invariant verification battery.
//
// Exit codes: 0 success, 1 usage error, 2 domain error (including "no cycle
// at these parameters"), 3 numerical failure, 4 verification failure.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pendulum/pendulum.hpp"

namespace {

using namespace pendulum;

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_domain = 2;
constexpr int exit_numeric = 3;
constexpr int exit_verify = 4;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Grid syntax: a single value, or "start:stop:step" inclusive of both
/// endpoints within half a step.
std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> out;
    const auto c1 = text.find(':');
    if (c1 == std::string::npos) {
        try {
            out.push_back(std::stod(text));
        } catch (const std::exception&) {
            throw UsageError("bad grid value '" + text + "'");
        }
        return out;
    }
    const auto c2 = text.find(':', c1 + 1);
    if (c2 == std::string::npos)
        throw UsageError("grid must be 'start:stop:step', got '" + text + "'");
    double start = 0, stop = 0, step = 0;
    try {
        start = std::stod(text.substr(0, c1));
        stop = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
        step = std::stod(text.substr(c2 + 1));
    } catch (const std::exception&) {
        throw UsageError("bad grid '" + text + "'");
    }
    if (!(step > 0.0) || stop < start) throw UsageError("grid needs stop >= start, step > 0");
    for (int k = 0;; ++k) {
        const double v = start + k * step;
        if (v > stop + 0.5 * step) break;
        out.push_back(v);
    }
    return out;
}

/// Index range syntax: "lo..hi".
std::pair<int, int> parse_index_range(const std::string& text) {
    const auto pos = text.find("..");
    try {
        if (pos == std::string::npos) {
            const int n = std::stoi(text);
            return {n, n};
        }
        return {std::stoi(text.substr(0, pos)), std::stoi(text.substr(pos + 2))};
    } catch (const std::exception&) {
        throw UsageError("bad index range '" + text + "' (expected 'lo..hi')");
    }
}

/// Seed list syntax: "phi,z;phi,z;...".
std::vector<PhaseState> parse_seeds(const std::string& text) {
    std::vector<PhaseState> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) {
        if (item.empty()) continue;
        const auto comma = item.find(',');
        if (comma == std::string::npos) throw UsageError("seed must be 'phi,z': '" + item + "'");
        try {
            out.push_back({std::stod(item.substr(0, comma)), std::stod(item.substr(comma + 1))});
        } catch (const std::exception&) {
            throw UsageError("bad seed '" + item + "'");
        }
    }
    return out;
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::fwrite(content.data(), 1, content.size(), stdout);
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw UsageError("cannot open output file '" + path + "'");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
}

struct CommonOpts {
    IntegrationControls controls;
    std::string out = "-";
    std::string format = "csv";
};

void add_tolerance_flags(CLI::App* cmd, IntegrationControls& c) {
    cmd->add_option("--rel-tol", c.rel_tol, "Relative integration tolerance")
        ->envname("PENDULUM_REL_TOL")
        ->capture_default_str();
    cmd->add_option("--abs-tol", c.abs_tol, "Absolute integration tolerance")
        ->envname("PENDULUM_ABS_TOL")
        ->capture_default_str();
    cmd->add_option("--event-tol", c.event_tol, "Event localization tolerance")
        ->envname("PENDULUM_EVENT_TOL")
        ->capture_default_str();
    cmd->add_option("--max-step", c.max_step, "Step size bound")->capture_default_str();
    cmd->add_option("--max-span", c.max_span, "Integration span bound (time or phi)")
        ->capture_default_str();
}

void add_output_flags(CLI::App* cmd, CommonOpts& o, const std::string& formats) {
    cmd->add_option("--out", o.out, "Output path ('-' = stdout)")->capture_default_str();
    cmd->add_option("--format", o.format, "Output format: " + formats)->capture_default_str();
}

// ---------------------------------------------------------------------------
// verify: the invariant battery
// ---------------------------------------------------------------------------

struct VerifyContext {
    std::optional<double> rel_tol, abs_tol, event_tol;

    /// Per-check pinned controls, overridden by explicit flags.
    IntegrationControls make(double rel, double abs = 1e-12, double event = 1e-10,
                             double span = 1e6) const {
        IntegrationControls c;
        c.rel_tol = rel_tol.value_or(rel);
        c.abs_tol = abs_tol.value_or(abs);
        c.event_tol = event_tol.value_or(event);
        c.max_span = span;
        return c;
    }
};

struct CheckResult {
    bool pass = false;
    std::string detail;
};

struct Check {
    std::string name;
    std::string what;
    std::function<CheckResult(const VerifyContext&)> run;
};

CheckResult check_vieta(const VerifyContext&) {
    std::mt19937 rng(12345);
    std::uniform_real_distribution<double> ub(0.0, 0.999), ug(0.0, 8.0);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const ModelParams p(ub(rng), ug(rng));
        const auto [l1, l2] = separatrix_slopes(p);
        const double c0 = std::cos(phi_zero(p));
        worst = std::max(worst, std::abs(l1 * l2 + c0));
        worst = std::max(worst, std::abs(l1 + l2 + p.gamma));
    }
    return {worst <= 1e-12, "max residual " + io::format_double(worst)};
}

CheckResult check_regions(const VerifyContext&) {
    std::mt19937 rng(777);
    std::uniform_real_distribution<double> uphi(-10.0, 10.0), uz(-6.0, 6.0),
        ub(0.0, 2.0), ug(0.05, 5.0);
    for (int i = 0; i < 10000; ++i) {
        const ModelParams p(ub(rng), ug(rng));
        const PhaseState s{uphi(rng), uz(rng)};
        const Region r = classify_region(s, p);
        const double sl = slope_field(s, p);
        bool ok = true;
        switch (r) {
        case Region::Lambda1:
        case Region::Lambda2: ok = sl > 0.0; break;
        case Region::Lambda3:
        case Region::Lambda4: ok = sl < 0.0; break;
        case Region::OnG: ok = std::abs(sl) <= 1e-6; break;
        case Region::OnAxis: ok = std::isinf(sl); break;
        case Region::AtFixedPoint: ok = std::isnan(sl) || std::isinf(sl); break;
        }
        if (!ok)
            return {false, "mismatch at phi=" + io::format_double(s.phi) +
                               " z=" + io::format_double(s.z)};
    }
    return {true, "10000 random points consistent"};
}

CheckResult check_rotation(const VerifyContext&) {
    std::mt19937 rng(4242);
    std::uniform_real_distribution<double> uphi(-10.0, 10.0), uz(-6.0, 6.0),
        ub(0.0, 2.0), ug(0.0, 5.0);
    for (int i = 0; i < 10000; ++i) {
        const ModelParams p(ub(rng), ug(rng));
        const PhaseState s{uphi(rng), uz(rng)};
        if (detail::field_norm_sq(s, p) == 0.0) continue;
        if (rotation_rate_gamma(s, p) > 0.0)
            return {false, "d(theta)/d(gamma) positive at a sample"};
        if (rotation_rate_beta(s, p) * s.z < 0.0)
            return {false, "sign of d(theta)/d(beta) disagrees with z"};
    }
    return {true, "10000 random points consistent"};
}

CheckResult check_periodicity(const VerifyContext&) {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> uphi(-20.0, 20.0), uz(-5.0, 5.0),
        ub(0.0, 2.0), ug(0.0, 5.0);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const ModelParams p(ub(rng), ug(rng));
        const PhaseState s{uphi(rng), uz(rng)};
        const FieldVector a = rhs(s, p);
        const FieldVector b = rhs({s.phi + 2.0 * pi, s.z}, p);
        worst = std::max(worst, std::abs(a.dz - b.dz));
        worst = std::max(worst, std::abs(a.dphi - b.dphi));
    }
    // exact up to the rounding of phi + 2*pi itself
    return {worst <= 1e-14, "max shift residual " + io::format_double(worst)};
}

CheckResult check_energy(const VerifyContext& v) {
    IntegrationControls c = v.make(1e-10);
    c.max_span = 100.0;
    const auto seg = integrate_time({0.0, 2.0}, ModelParams(0.0, 0.0), c);
    double drift = 0.0;
    for (const auto& s : seg.samples)
        drift = std::max(drift, std::abs(0.5 * s.state.z * s.state.z - std::cos(s.state.phi) - 1.0));
    return {drift < 1e-8, "drift " + io::format_double(drift) + " over span 100"};
}

CheckResult check_gamma0_return(const VerifyContext& v) {
    const IntegrationControls c = v.make(1e-12, 1e-14);
    double worst = 0.0;
    for (const auto [z0, beta] : {std::pair{2.0, 0.0}, {1.0, 0.5}, {0.7, 0.9}}) {
        const auto r = poincare_map(z0, ModelParams(beta, 0.0), c);
        if (!r.z) return {false, "lap fell to the axis"};
        const double expect = std::sqrt(z0 * z0 + 4.0 * pi * beta);
        worst = std::max(worst, std::abs(*r.z - expect) / expect);
    }
    return {worst <= 1e-9, "max relative residual " + io::format_double(worst)};
}

CheckResult check_graph_time(const VerifyContext& v) {
    IntegrationControls c = v.make(1e-13, 1e-10);
    const ModelParams p(1.5, 1.0);
    const double z0 = 2.0;
    double worst = 0.0;
    // march both forms to the same angles and compare heights
    PhaseState st{0.0, z0};
    double zg = z0;
    for (int k = 1; k <= 16; ++k) {
        const double target = k * pi / 4.0;
        EventSet ev;
        ev.lines.push_back({target, +1});
        c.max_span = 1e4;
        const auto tseg = integrate_time(st, p, c, ev, SampleMode::Endpoints);
        if (!std::holds_alternative<VerticalLineCrossing>(tseg.terminal))
            return {false, "time form missed the angle target"};
        st = terminal_sample(tseg).state;
        const auto gseg = integrate_graph(zg, (k - 1) * pi / 4.0, target, p, c);
        zg = terminal_sample(gseg).state.z;
        worst = std::max(worst, std::abs(zg - st.z));
    }
    const double bound = 10.0 * c.abs_tol;
    return {worst <= bound,
            "max height gap " + io::format_double(worst) + " vs bound " + io::format_double(bound)};
}

CheckResult check_event_localization(const VerifyContext& v) {
    const IntegrationControls c = v.make(1e-10);
    const auto shot = shoot_unstable_manifold(ModelParams(0.3, 0.8), 1e-7, c);
    if (shot.kind != ShootKind::HitAxis) return {false, "expected a subcritical landing"};
    const double zend = std::abs(terminal_sample(shot.trajectory).state.z);
    EventSet ev;
    ev.lines.push_back({2.0, +1});
    IntegrationControls c2 = c;
    c2.max_span = 100.0;
    const auto seg = integrate_time({0.0, 1.5}, ModelParams(1.2, 0.5), c2, ev);
    if (!std::holds_alternative<VerticalLineCrossing>(seg.terminal))
        return {false, "vertical line not reached"};
    const double gap = std::abs(terminal_sample(seg).state.phi - 2.0);
    const bool ok = zend <= c.event_tol && gap <= c.event_tol;
    return {ok, "axis |z| = " + io::format_double(zend) +
                    ", line |phi - target| = " + io::format_double(gap)};
}

CheckResult check_lemma1(const VerifyContext& v) {
    const IntegrationControls c = v.make(1e-10);
    int axis = 0, line = 0, saddle = 0;
    for (double gamma : {0.15, 0.5, 1.0, 1.6, 3.0, 6.0})
        for (double beta : {0.05, 0.3, 0.55, 0.8, 0.95, 0.999}) {
            const auto s = shoot_unstable_manifold(ModelParams(beta, gamma), 1e-7, c);
            if (s.kind == ShootKind::HitAxis) {
                const double p0 = std::asin(beta), p1 = pi - p0;
                if (s.phi_c < p0 - 1e-6 || s.phi_c > p1 + 1e-6)
                    return {false, "landing angle outside [phi0, phi1]"};
                ++axis;
            } else if (s.kind == ShootKind::HitLineK1) {
                if (!(s.z_c > 0.0 && s.z_c < (beta + 1.0) / gamma + 1e-6))
                    return {false, "line crossing outside (0, (beta+1)/gamma)"};
                ++line;
            } else {
                ++saddle;
            }
        }
    return {true, std::to_string(axis) + " axis / " + std::to_string(line) + " line / " +
                      std::to_string(saddle) + " saddle on a 6x6 grid"};
}

CheckResult check_lemma3(const VerifyContext& v) {
    const IntegrationControls c = v.make(1e-10);
    for (double gamma : {0.1, 0.5, 1.0, 2.0}) {
        const auto s = shoot_unstable_manifold(ModelParams(0.0, gamma), 1e-7, c);
        if (s.kind != ShootKind::HitAxis) return {false, "no axis landing at beta = 0"};
        if (!(s.phi_c >= -1e-9 && s.phi_c < pi))
            return {false, "landing angle outside [0, pi) at gamma " + io::format_double(gamma)};
    }
    return {true, "axis landings in [0, pi) for gamma in {0.1, 0.5, 1, 2}"};
}

CheckResult check_monotone_classification(const VerifyContext& v) {
    const IntegrationControls c = v.make(1e-10);
    int switches = 0;
    bool prev_super = false, first = true;
    for (int i = 0; i <= 16; ++i) {
        const double beta = 0.02 + (0.97 - 0.02) * i / 16.0;
        const auto s = shoot_unstable_manifold(ModelParams(beta, 0.8), 1e-7, c);
        const bool super = s.kind == ShootKind::HitLineK1;
        if (!first && super != prev_super) ++switches;
        prev_super = super;
        first = false;
    }
    return {switches == 1, std::to_string(switches) + " classification switch(es) along beta"};
}

CheckResult check_critical_monotone(const VerifyContext& v) {
    const IntegrationControls c = v.make(1e-10);
    double prev = -1.0;
    std::string vals;
    for (double gamma : {0.1, 0.3, 0.5, 0.7, 0.9, 1.1, 1.3}) {
        const double b0 = critical_beta(gamma, 1e-4, c).beta0;
        if (b0 < prev - 1e-4) return {false, "beta0 decreased along gamma"};
        prev = b0;
        vals += io::format_double(b0) + " ";
    }
    return {true, "beta0 nondecreasing: " + vals};
}

CheckResult check_urabe(const VerifyContext& v) {
    const IntegrationControls c = v.make(1e-10);
    const double b0 = critical_beta(1.193, 1e-4, c).beta0;
    return {std::abs(b0 - 1.0) <= 5e-3, "beta0(1.193) = " + io::format_double(b0)};
}

CheckResult check_plateau(const VerifyContext& v) {
    const IntegrationControls c = v.make(1e-10);
    for (double gamma : {1.5, 2.0}) {
        const double b0 = critical_beta(gamma, 1e-4, c).beta0;
        if (std::abs(b0 - 1.0) > 1e-3)
            return {false, "beta0(" + io::format_double(gamma) + ") = " + io::format_double(b0)};
    }
    return {true, "beta0 = 1 at gamma in {1.5, 2}"};
}

/// Energy-balance oracle for the vanishing-damping limit: over the
/// conservative connection z = sqrt(2(1 + cos phi)), drive work 2*pi*beta
/// balances dissipation gamma * Int z dphi, and the integral evaluates to 8.
double melnikov_integral() {
    const int n = 20000;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double phi = -pi + 2.0 * pi * i / n;
        const double w = (i == 0 || i == n) ? 0.5 : 1.0;
        acc += w * std::sqrt(2.0 * (1.0 + std::cos(phi)));
    }
    return acc * 2.0 * pi / n;
}

CheckResult check_melnikov(const VerifyContext& v) {
    const IntegrationControls c = v.make(1e-10);
    const double oracle = melnikov_integral() / (2.0 * pi);   // beta0/gamma as gamma -> 0
    const double gamma = 0.01;
    const double b0 = critical_beta(gamma, 1e-6, c).beta0;
    const double ratio = b0 / gamma / oracle;
    return {ratio >= 0.98 && ratio <= 1.02,
            "beta0/gamma = " + io::format_double(b0 / gamma) + ", oracle " +
                io::format_double(oracle)};
}

CheckResult check_lemma2(const VerifyContext& v) {
    const IntegrationControls c = v.make(1e-12, 1e-13);
    double worst = 0.0;
    for (const auto [beta, gamma] :
         {std::pair{2.0, 10.0}, {2.0, 1.5}, {1.2, 0.3}, {4.0, 2.0}, {1.1, 1.0}}) {
        const auto orbit = find_limit_cycle(ModelParams(beta, gamma), 1e-10, c, 1.0);
        const double target = 2.0 * pi * beta / gamma;
        worst = std::max(worst, std::abs(orbit.phase_integral - target) / target);
    }
    return {worst <= 1e-6, "max relative residual " + io::format_double(worst)};
}

CheckResult check_contraction(const VerifyContext& v) {
    const IntegrationControls c = v.make(1e-12, 1e-13);
    double worst = 0.0;
    for (const auto [beta, gamma] :
         {std::pair{2.0, 1.5}, {1.2, 0.3}, {4.0, 2.0}, {8.0, 2.0}}) {
        const auto orbit = find_limit_cycle(ModelParams(beta, gamma), 1e-10, c, 1.0);
        const double mult = std::exp(-gamma * orbit.period_T);
        worst = std::max(worst, std::abs(orbit.contraction - mult) / mult);
    }
    return {worst <= 1e-4, "max relative gap " + io::format_double(worst)};
}

CheckResult check_uniqueness(const VerifyContext& v) {
    const IntegrationControls c = v.make(1e-12, 1e-13);
    const double tol = 1e-10;
    for (const auto [beta, gamma] : {std::pair{2.0, 1.5}, {1.5, 0.6}, {4.0, 2.0}}) {
        const ModelParams p(beta, gamma);
        const double z_high = (beta + 1.0) / gamma;
        const auto from_above = iterate_to_fixed_point(z_high, p, tol, c);
        const auto from_below = iterate_to_fixed_point(0.3 * (beta - 1.0) / gamma + 0.05, p, tol, c);
        if (!from_above || !from_below) return {false, "an iteration fell to the axis"};
        if (std::abs(*from_above - *from_below) > 10.0 * tol)
            return {false, "brackets disagree by " +
                               io::format_double(std::abs(*from_above - *from_below))};
    }
    return {true, "two brackets agree within 10x tolerance on 3 cases"};
}

CheckResult check_cycle_shape(const VerifyContext& v) {
    const IntegrationControls c = v.make(1e-12, 1e-13);
    const double tol = 1e-10;
    for (const auto [beta, gamma] : {std::pair{2.0, 1.5}, {1.05, 1.5}, {2.0, 10.0}}) {
        const auto orbit = find_limit_cycle(ModelParams(beta, gamma), tol, c, 1.0);
        for (const auto& s : orbit.samples)
            if (!(s.z > 0.0)) return {false, "orbit sample not strictly positive"};
        const auto relap = poincare_map(orbit.z_start, ModelParams(beta, gamma), c);
        if (!relap.z || std::abs(*relap.z - orbit.z_start) > 10.0 * tol)
            return {false, "second lap missed the start height"};
    }
    return {true, "positivity and re-lap closure on 3 cases"};
}

CheckResult check_large_gamma(const VerifyContext& v) {
    const IntegrationControls c = v.make(1e-12, 1e-13);
    const double beta = 2.0, gamma = 10.0;
    const auto orbit = find_limit_cycle(ModelParams(beta, gamma), 1e-10, c, 1.0);
    double worst = 0.0;
    for (const auto& s : orbit.samples)
        worst = std::max(worst, std::abs(s.z - (beta - std::sin(s.phi)) / gamma));
    const double bound = 2.0 * (beta + 1.0) / (gamma * gamma * gamma);
    return {worst <= bound, "max gap to the nullcline " + io::format_double(worst) +
                                " vs bound " + io::format_double(bound)};
}

CheckResult check_theorem_c(const VerifyContext& v) {
    const IntegrationControls c = v.make(1e-10);
    const double tol = 1e-4;
    for (double gamma : {0.3, 0.7, 1.1, 1.6}) {
        const double b0 = critical_beta(gamma, tol, c).beta0;
        for (double beta : {0.1, 0.4, 0.7, 0.95, 1.2}) {
            if (std::abs(beta - b0) <= 2.0 * tol) continue;   // boundary band excluded
            const bool expect = beta > b0;
            const bool got = probe_cycle(ModelParams(beta, gamma), 1e-8, c).has_value();
            if (got != expect)
                return {false, "existence mismatch at gamma=" + io::format_double(gamma) +
                                   " beta=" + io::format_double(beta)};
        }
    }
    return {true, "existence matches sign(beta - beta0) on a 4x5 grid"};
}

CheckResult check_no_first_kind(const VerifyContext& v) {
    IntegrationControls c = v.make(1e-10);
    c.max_span = 2e4;
    const auto a = verify_no_first_kind_cycle(ModelParams(0.5, 1.0), c);
    const auto b = verify_no_first_kind_cycle(ModelParams(1.2, 1.0), c);
    const auto d = verify_no_first_kind_cycle(ModelParams(0.0, 0.1), c);
    const bool ok = a.pass && b.pass && b.vacuous && d.pass;
    return {ok, "divergence -gamma; sink orbits decay; beta > 1 vacuous"};
}

CheckResult check_depinning(const VerifyContext& v) {
    const IntegrationControls c = v.make(1e-10);
    const auto grid = parse_grid("0.5:1.4:0.1");
    const auto rows = velocity_curve(2.0, grid, 1e-5, c);
    double first_running = -1.0;
    for (const auto& r : rows) {
        if (r.cycle_found != (r.mean_velocity > 0.0)) return {false, "velocity/cycle mismatch"};
        if (r.cycle_found && first_running < 0.0) first_running = r.beta;
    }
    if (!(first_running > 1.0 && first_running <= 1.1 + 1e-9))
        return {false, "depinning drive " + io::format_double(first_running) +
                           " does not bracket the threshold"};
    return {true, "pinned through beta = 1, running from " + io::format_double(first_running)};
}

CheckResult check_determinism(const VerifyContext& v) {
    const IntegrationControls c = v.make(1e-10);
    const auto grid = parse_grid("0.2:1.2:0.25");
    const auto a = critical_curve(grid, 1e-4, c, 1);
    const auto b = critical_curve(grid, 1e-4, c, 4);
    const std::string sa = io::sweep_csv(a), sb = io::sweep_csv(b);
    return {sa == sb, sa == sb ? "worker counts 1 and 4 agree byte-for-byte"
                               : "worker counts disagree"};
}

std::vector<Check> make_checks() {
    return {
        {"vieta", "saddle slope product/sum identities", check_vieta},
        {"regions", "slope sign matches the region decomposition", check_regions},
        {"rotation", "rotation rates are one-signed", check_rotation},
        {"periodicity", "field is 2*pi-periodic in phi", check_periodicity},
        {"energy", "conservative energy drift stays below 1e-8", check_energy},
        {"gamma0-return", "undamped return map satisfies z^2 = z0^2 + 4*pi*beta",
         check_gamma0_return},
        {"graph-time", "graph and time integrations agree pointwise", check_graph_time},
        {"events", "terminal states satisfy their event equations", check_event_localization},
        {"lemma1", "shot trichotomy with the stated bounds", check_lemma1},
        {"lemma3", "undriven shots land between the sink and the right saddle", check_lemma3},
        {"monotone", "single sub/supercritical switch along beta", check_monotone_classification},
        {"critical-monotone", "beta0 nondecreasing in gamma", check_critical_monotone},
        {"urabe", "beta0(1.193) = 1 within 5e-3", check_urabe},
        {"plateau", "beta0 = 1 in the over-damped regime", check_plateau},
        {"melnikov", "small-gamma threshold matches the energy-balance oracle", check_melnikov},
        {"lemma2", "cycle integral equals 2*pi*beta/gamma", check_lemma2},
        {"contraction", "return-map derivative equals exp(-gamma*T)", check_contraction},
        {"uniqueness", "two brackets converge to one cycle", check_uniqueness},
        {"cycle-shape", "cycle positivity and re-lap closure", check_cycle_shape},
        {"large-gamma", "cycle hugs the nullcline at strong damping", check_large_gamma},
        {"theorem-c", "cycle existence matches sign(beta - beta0)", check_theorem_c},
        {"no-first-kind", "no contractible cycles: divergence and sink decay",
         check_no_first_kind},
        {"depinning", "velocity curve pinned below threshold, running above", check_depinning},
        {"determinism", "sweep output independent of worker count", check_determinism},
    };
}

int run_verify(const VerifyContext& ctx, const std::string& only, bool list_only) {
    auto checks = make_checks();
    if (list_only) {
        for (const auto& c : checks) std::printf("%-18s %s\n", c.name.c_str(), c.what.c_str());
        return exit_ok;
    }
    std::vector<Check> selected;
    if (only.empty()) {
        selected = std::move(checks);
    } else {
        std::stringstream ss(only);
        std::string tok;
        std::vector<std::string> wanted;
        while (std::getline(ss, tok, ',')) {
            if (!tok.empty()) wanted.push_back(tok);
        }
        for (const auto& c : checks)
            for (const auto& w : wanted)
                if (c.name.find(w) != std::string::npos) {
                    selected.push_back(c);
                    break;
                }
        if (selected.empty()) throw UsageError("--only matched no checks: '" + only + "'");
    }
    int failures = 0;
    for (const auto& c : selected) {
        CheckResult r;
        try {
            r = c.run(ctx);
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        std::printf("[%s] %-18s %s\n", r.pass ? "PASS" : "FAIL", c.name.c_str(),
                    r.detail.c_str());
        if (!r.pass) ++failures;
    }
    std::printf("%zu checks, %d failure(s)\n", selected.size(), failures);
    return failures == 0 ? exit_ok : exit_verify;
}

// ---------------------------------------------------------------------------

int dispatch(int argc, char** argv) {
    CLI::App app{"Phase-plane analysis of the driven damped pendulum "
                 "phi'' + gamma*phi' + sin(phi) = beta on the cylinder.\n"
                 "Angles are radians; beta (drive) and gamma (damping) are dimensionless."};
    app.require_subcommand(1);

    // equilibria ------------------------------------------------------------
    auto* eq_cmd = app.add_subcommand(
        "equilibria", "Fixed points on the phi-axis with type and separatrix slopes");
    struct {
        double beta = 0.0, gamma = 0.0;
        std::string nrange = "0..1";
        CommonOpts o;
    } eq;
    eq_cmd->add_option("--beta", eq.beta, "Drive torque (dimensionless)")->required();
    eq_cmd->add_option("--gamma", eq.gamma, "Damping coefficient (dimensionless)")->required();
    eq_cmd->add_option("--n", eq.nrange, "Index range lo..hi of phi_n = n*pi + (-1)^n*arcsin(beta)")
        ->capture_default_str();
    add_output_flags(eq_cmd, eq.o, "csv|json");
    add_tolerance_flags(eq_cmd, eq.o.controls);

    // critical ----------------------------------------------------------------
    auto* cr_cmd = app.add_subcommand(
        "critical", "Critical drive beta0(gamma) separating pinned from running states");
    struct {
        double gamma = 0.0, tol = 1e-6, offset = default_shoot_offset;
        CommonOpts o;
    } cr;
    cr_cmd->add_option("--gamma", cr.gamma, "Damping coefficient (> 0, dimensionless)")
        ->required();
    cr_cmd->add_option("--tol", cr.tol, "Bisection bracket tolerance on beta")
        ->capture_default_str();
    cr_cmd->add_option("--offset", cr.offset, "Shot displacement along the unstable eigenvector")
        ->capture_default_str();
    add_output_flags(cr_cmd, cr.o, "csv|json");
    add_tolerance_flags(cr_cmd, cr.o.controls);

    // cycle ---------------------------------------------------------------
    auto* cy_cmd = app.add_subcommand(
        "cycle", "Unique stable rotational limit cycle for drives above critical");
    struct {
        double beta = 0.0, gamma = 0.0, tol = 1e-6;
        int grid = default_orbit_grid;
        CommonOpts o;
    } cy;
    cy_cmd->add_option("--beta", cy.beta, "Drive torque (dimensionless)")->required();
    cy_cmd->add_option("--gamma", cy.gamma, "Damping coefficient (> 0, dimensionless)")
        ->required();
    cy_cmd->add_option("--tol", cy.tol, "Fixed-point tolerance on the section height")
        ->capture_default_str();
    cy_cmd->add_option("--grid", cy.grid, "Samples per period in the orbit table")
        ->capture_default_str();
    add_output_flags(cy_cmd, cy.o, "csv|json");
    add_tolerance_flags(cy_cmd, cy.o.controls);

    // sweep -----------------------------------------------------------------
    auto* sw_cmd = app.add_subcommand("sweep", "Grid drivers with per-row error capture");
    sw_cmd->require_subcommand(1);
    struct {
        std::string gamma_grid, beta_grid;
        double gamma = 0.0, tol = 1e-6;
        int workers = 1;
        std::string hysteresis;
        CommonOpts o;
    } sw;
    auto* sw_cr = sw_cmd->add_subcommand("critical", "beta0 over a damping grid");
    sw_cr->add_option("--gamma", sw.gamma_grid, "Damping grid start:stop:step (radians-free)")
        ->required();
    sw_cr->add_option("--tol", sw.tol, "Bisection tolerance")->capture_default_str();
    sw_cr->add_option("--workers", sw.workers, "Worker threads (rows stay in grid order)")
        ->envname("PENDULUM_WORKERS")
        ->capture_default_str();
    add_output_flags(sw_cr, sw.o, "csv|json");
    add_tolerance_flags(sw_cr, sw.o.controls);

    auto* sw_ve = sw_cmd->add_subcommand("velocity", "Mean rotation velocity over a drive grid");
    sw_ve->add_option("--gamma", sw.gamma, "Damping coefficient (> 0)")->required();
    sw_ve->add_option("--beta", sw.beta_grid, "Drive grid start:stop:step")->required();
    sw_ve->add_option("--tol", sw.tol, "Cycle solver tolerance")->capture_default_str();
    sw_ve->add_option("--workers", sw.workers, "Worker threads (rows stay in grid order)")
        ->envname("PENDULUM_WORKERS")
        ->capture_default_str();
    sw_ve->add_option("--hysteresis", sw.hysteresis,
                      "Continuation mode 'up' or 'down' (exploratory; default independent rows)");
    add_output_flags(sw_ve, sw.o, "csv|json");
    add_tolerance_flags(sw_ve, sw.o.controls);

    // portrait ----------------------------------------------------------------
    auto* po_cmd = app.add_subcommand(
        "portrait", "Trajectory bundle over the main interval with overlays");
    struct {
        double beta = 0.0, gamma = 0.0, span = 1e4, offset = 1e-3;
        std::string seeds, overlay = "g,equilibria,shot";
        CommonOpts o;
    } po;
    po.o.format = "svg";
    po_cmd->add_option("--beta", po.beta, "Drive torque (dimensionless)")->required();
    po_cmd->add_option("--gamma", po.gamma, "Damping coefficient (dimensionless)")->required();
    po_cmd->add_option("--seeds", po.seeds, "Seed list 'phi,z;phi,z;...' (radians; default spread)");
    po_cmd->add_option("--overlay", po.overlay, "Overlays to keep: g,equilibria,shot")
        ->capture_default_str();
    po_cmd->add_option("--span", po.span, "Time span bound per seed")->capture_default_str();
    po_cmd->add_option("--offset", po.offset, "Separatrix shot offset")->capture_default_str();
    add_output_flags(po_cmd, po.o, "svg|csv|json");
    add_tolerance_flags(po_cmd, po.o.controls);

    // verify ------------------------------------------------------------------
    auto* ve_cmd = app.add_subcommand(
        "verify", "Run the named-invariant battery; exit 0 iff every check passes");
    struct {
        std::string only;
        bool list = false;
        double rel = 0, abs = 0, event = 0;
    } ve;
    ve_cmd->add_option("--only", ve.only, "Comma-separated name filter (substring match)");
    ve_cmd->add_flag("--list", ve.list, "List check names and exit");
    auto* ve_rel = ve_cmd->add_option("--rel-tol", ve.rel, "Override relative tolerance")
                       ->envname("PENDULUM_REL_TOL");
    auto* ve_abs = ve_cmd->add_option("--abs-tol", ve.abs, "Override absolute tolerance")
                       ->envname("PENDULUM_ABS_TOL");
    auto* ve_event = ve_cmd->add_option("--event-tol", ve.event, "Override event tolerance")
                         ->envname("PENDULUM_EVENT_TOL");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    }

    if (eq_cmd->parsed()) {
        const auto [lo, hi] = parse_index_range(eq.nrange);
        const ModelParams p(eq.beta, eq.gamma);
        const auto pts = equilibria(p, lo, hi);
        io::RunMeta meta{"equilibria", eq.beta, eq.gamma, eq.o.controls, std::nullopt, 1};
        if (eq.o.format == "csv")
            write_output(eq.o.out, io::equilibria_csv(pts));
        else if (eq.o.format == "json")
            write_output(eq.o.out, io::equilibria_json(pts, meta));
        else
            throw UsageError("equilibria: format must be csv or json");
        return exit_ok;
    }

    if (cr_cmd->parsed()) {
        const auto res = critical_beta(cr.gamma, cr.tol, cr.o.controls, cr.offset);
        SweepRow row;
        row.gamma = res.gamma;
        row.beta0 = res.beta0;
        row.bracket_width = res.bracket_width;
        row.evaluations = res.evaluations;
        const std::vector<SweepRow> rows{row};
        io::RunMeta meta{"critical", std::nullopt, cr.gamma, cr.o.controls, cr.tol, 1};
        if (cr.o.format == "csv")
            write_output(cr.o.out, io::sweep_csv(rows));
        else if (cr.o.format == "json")
            write_output(cr.o.out, io::sweep_json(rows, meta));
        else
            throw UsageError("critical: format must be csv or json");
        return exit_ok;
    }

    if (cy_cmd->parsed()) {
        const ModelParams p(cy.beta, cy.gamma);
        const auto orbit = find_limit_cycle(p, cy.tol, cy.o.controls, std::nullopt, cy.grid);
        io::RunMeta meta{"cycle", cy.beta, cy.gamma, cy.o.controls, cy.tol, 1};
        if (cy.o.format == "csv")
            write_output(cy.o.out, io::orbit_csv(orbit, cy.beta, cy.gamma));
        else if (cy.o.format == "json")
            write_output(cy.o.out, io::orbit_json(orbit, meta));
        else
            throw UsageError("cycle: format must be csv or json");
        return exit_ok;
    }

    if (sw_cr->parsed()) {
        const auto grid = parse_grid(sw.gamma_grid);
        if (grid.empty()) throw UsageError("sweep critical: empty gamma grid");
        const auto rows = critical_curve(grid, sw.tol, sw.o.controls, sw.workers);
        io::RunMeta meta{"sweep critical", std::nullopt, std::nullopt, sw.o.controls, sw.tol,
                         sw.workers};
        if (sw.o.format == "csv")
            write_output(sw.o.out, io::sweep_csv(rows));
        else if (sw.o.format == "json")
            write_output(sw.o.out, io::sweep_json(rows, meta));
        else
            throw UsageError("sweep: format must be csv or json");
        return exit_ok;
    }

    if (sw_ve->parsed()) {
        const auto grid = parse_grid(sw.beta_grid);
        if (grid.empty()) throw UsageError("sweep velocity: empty beta grid");
        VelocityMode mode = VelocityMode::Independent;
        if (sw.hysteresis == "up")
            mode = VelocityMode::UpSweep;
        else if (sw.hysteresis == "down")
            mode = VelocityMode::DownSweep;
        else if (!sw.hysteresis.empty())
            throw UsageError("--hysteresis must be 'up' or 'down'");
        const auto rows = velocity_curve(sw.gamma, grid, sw.tol, sw.o.controls, sw.workers, mode);
        io::RunMeta meta{"sweep velocity", std::nullopt, sw.gamma, sw.o.controls, sw.tol,
                         sw.workers};
        if (sw.o.format == "csv")
            write_output(sw.o.out, io::sweep_csv(rows));
        else if (sw.o.format == "json")
            write_output(sw.o.out, io::sweep_json(rows, meta));
        else
            throw UsageError("sweep: format must be csv or json");
        return exit_ok;
    }

    if (po_cmd->parsed()) {
        const ModelParams p(po.beta, po.gamma);
        IntegrationControls c = po.o.controls;
        c.max_span = po.span;

        std::vector<PhaseState> seeds;
        if (!po.seeds.empty()) {
            seeds = parse_seeds(po.seeds);
        } else {
            const double p0 = (po.beta <= 1.0) ? std::asin(po.beta) : 0.5 * pi;
            const double z_half =
                (po.gamma > 0.0) ? (po.beta + 1.0) / po.gamma + 1.0 : 3.0;
            for (int k = 1; k <= 4; ++k) {
                seeds.push_back({-pi - p0 + 0.05, 0.25 * k * z_half});
                seeds.push_back({pi - p0 - 0.05, -0.25 * k * z_half});
            }
        }

        auto pp = phase_portrait(p, seeds, c, po.offset);
        const bool want_g = po.overlay.find('g') != std::string::npos;
        const bool want_eq = po.overlay.find("equilibria") != std::string::npos;
        const bool want_shot = po.overlay.find("shot") != std::string::npos;
        if (!want_g) pp.nullcline.clear();
        if (!want_eq) pp.fixed_points.clear();
        if (!want_shot) pp.separatrix_shot.reset();

        io::RunMeta meta{"portrait", po.beta, po.gamma, c, std::nullopt, 1};
        if (po.o.format == "svg")
            write_output(po.o.out, io::portrait_svg(pp));
        else if (po.o.format == "csv")
            write_output(po.o.out, io::portrait_csv(pp));
        else if (po.o.format == "json")
            write_output(po.o.out, io::portrait_json(pp, meta));
        else
            throw UsageError("portrait: format must be svg, csv or json");
        return exit_ok;
    }

    if (ve_cmd->parsed()) {
        VerifyContext ctx;
        if (ve_rel->count()) ctx.rel_tol = ve.rel;
        if (ve_abs->count()) ctx.abs_tol = ve.abs;
        if (ve_event->count()) ctx.event_tol = ve.event;
        return run_verify(ctx, ve.only, ve.list);
    }

    return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return exit_usage;
    } catch (const DomainError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return exit_domain;
    } catch (const NoCycleError& e) {
        std::cerr << "no cycle: " << e.what() << "\n";
        return exit_domain;
    } catch (const DegenerateCycleError& e) {
        std::cerr << "degenerate: " << e.what() << "\n";
        return exit_domain;
    } catch (const StiffnessFailure& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return exit_numeric;
    } catch (const ClassificationAmbiguous& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return exit_numeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_numeric;
    }
}
