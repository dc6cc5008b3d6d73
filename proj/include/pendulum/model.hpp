#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "pendulum/errors.hpp"

// Closed-form layer for the driven damped pendulum
//
//     phi'' + gamma * phi' + sin(phi) = beta
//
// written as the phase-plane field  phi' = z,  z' = beta - sin(phi) - gamma*z.
// Everything in this header is a pure function of its arguments.

namespace pendulum {

inline constexpr double pi = std::numbers::pi;

/// One vector-field instance: drive torque and friction, both dimensionless.
struct ModelParams {
    double beta  = 0.0;
    double gamma = 0.0;

    ModelParams(double beta_, double gamma_) : beta(beta_), gamma(gamma_) {
        if (!(std::isfinite(beta) && std::isfinite(gamma)))
            throw DomainError("ModelParams: beta and gamma must be finite");
        if (beta < 0.0) throw DomainError("ModelParams: beta must be >= 0");
        if (gamma < 0.0) throw DomainError("ModelParams: gamma must be >= 0");
    }
};

/// Point on the universal cover of the cylinder: phi unbounded, z = dphi/dt.
struct PhaseState {
    double phi = 0.0;
    double z   = 0.0;
};

/// Field value at a state: dphi = z by construction.
struct FieldVector {
    double dphi = 0.0;
    double dz   = 0.0;
};

/// Reduce an angle to the principal interval (-pi, pi].
inline double reduce_phi(double phi) {
    double r = std::remainder(phi, 2.0 * pi);
    if (r <= -pi) r += 2.0 * pi;
    return r;
}

/// Two states are the same point of the cylinder iff phi differs by a
/// multiple of 2*pi and z matches.
inline bool cylinder_equivalent(const PhaseState& a, const PhaseState& b,
                                double tol = 1e-12) {
    return std::abs(reduce_phi(a.phi - b.phi)) <= tol &&
           std::abs(a.z - b.z) <= tol;
}

inline FieldVector rhs(const PhaseState& s, const ModelParams& p) {
    return {s.z, p.beta - std::sin(s.phi) - p.gamma * s.z};
}

/// arcsin(beta), the offset of every equilibrium from a multiple of pi.
/// Requires beta <= 1.
inline double phi_zero(const ModelParams& p) {
    if (p.beta > 1.0)
        throw DomainError("phi_zero: no equilibria exist for beta > 1");
    return std::asin(p.beta);
}

enum class FixedPointKind { Saddle, Sink, Center, SaddleNode };

/// Equilibrium on the phi-axis: phi_n = n*pi + (-1)^n * arcsin(beta).
struct FixedPoint {
    double phi = 0.0;
    FixedPointKind kind = FixedPointKind::Sink;
    int index = 0;   ///< n in the phi_n formula
    /// (lambda1, lambda2) separatrix slopes, present iff kind == Saddle.
    std::optional<std::pair<double, double>> slopes;
    /// (gamma/2)^2 - cos(phi); for sinks, negative means spiral, positive
    /// means node. The distinction does not affect attractivity.
    double discriminant = 0.0;
};

/// Slopes of the two separatrices at a saddle:
/// lambda = -gamma/2 +- sqrt((gamma/2)^2 + cos(arcsin beta)).
/// lambda1 > 0 > lambda2 whenever beta < 1; at beta = 1 they degenerate to
/// (0, -gamma), the neutral and strong directions of the saddle-node.
inline std::pair<double, double> separatrix_slopes(const ModelParams& p) {
    if (p.beta > 1.0)
        throw DomainError("separatrix_slopes: no saddle exists for beta > 1");
    const double c = std::cos(phi_zero(p));
    const double half = 0.5 * p.gamma;
    const double root = std::sqrt(half * half + c);
    return {-half + root, -half - root};
}

/// All equilibria with index n in [n_lo, n_hi]. Empty for beta > 1.
/// For beta = 1 consecutive indices coincide pairwise into saddle-nodes at
/// pi/2 + 2k*pi; coincident pairs are emitted once.
inline std::vector<FixedPoint> equilibria(const ModelParams& p, int n_lo, int n_hi) {
    std::vector<FixedPoint> out;
    if (p.beta > 1.0 || n_lo > n_hi) return out;

    const double p0 = phi_zero(p);
    const bool degenerate = (p.beta == 1.0);

    for (int n = n_lo; n <= n_hi; ++n) {
        const bool odd = (n % 2) != 0;
        const double phi = n * pi + (odd ? -p0 : p0);
        FixedPoint fp;
        fp.phi = phi;
        fp.index = n;
        const double c = std::cos(phi);      // -cos(p0) at saddles, +cos(p0) at sinks
        fp.discriminant = 0.25 * p.gamma * p.gamma - c;
        if (degenerate) {
            // phi_{2k} == phi_{2k+1}: keep the first of each coincident pair.
            if (!out.empty() && std::abs(out.back().phi - phi) < 1e-12) continue;
            fp.kind = FixedPointKind::SaddleNode;
        } else if (odd) {
            fp.kind = FixedPointKind::Saddle;
            fp.slopes = separatrix_slopes(p);
        } else {
            fp.kind = (p.gamma > 0.0) ? FixedPointKind::Sink : FixedPointKind::Center;
        }
        out.push_back(fp);
    }
    return out;
}

/// Is (phi, 0) an equilibrium, i.e. sin(phi) = beta within tol?
inline bool on_equilibrium(double phi, const ModelParams& p, double tol = 1e-12) {
    return std::abs(std::sin(phi) - p.beta) <= tol;
}

/// Trajectory slope dz/dphi = (beta - sin phi)/z - gamma.
/// Sentinels: +infinity on the axis away from equilibria (vertical tangent),
/// quiet NaN at equilibria (no trajectory through the point).
inline double slope_field(const PhaseState& s, const ModelParams& p) {
    if (s.z == 0.0) {
        if (on_equilibrium(s.phi, p))
            return std::numeric_limits<double>::quiet_NaN();
        return std::numeric_limits<double>::infinity();
    }
    return (p.beta - std::sin(s.phi)) / s.z - p.gamma;
}

/// z-nullcline G: z = (beta - sin phi)/gamma. Requires gamma > 0.
inline double curve_g(double phi, const ModelParams& p) {
    if (p.gamma <= 0.0)
        throw DomainError("curve_g: nullcline undefined for gamma = 0");
    return (p.beta - std::sin(phi)) / p.gamma;
}

enum class Region {
    Lambda1,       ///< 0 < z < G: z rising
    Lambda2,       ///< G < z < 0: z rising
    Lambda3,       ///< z > 0 and z > G: z falling
    Lambda4,       ///< z < 0 and z < G: z falling
    OnG,
    OnAxis,
    AtFixedPoint,
};

/// Four-region decomposition of the plane by the nullcline G and the axis.
/// The band tolerance is absolute in z.
inline Region classify_region(const PhaseState& s, const ModelParams& p,
                              double tol = 1e-9) {
    const double g = curve_g(s.phi, p);   // throws for gamma = 0
    if (std::abs(s.z) <= tol && std::abs(p.beta - std::sin(s.phi)) <= tol)
        return Region::AtFixedPoint;
    if (std::abs(s.z) <= tol) return Region::OnAxis;
    if (std::abs(s.z - g) <= tol) return Region::OnG;
    if (s.z > 0.0) return (s.z < g) ? Region::Lambda1 : Region::Lambda3;
    return (s.z > g) ? Region::Lambda2 : Region::Lambda4;
}

namespace detail {
/// Squared distance from the field-vector origin: z^2 + Q^2. Zero exactly
/// at equilibria.
inline double field_norm_sq(const PhaseState& s, const ModelParams& p) {
    const FieldVector f = rhs(s, p);
    return f.dphi * f.dphi + f.dz * f.dz;
}
} // namespace detail

/// d(theta)/d(gamma) of the field direction: -z^2 / (z^2 + Q^2) <= 0.
/// Increasing the friction rotates every vector clockwise (or leaves it
/// fixed on the axis), which is what makes the family a rotated field.
inline double rotation_rate_gamma(const PhaseState& s, const ModelParams& p) {
    const double d = detail::field_norm_sq(s, p);
    if (d == 0.0)
        throw DomainError("rotation_rate_gamma: undefined at an equilibrium");
    return -(s.z * s.z) / d;
}

/// d(theta)/d(beta) of the field direction: z / (z^2 + Q^2); its sign is the
/// sign of z, so raising the drive rotates the upper half-plane field
/// anticlockwise. This one-signedness is what justifies bisection on beta.
inline double rotation_rate_beta(const PhaseState& s, const ModelParams& p) {
    const double d = detail::field_norm_sq(s, p);
    if (d == 0.0)
        throw DomainError("rotation_rate_beta: undefined at an equilibrium");
    return s.z / d;
}

} // namespace pendulum
