#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "rdgd/errors.hpp"

namespace rdgd {

enum class BoundVariant { Fresh, Stale, CGE, StochasticBS, StochasticCS, StochasticDS };

inline std::string_view to_string(BoundVariant v) {
    switch (v) {
        case BoundVariant::Fresh: return "fresh";
        case BoundVariant::Stale: return "stale";
        case BoundVariant::CGE: return "cge";
        case BoundVariant::StochasticBS: return "stochastic_bs";
        case BoundVariant::StochasticCS: return "stochastic_cs";
        case BoundVariant::StochasticDS: return "stochastic_ds";
    }
    return "?";
}

enum class StochasticProblem { BS, CS, DS };

inline std::string_view to_string(StochasticProblem p) {
    switch (p) {
        case StochasticProblem::BS: return "BS";
        case StochasticProblem::CS: return "CS";
        case StochasticProblem::DS: return "DS";
    }
    return "?";
}

inline StochasticProblem parse_problem(std::string_view s) {
    if (s == "BS" || s == "bs") return StochasticProblem::BS;
    if (s == "CS" || s == "cs") return StochasticProblem::CS;
    if (s == "DS" || s == "ds") return StochasticProblem::DS;
    throw ConfigError("unknown stochastic problem '" + std::string(s) + "' (expected BS | CS | DS)");
}

/// Closed-form constants of one convergence guarantee. Fields that do not
/// apply to the variant stay empty.
struct TheoremBounds {
    BoundVariant variant = BoundVariant::Fresh;
    bool feasible = false;
    double alpha = 0.0;
    std::optional<double> radius;  // D (fresh, stale) or D* (cge); infinite when infeasible
    std::optional<double> xi;
    std::optional<double> delta;
    std::optional<double> eta;
    std::optional<double> eta_bar;
    std::optional<double> rho;
    std::optional<double> M;
    std::optional<double> Gamma;
    std::optional<double> asymptotic_radius;  // M / (1 - rho), squared distance

    /// Right-hand side of the stochastic bound at step t+1 given ||x^0 - x_H||^2.
    double expected_sq_distance_bound(long t_plus_1, double initial_sq_distance) const {
        if (!rho || !M) throw PreconditionError("TheoremBounds: not a stochastic variant");
        const double rt = std::pow(*rho, static_cast<double>(t_plus_1));
        // (1 - rho^k)/(1 - rho) as a finite geometric sum near rho = 1.
        const double geom = *rho == 1.0 ? static_cast<double>(t_plus_1) : (1.0 - rt) / (1.0 - *rho);
        return rt * initial_sq_distance + geom * *M;
    }
};

namespace detail {
inline void require_positive_curvature(double mu, double gamma, const char* who) {
    if (!(mu > 0.0) || !(gamma > 0.0)) throw PreconditionError(std::string(who) + ": need mu, gamma > 0");
}
inline constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace detail

/// alpha = 1 - (r/n)(mu/gamma), D = 2 r mu eps / (alpha gamma).
inline TheoremBounds bounds_fresh(std::size_t n, std::size_t r, double mu, double gamma, double epsilon) {
    detail::require_positive_curvature(mu, gamma, "bounds_fresh");
    const double nn = static_cast<double>(n), rr = static_cast<double>(r);
    TheoremBounds b;
    b.variant = BoundVariant::Fresh;
    b.alpha = 1.0 - (rr / nn) * (mu / gamma);
    b.feasible = b.alpha > 0.0;
    b.radius = b.feasible ? 2.0 * rr * mu * epsilon / (b.alpha * gamma) : detail::kInf;
    return b;
}

/// Stale-gradient variant: the same alpha and D as bounds_fresh.
inline TheoremBounds bounds_stale(std::size_t n, std::size_t r, double mu, double gamma, double epsilon) {
    auto b = bounds_fresh(n, r, mu, gamma, epsilon);
    b.variant = BoundVariant::Stale;
    return b;
}

/// Resilience margin of CGE with m = n - r inputs, from the identity
/// (n - f) gamma - 2 (f + r) mu = m gamma alpha.
inline double cge_alpha(std::size_t n, std::size_t f, std::size_t r, double mu, double gamma) {
    const double m = static_cast<double>(n - r);
    return ((static_cast<double>(n) - static_cast<double>(f)) * gamma -
            2.0 * static_cast<double>(f + r) * mu) / (m * gamma);
}

inline TheoremBounds bounds_cge(std::size_t n, std::size_t f, std::size_t r, double mu, double gamma,
                                     double epsilon, double delta) {
    detail::require_positive_curvature(mu, gamma, "bounds_cge");
    if (!(delta > 0.0)) throw PreconditionError("bounds_cge: need delta > 0");
    if (r >= n || f >= n - r) throw PreconditionError("bounds_cge: need f < n - r");
    TheoremBounds b;
    b.variant = BoundVariant::CGE;
    b.delta = delta;
    b.alpha = cge_alpha(n, f, r, mu, gamma);
    b.feasible = b.alpha > 0.0;
    if (b.feasible) {
        const double m = static_cast<double>(n - r);
        const double core = 4.0 * mu * static_cast<double>(f + r) * epsilon / (b.alpha * gamma);
        b.radius = core + delta;
        b.xi = b.alpha * m * gamma * delta * (core + delta);
    } else {
        b.radius = detail::kInf;
    }
    return b;
}

namespace detail {

// Every stochastic variant has rho = 1 - curvature * eta * (eta_bar - eta)
// with eta_bar = 2 K / curvature; the expanded per-variant formulas are this
// polynomial multiplied out.
struct RateShape {
    double K;          // n gamma alpha, or m gamma alpha for DS
    double curvature;  // (#summed gradients)^2 mu^2
};

inline double rho_from_shape(const RateShape& s, double eta) {
    const double eta_bar = 2.0 * s.K / s.curvature;
    return 1.0 - s.curvature * eta * (eta_bar - eta);
}

}  // namespace detail

/// Constant-step stochastic guarantee for problems BS, CS, DS. Gamma is
/// max_{x in W} ||x - x_H||. DS uses the proof-consistent alpha
/// 1 - (f - r)/m - (2 mu / gamma)(f + r)/m, m = n - r.
inline TheoremBounds bounds_stochastic(StochasticProblem problem, std::size_t n, std::size_t f, std::size_t r,
                                 double mu, double gamma, double sigma, double epsilon, double eta,
                                 double Gamma) {
    detail::require_positive_curvature(mu, gamma, "bounds_stochastic");
    if (!(eta > 0.0)) throw PreconditionError("bounds_stochastic: need eta > 0");
    if (!(Gamma >= 0.0) || !(sigma >= 0.0) || !(epsilon >= 0.0)) {
        throw PreconditionError("bounds_stochastic: need Gamma, sigma, epsilon >= 0");
    }
    const double nn = static_cast<double>(n), ff = static_cast<double>(f), rr = static_cast<double>(r);
    TheoremBounds b;
    b.eta = eta;
    b.Gamma = Gamma;
    detail::RateShape shape{};
    switch (problem) {
        case StochasticProblem::BS: {
            b.variant = BoundVariant::StochasticBS;
            b.alpha = 1.0 - (ff / nn) * (gamma + 2.0 * mu) / gamma;
            const double k = nn - ff;
            shape = {nn * gamma * b.alpha, k * k * mu * mu};
            b.M = 4.0 * nn * eta * mu * epsilon * (2.0 * ff + k * k * eta * mu) * Gamma +
                  4.0 * nn * nn * k * k * eta * eta * mu * mu * epsilon * epsilon +
                  2.0 * ff * eta * sigma * Gamma + k * k * eta * eta * sigma * sigma;
            b.feasible = b.alpha > 0.0;
            break;
        }
        case StochasticProblem::CS: {
            b.variant = BoundVariant::StochasticCS;
            b.alpha = 1.0 - (rr / nn) * (mu / gamma);
            const double k = nn - rr;
            shape = {nn * gamma * b.alpha, k * k * mu * mu};
            b.M = 4.0 * nn * eta * mu * epsilon * (rr + k * k * eta * mu) * Gamma +
                  4.0 * nn * nn * k * k * eta * eta * mu * mu * epsilon * epsilon +
                  k * k * eta * eta * sigma * sigma;
            b.feasible = b.alpha > 0.0;
            break;
        }
        case StochasticProblem::DS: {
            b.variant = BoundVariant::StochasticDS;
            if (r >= n) throw PreconditionError("bounds_stochastic: need r < n");
            const double m = nn - rr;
            b.alpha = 1.0 - (ff - rr) / m - (2.0 * mu / gamma) * (ff + rr) / m;
            const double k = m - ff;
            shape = {m * gamma * b.alpha, k * k * mu * mu};
            b.M = 4.0 * m * eta * mu * epsilon * (2.0 * (ff + rr) + k * k * eta * mu) * Gamma +
                  4.0 * m * m * k * k * eta * eta * mu * mu * epsilon * epsilon +
                  2.0 * (ff + rr) * eta * sigma * Gamma + k * k * eta * eta * sigma * sigma;
            b.feasible = b.alpha > 0.0 && nn >= 2.0 * ff + rr / 2.0;
            break;
        }
    }
    if (!(shape.curvature > 0.0)) throw PreconditionError("bounds_stochastic: no gradients survive aggregation");
    b.eta_bar = 2.0 * shape.K / shape.curvature;
    b.rho = detail::rho_from_shape(shape, eta);
    if (*b.rho < 1.0) b.asymptotic_radius = *b.M / (1.0 - *b.rho);
    return b;
}

/// True iff 0 <= rho < 1.
inline bool check_rho_range(const TheoremBounds& b) {
    if (!b.rho) return false;
    return *b.rho >= 0.0 && *b.rho < 1.0;
}

}  // namespace rdgd
