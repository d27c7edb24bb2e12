#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <variant>

#include "rdgd/costs.hpp"
#include "rdgd/errors.hpp"
#include "rdgd/linalg.hpp"
#include "rdgd/rng.hpp"

namespace rdgd {

// What a faulty agent sends in place of its true gradient.
namespace byzantine {
struct ReverseGradient {
    bool operator==(const ReverseGradient&) const = default;
};
// Uniform direction, norm = scale.
struct RandomVector {
    double scale = 1.0;
    bool operator==(const RandomVector&) const = default;
};
// True gradient direction with norm multiplied by scale.
struct LargeNorm {
    double scale = 100.0;
    bool operator==(const LargeNorm&) const = default;
};
// Quadratic analog of label flipping: gradient of the cost with b negated.
struct CenterFlip {
    bool operator==(const CenterFlip&) const = default;
};
}  // namespace byzantine

using ByzantineStrategy =
    std::variant<byzantine::ReverseGradient, byzantine::RandomVector, byzantine::LargeNorm, byzantine::CenterFlip>;

/// Role of one agent in a run: honest, or faulty with a strategy.
using AgentRole = std::variant<std::monostate, ByzantineStrategy>;

inline bool is_faulty(const AgentRole& role) { return std::holds_alternative<ByzantineStrategy>(role); }

inline Vector corrupt(const ByzantineStrategy& strategy, const Vector& true_gradient,
                      const QuadraticCost& cost, const Vector& x, Rng& rng) {
    require_same_dim(true_gradient, cost.dimension(), "corrupt");
    require_same_dim(x, cost.dimension(), "corrupt");
    return std::visit(
        [&](const auto& s) -> Vector {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, byzantine::ReverseGradient>) {
                return -true_gradient;
            } else if constexpr (std::is_same_v<S, byzantine::RandomVector>) {
                Vector v(true_gradient.size());
                double norm = 0.0;
                do {
                    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
                    norm = v.norm();
                } while (norm == 0.0);
                return v * (s.scale / norm);
            } else if constexpr (std::is_same_v<S, byzantine::LargeNorm>) {
                return s.scale * true_gradient;
            } else {
                // Re-evaluate with the flipped linear term: A x + b.
                return cost.A() * x + cost.b();
            }
        },
        strategy);
}

inline double parse_scale(std::string_view text, std::string_view role) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v) || v < 0.0) {
        throw ConfigError("role '" + std::string(role) + "': scale must be a nonnegative number");
    }
    return v;
}

/// "honest" | "reverse" | "random:SCALE" | "large:SCALE" | "centerflip"
inline AgentRole parse_role(std::string_view s) {
    if (s == "honest") return std::monostate{};
    if (s == "reverse") return ByzantineStrategy{byzantine::ReverseGradient{}};
    if (s == "centerflip") return ByzantineStrategy{byzantine::CenterFlip{}};
    if (s.starts_with("random:")) return ByzantineStrategy{byzantine::RandomVector{parse_scale(s.substr(7), s)}};
    if (s.starts_with("large:")) return ByzantineStrategy{byzantine::LargeNorm{parse_scale(s.substr(6), s)}};
    throw ConfigError("unknown agent role '" + std::string(s) +
                      "' (expected honest | reverse | random:SCALE | large:SCALE | centerflip)");
}

namespace detail {
inline std::string format_scale(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}
}  // namespace detail

inline std::string to_string(const AgentRole& role) {
    if (!is_faulty(role)) return "honest";
    return std::visit(
        [](const auto& s) -> std::string {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, byzantine::ReverseGradient>) return "reverse";
            else if constexpr (std::is_same_v<S, byzantine::RandomVector>) return "random:" + detail::format_scale(s.scale);
            else if constexpr (std::is_same_v<S, byzantine::LargeNorm>) return "large:" + detail::format_scale(s.scale);
            else return "centerflip";
        },
        std::get<ByzantineStrategy>(role));
}

}  // namespace rdgd
