#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rdgd/errors.hpp"
#include "rdgd/linalg.hpp"
#include "rdgd/redundancy.hpp"
#include "rdgd/rng.hpp"

namespace rdgd {

using Iteration = std::int64_t;

// Response delay measured in whole iterations; kNever means the message is lost.
using Delay = std::int64_t;
inline constexpr Delay kNever = std::numeric_limits<Delay>::max();

namespace delay {
struct Constant {
    Delay iterations = 0;
    bool operator==(const Constant&) const = default;
};
// P(delay = k) = (1 - p)^k p, drawn per agent per iteration.
struct GeometricTail {
    double p = 0.5;
    bool operator==(const GeometricTail&) const = default;
};
// Listed agents are late by `extra` iterations (never, if unset); others answer at once.
struct FixedSlowSet {
    AgentSet agents;
    std::optional<Delay> extra;
    bool operator==(const FixedSlowSet&) const = default;
};
// At timestamp t, agents (t + k) mod n for k < count are late by `extra`.
struct RoundRobin {
    std::size_t count = 1;
    Delay extra = 1;
    bool operator==(const RoundRobin&) const = default;
};
}  // namespace delay

using DelayModel = std::variant<delay::Constant, delay::GeometricTail, delay::FixedSlowSet, delay::RoundRobin>;

/// Checks the model against the straggler budget: it must never silence more
/// than r agents for good, and a fixed slow set holds at most r agents.
inline void validate_delay_model(const DelayModel& model, std::size_t n, std::size_t r) {
    if (const auto* c = std::get_if<delay::Constant>(&model)) {
        if (c->iterations < 0) throw ConfigError("delay model: constant delay must be nonnegative");
    } else if (const auto* g = std::get_if<delay::GeometricTail>(&model)) {
        if (!(g->p > 0.0 && g->p <= 1.0)) throw ConfigError("delay model: geometric p must lie in (0, 1]");
    } else if (const auto* s = std::get_if<delay::FixedSlowSet>(&model)) {
        if (s->agents.size() > r) throw ConfigError("delay model: slow set larger than r");
        for (auto a : s->agents) {
            if (a >= n) throw ConfigError("delay model: slow agent id out of range");
        }
        if (s->extra && *s->extra < 0) throw ConfigError("delay model: extra delay must be nonnegative");
    } else if (const auto* rr = std::get_if<delay::RoundRobin>(&model)) {
        if (rr->count > r) throw ConfigError("delay model: round-robin count larger than r");
        if (rr->extra < 0) throw ConfigError("delay model: extra delay must be nonnegative");
    }
}

/// Draws per-agent delays each iteration. Each agent owns its own stream.
class DelaySampler {
public:
    DelaySampler(DelayModel model, std::size_t n, std::uint64_t seed) : model_(std::move(model)), n_(n) {
        rngs_.reserve(n);
        for (std::size_t i = 0; i < n; ++i) rngs_.emplace_back(derive_seed(seed, {stream::kDelay, i}));
    }

    const DelayModel& model() const { return model_; }

    // Must be called exactly once per iteration, in order.
    std::vector<Delay> sample(Iteration t) {
        std::vector<Delay> d(n_, 0);
        std::visit(
            [&](const auto& m) {
                using M = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<M, delay::Constant>) {
                    std::fill(d.begin(), d.end(), m.iterations);
                } else if constexpr (std::is_same_v<M, delay::GeometricTail>) {
                    for (std::size_t i = 0; i < n_; ++i) {
                        const double u = rngs_[i].uniform();
                        d[i] = m.p >= 1.0 ? 0 : static_cast<Delay>(std::floor(std::log1p(-u) / std::log1p(-m.p)));
                    }
                } else if constexpr (std::is_same_v<M, delay::FixedSlowSet>) {
                    for (auto a : m.agents) d[a] = m.extra.value_or(kNever);
                } else {
                    for (std::size_t k = 0; k < m.count; ++k) {
                        d[static_cast<std::size_t>(t + static_cast<Iteration>(k)) % n_] = m.extra;
                    }
                }
            },
            model_);
        return d;
    }

private:
    DelayModel model_;
    std::size_t n_;
    std::vector<Rng> rngs_;
};

/// A gradient for timestamp `stamp` that missed its iteration's quota and
/// reaches the server at iteration `deliver_at`.
struct LateDelivery {
    AgentId agent = 0;
    Iteration stamp = 0;
    Iteration deliver_at = 0;
    bool operator==(const LateDelivery&) const = default;
};

/// S^t: the first n - r responders for timestamp t.
struct ArrivalSet {
    Iteration iteration = 0;
    AgentSet members;                   // sorted
    std::vector<AgentId> arrival_order;  // by (delay, agent id)
    std::vector<LateDelivery> late;      // strictly later responders, by agent id

    std::uint64_t bitmask() const { return to_mask(members); }
};

/// Ranks responders by (delay, agent id) and keeps the first n - r. Responders
/// tied with the last accepted one are dropped; strictly later ones are
/// recorded as late deliveries.
inline ArrivalSet arrivals_from_delays(const std::vector<Delay>& delays, Iteration t, std::size_t r) {
    const std::size_t n = delays.size();
    if (r >= n) throw PreconditionError("collect_fresh: need n - r >= 1");
    std::vector<AgentId> order(n);
    for (AgentId i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return delays[a] < delays[b]; });
    const std::size_t quota = n - r;
    const Delay close = delays[order[quota - 1]];
    if (close == kNever) {
        throw StragglerBudgetError("collect_fresh: delay model cannot deliver n - r gradients at t = " +
                                   std::to_string(t));
    }
    ArrivalSet out;
    out.iteration = t;
    out.arrival_order.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(quota));
    out.members = out.arrival_order;
    std::sort(out.members.begin(), out.members.end());
    for (AgentId i = 0; i < n; ++i) {
        if (std::binary_search(out.members.begin(), out.members.end(), i)) continue;
        if (delays[i] != kNever && delays[i] > close) out.late.push_back({i, t, t + (delays[i] - close)});
    }
    return out;
}

inline ArrivalSet collect_fresh(DelaySampler& delays, Iteration t, std::size_t n, std::size_t r) {
    auto d = delays.sample(t);
    if (d.size() != n) throw PreconditionError("collect_fresh: delay sampler built for a different n");
    return arrivals_from_delays(d, t, r);
}

/// The partition {T^{t;t-i}}_{i=0..tau} of agents by the stamp of their
/// freshest received gradient.
struct StalePartition {
    Iteration iteration = 0;
    std::vector<AgentSet> cells;  // cells[i] = T^{t;t-i}

    std::size_t total() const {
        std::size_t s = 0;
        for (const auto& c : cells) s += c.size();
        return s;
    }
    std::uint64_t bitmask() const {
        std::uint64_t m = 0;
        for (const auto& c : cells) m |= to_mask(c);
        return m;
    }
};

/// Server-side record of the freshest gradient stamp per agent plus messages
/// still in flight.
class StaleBuffer {
public:
    StaleBuffer(std::size_t n, std::size_t tau) : tau_(tau), latest_(n) {}

    std::size_t tau() const { return tau_; }
    const std::vector<std::optional<Iteration>>& latest_by_agent() const { return latest_; }

    /// Folds S^t and due late deliveries into the buffer, drops stamps older
    /// than t - tau, and partitions the rest. Throws if |T^t| < n - r.
    StalePartition collect(const ArrivalSet& arrivals, std::size_t r) {
        const Iteration t = arrivals.iteration;
        const std::size_t n = latest_.size();
        for (const auto& l : arrivals.late) pending_.push_back(l);
        std::vector<LateDelivery> still_pending;
        for (const auto& l : pending_) {
            if (l.deliver_at <= t) {
                update(l.agent, l.stamp);
            } else if (l.stamp + static_cast<Iteration>(tau_) >= l.deliver_at) {
                still_pending.push_back(l);  // will still be usable when it lands
            }
        }
        pending_ = std::move(still_pending);
        for (auto a : arrivals.members) update(a, t);

        StalePartition part;
        part.iteration = t;
        part.cells.resize(tau_ + 1);
        for (AgentId a = 0; a < n; ++a) {
            if (!latest_[a]) continue;
            const Iteration age = t - *latest_[a];
            if (age < 0 || age > static_cast<Iteration>(tau_)) {
                if (age > static_cast<Iteration>(tau_)) latest_[a].reset();
                continue;
            }
            part.cells[static_cast<std::size_t>(age)].push_back(a);
        }
        if (part.total() + r < n) {
            throw StragglerBudgetError("collect_stale: |T^t| = " + std::to_string(part.total()) +
                                       " < n - r at t = " + std::to_string(t));
        }
        return part;
    }

private:
    void update(AgentId a, Iteration stamp) {
        if (a >= latest_.size()) throw PreconditionError("StaleBuffer: agent id out of range");
        if (!latest_[a] || *latest_[a] < stamp) latest_[a] = stamp;
    }

    std::size_t tau_;
    std::vector<std::optional<Iteration>> latest_;
    std::vector<LateDelivery> pending_;
};

inline StalePartition collect_stale(StaleBuffer& buffer, const ArrivalSet& arrivals, std::size_t r) {
    return buffer.collect(arrivals, r);
}

}  // namespace rdgd
