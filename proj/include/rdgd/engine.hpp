#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "rdgd/box.hpp"
#include "rdgd/costs.hpp"
#include "rdgd/errors.hpp"
#include "rdgd/faults.hpp"
#include "rdgd/filters.hpp"
#include "rdgd/linalg.hpp"
#include "rdgd/redundancy.hpp"
#include "rdgd/rng.hpp"
#include "rdgd/simnet.hpp"

namespace rdgd {

namespace schedule {
struct Constant {
    double eta = 0.0;
    bool operator==(const Constant&) const = default;
};
// eta_t = eta0 / (t + 1)
struct Harmonic {
    double eta0 = 1.0;
    bool operator==(const Harmonic&) const = default;
};
}  // namespace schedule

using StepSchedule = std::variant<schedule::Constant, schedule::Harmonic>;

inline double step_size(const StepSchedule& s, Iteration t) {
    if (const auto* c = std::get_if<schedule::Constant>(&s)) return c->eta;
    return std::get<schedule::Harmonic>(s).eta0 / static_cast<double>(t + 1);
}

enum class Mode { Sync, Async, Stale, Stochastic };

inline std::string_view to_string(Mode m) {
    switch (m) {
        case Mode::Sync: return "sync";
        case Mode::Async: return "async";
        case Mode::Stale: return "stale";
        case Mode::Stochastic: return "stochastic";
    }
    return "?";
}

/// Everything fixed about one problem: costs, box, budgets, who is faulty,
/// where the run starts and which point it should approach.
struct ProblemInstance {
    CostFamily family;
    FeasibleBox box;
    std::size_t f = 0;
    std::size_t r = 0;
    std::vector<AgentRole> roles;
    Vector x0;
    Vector target;

    std::size_t n() const { return family.size(); }

    AgentSet honest() const {
        AgentSet h;
        for (AgentId i = 0; i < roles.size(); ++i) {
            if (!is_faulty(roles[i])) h.push_back(i);
        }
        return h;
    }
};

struct SimulationSpec {
    Mode mode = Mode::Sync;
    std::size_t tau = 0;
    FilterKind filter;
    DelayModel delays = delay::Constant{0};
    StepSchedule schedule = schedule::Harmonic{1.0};
    Iteration iterations = 0;
    StochasticGradConfig noise;  // used in stochastic mode only
    bool parallel_agents = false;
};

/// One row per iteration. Update fields describe the step x^t -> x^{t+1} and
/// are absent on the final row.
struct TraceRecord {
    Iteration t = 0;
    Vector x;
    double distance = 0.0;  // ||x^t - target||
    std::optional<Vector> aggregate;
    double aggregate_norm = 0.0;
    double phi = 0.0;  // <x^t - target, aggregate>
    double eta = 0.0;
    std::uint64_t arrival_mask = 0;
    std::vector<std::size_t> cell_sizes;  // |T^{t;t-i}|, stale mode only
};

struct Trace {
    Vector target;
    std::vector<TraceRecord> records;
};

/// Per-agent simulation slots: each agent's noise and Byzantine streams.
/// Step 1 of every iteration asks all n agents for a message, so stream
/// consumption does not depend on who arrives first.
class AgentPool {
public:
    AgentPool(const ProblemInstance& problem, std::uint64_t seed, bool parallel = false)
        : problem_(&problem), parallel_(parallel) {
        if (problem.roles.size() != problem.n()) throw ConfigError("AgentPool: need one role per agent");
        for (AgentId i = 0; i < problem.n(); ++i) {
            noise_.emplace_back(derive_seed(seed, {stream::kNoise, i}));
            byz_.emplace_back(derive_seed(seed, {stream::kByzantine, i}));
        }
    }

    const ProblemInstance& problem() const { return *problem_; }

    /// Messages of all agents at x; stochastic when `noise` is given.
    std::vector<Vector> messages(const Vector& x, const StochasticGradConfig* noise) {
        const std::size_t n = problem_->n();
        std::vector<Vector> out(n);
        const auto work = [&](std::size_t begin, std::size_t end) {
            for (AgentId i = begin; i < end; ++i) out[i] = message(i, x, noise);
        };
        if (!parallel_ || n < 2) {
            work(0, n);
        } else {
            const std::size_t workers = std::min<std::size_t>(n, std::max(2U, std::thread::hardware_concurrency()));
            std::vector<std::jthread> threads;
            const std::size_t chunk = (n + workers - 1) / workers;
            for (std::size_t b = 0; b < n; b += chunk) threads.emplace_back(work, b, std::min(n, b + chunk));
        }
        return out;
    }

private:
    Vector message(AgentId i, const Vector& x, const StochasticGradConfig* noise) {
        const auto& cost = problem_->family[i];
        Vector g = noise ? stochastic_gradient(cost, x, *noise, noise_[i]) : gradient(cost, x);
        if (const auto* s = std::get_if<ByzantineStrategy>(&problem_->roles[i])) {
            return corrupt(*s, g, cost, x, byz_[i]);
        }
        return g;
    }

    const ProblemInstance* problem_;
    bool parallel_;
    std::vector<Rng> noise_;
    std::vector<Rng> byz_;
};

/// x^t plus the estimates the stale variant looks back on.
struct IterState {
    Iteration t = 0;
    Vector x;
    std::deque<Vector> history;  // history[i] = x^{t-i}, i <= tau

    IterState(Vector x0, std::size_t tau = 0) : x(std::move(x0)), tau_(tau) { history.push_back(x); }

    void advance(Vector next) {
        x = std::move(next);
        ++t;
        history.push_front(x);
        while (history.size() > tau_ + 1) history.pop_back();
    }

    const Vector& estimate_at_age(std::size_t age) const {
        if (age >= history.size()) {
            throw Error("IterState: estimate x^{t-" + std::to_string(age) + "} is not retained");
        }
        return history[age];
    }

private:
    std::size_t tau_;
};

struct StepOutcome {
    Vector aggregate;
    double eta = 0.0;
    std::uint64_t arrival_mask = 0;
    std::vector<std::size_t> cell_sizes;
};

namespace detail {

inline std::vector<Message> select(const std::vector<Vector>& all, const AgentSet& members) {
    std::vector<Message> msgs;
    msgs.reserve(members.size());
    for (auto a : members) msgs.push_back({a, all[a]});
    return msgs;
}

inline StepOutcome apply_update(IterState& state, const FeasibleBox& box, Vector aggregate, double eta,
                                std::uint64_t mask) {
    Vector next = box.project(state.x - eta * aggregate);
    StepOutcome out{std::move(aggregate), eta, mask, {}};
    state.advance(std::move(next));
    return out;
}

}  // namespace detail

/// Update over the received set S^t: x <- [x - eta_t GradFilter(S^t)]_W.
/// With r = 0 and S^t = [n] this is the synchronous step.
inline StepOutcome step_async(IterState& state, AgentPool& pool, const FilterKind& filter,
                              const ArrivalSet& arrivals, const StepSchedule& schedule,
                              const StochasticGradConfig* noise = nullptr) {
    const auto& p = pool.problem();
    if (arrivals.members.size() + p.r != p.n()) throw PreconditionError("step_async: need |S^t| = n - r");
    const auto all = pool.messages(state.x, noise);
    Vector agg = apply_filter(filter, detail::select(all, arrivals.members));
    return detail::apply_update(state, p.box, std::move(agg), step_size(schedule, state.t), arrivals.bitmask());
}

inline StepOutcome step_sync_dgd(IterState& state, AgentPool& pool, const FilterKind& filter,
                                 const StepSchedule& schedule, const StochasticGradConfig* noise = nullptr) {
    const auto& p = pool.problem();
    ArrivalSet everyone;
    everyone.iteration = state.t;
    everyone.members = all_agents(p.n());
    everyone.arrival_order = everyone.members;
    const auto all = pool.messages(state.x, noise);
    Vector agg = apply_filter(filter, detail::select(all, everyone.members));
    return detail::apply_update(state, p.box, std::move(agg), step_size(schedule, state.t), everyone.bitmask());
}

/// Stale-gradient update: sum over i <= tau and j in T^{t;t-i} of
/// grad Q_j(x^{t-i}), summed in ascending agent id. Honest agents only.
inline StepOutcome step_stale(IterState& state, const ProblemInstance& problem, const StalePartition& partition,
                              const StepSchedule& schedule) {
    if (partition.total() + problem.r < problem.n()) throw StragglerBudgetError("step_stale: |T^t| < n - r");
    std::vector<Message> msgs;
    std::vector<std::size_t> sizes;
    for (std::size_t age = 0; age < partition.cells.size(); ++age) {
        sizes.push_back(partition.cells[age].size());
        for (auto a : partition.cells[age]) {
            msgs.push_back({a, gradient(problem.family[a], state.estimate_at_age(age))});
        }
    }
    Vector agg = aggregate_sum(msgs);
    auto out = detail::apply_update(state, problem.box, std::move(agg), step_size(schedule, state.t),
                                    partition.bitmask());
    out.cell_sizes = std::move(sizes);
    return out;
}

/// Stochastic step with constant eta; sync when r = 0 and the arrival set is
/// everyone, otherwise over S^t.
inline StepOutcome step_stochastic(IterState& state, AgentPool& pool, const FilterKind& filter,
                                   const ArrivalSet& arrivals, const StochasticGradConfig& cfg, double eta) {
    return step_async(state, pool, filter, arrivals, schedule::Constant{eta}, &cfg);
}

namespace detail {

inline TraceRecord make_record(const IterState& s, const Vector& target) {
    TraceRecord rec;
    rec.t = s.t;
    rec.x = s.x;
    rec.distance = (s.x - target).norm();
    return rec;
}

inline void attach(TraceRecord& rec, StepOutcome&& out, const Vector& target) {
    rec.aggregate_norm = out.aggregate.norm();
    rec.phi = (rec.x - target).dot(out.aggregate);
    rec.eta = out.eta;
    rec.arrival_mask = out.arrival_mask;
    rec.cell_sizes = std::move(out.cell_sizes);
    rec.aggregate = std::move(out.aggregate);
}

}  // namespace detail

/// Runs `spec.iterations` steps of the selected variant from problem.x0.
/// Deterministic in (problem, spec, seed).
inline Trace simulate(const ProblemInstance& problem, const SimulationSpec& spec, std::uint64_t seed) {
    const std::size_t n = problem.n();
    if (!problem.box.contains(problem.x0)) throw ConfigError("simulate: x0 lies outside the feasible box");
    if (problem.r >= n) throw ConfigError("simulate: need r < n");
    if (spec.iterations < 0) throw ConfigError("simulate: negative iteration count");
    if (spec.mode == Mode::Stale) {
        if (spec.filter.variant != FilterVariant::Sum) throw ConfigError("stale mode requires the sum filter");
        if (problem.honest().size() != n) throw ConfigError("stale mode requires all agents honest");
    }
    if (spec.mode == Mode::Sync && problem.r != 0) throw ConfigError("sync mode requires r = 0");
    if (spec.mode == Mode::Stochastic && !std::holds_alternative<schedule::Constant>(spec.schedule)) {
        throw ConfigError("stochastic mode requires a constant step size");
    }
    validate_delay_model(spec.delays, n, problem.r);
    const auto where = [](Iteration t) { return "iteration " + std::to_string(t) + ": "; };

    AgentPool pool(problem, seed, spec.parallel_agents);
    DelaySampler delays(spec.delays, n, seed);
    IterState state(problem.x0, spec.mode == Mode::Stale ? spec.tau : 0);
    std::optional<StaleBuffer> buffer;
    if (spec.mode == Mode::Stale) buffer.emplace(n, spec.tau);

    Trace trace;
    trace.target = problem.target;
    trace.records.reserve(static_cast<std::size_t>(spec.iterations) + 1);
    for (Iteration t = 0; t < spec.iterations; ++t) {
        auto rec = detail::make_record(state, problem.target);
        StepOutcome out;
        try {
            switch (spec.mode) {
                case Mode::Sync: out = step_sync_dgd(state, pool, spec.filter, spec.schedule); break;
                case Mode::Async:
                    out = step_async(state, pool, spec.filter, collect_fresh(delays, t, n, problem.r), spec.schedule);
                    break;
                case Mode::Stale: {
                    const auto part = collect_stale(*buffer, collect_fresh(delays, t, n, problem.r), problem.r);
                    out = step_stale(state, problem, part, spec.schedule);
                    break;
                }
                case Mode::Stochastic: {
                    const double eta = std::get<schedule::Constant>(spec.schedule).eta;
                    out = step_stochastic(state, pool, spec.filter, collect_fresh(delays, t, n, problem.r),
                                          spec.noise, eta);
                    break;
                }
            }
        } catch (const StragglerBudgetError& e) {
            throw StragglerBudgetError(where(t) + e.what());
        } catch (const PreconditionError& e) {
            throw PreconditionError(where(t) + e.what());
        } catch (const Error& e) {
            throw Error(where(t) + e.what());
        }
        detail::attach(rec, std::move(out), problem.target);
        trace.records.push_back(std::move(rec));
    }
    trace.records.push_back(detail::make_record(state, problem.target));
    return trace;
}

}  // namespace rdgd
