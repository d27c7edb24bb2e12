#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "rdgd/bounds.hpp"
#include "rdgd/box.hpp"
#include "rdgd/config.hpp"
#include "rdgd/engine.hpp"
#include "rdgd/redundancy.hpp"
#include "rdgd/trace_io.hpp"

namespace rdgd {

/// A RunConfig turned into engine inputs plus every constant the checks need.
struct ResolvedRun {
    ResolvedRun(RunConfig c, ProblemInstance p) : config(std::move(c)), problem(std::move(p)) {}

    RunConfig config;
    ProblemInstance problem;
    SimulationSpec spec;
    SmoothnessCertificate certificate;
    RedundancyReport redundancy;
    double Gamma = 0.0;
    std::optional<TheoremBounds> bounds;
    std::optional<double> radius;  // tail bound actually checked (D, D* or user D*)
    std::optional<std::string> skip_reason;
    std::vector<std::string> warnings;
};

namespace detail {

inline FeasibleBox resolve_box(const BoxSpec& spec, Eigen::Index d) {
    try {
        if (!spec.lower.empty() || !spec.upper.empty()) {
            if (static_cast<Eigen::Index>(spec.lower.size()) != d || static_cast<Eigen::Index>(spec.upper.size()) != d) {
                throw ConfigError("box: lower/upper must have the family dimension " + std::to_string(d));
            }
            return FeasibleBox(to_vector(spec.lower), to_vector(spec.upper));
        }
        if (!spec.half_width) throw ConfigError("box: give half_width or lower/upper");
        return FeasibleBox::cube(d, *spec.half_width);
    } catch (const PreconditionError& e) {
        throw ConfigError(std::string("box: ") + e.what());
    }
}

inline bool all_honest(const std::vector<AgentRole>& roles) {
    return std::none_of(roles.begin(), roles.end(), [](const AgentRole& r) { return is_faulty(r); });
}

}  // namespace detail

inline ResolvedRun resolve_run(const RunConfig& config, const std::filesystem::path& base_dir = {}) {
    CostFamily family = resolve_family(config.family, base_dir);
    const std::size_t n = family.size();
    const std::size_t f = config.f, r = config.r;
    if (config.n && *config.n != n) {
        throw ConfigError("n = " + std::to_string(*config.n) + " but the family has " + std::to_string(n) + " agents");
    }
    if (r >= n) throw ConfigError("need r < n");

    std::vector<AgentRole> roles = config.roles;
    if (roles.empty()) roles.assign(n, AgentRole{});
    if (roles.size() != n) throw ConfigError("roles: need exactly one role per agent");
    const auto faulty = static_cast<std::size_t>(std::count_if(roles.begin(), roles.end(), is_faulty));
    if (faulty > f) throw ConfigError("roles: more faulty agents than the budget f");
    validate_delay_model(config.delay, n, r);

    const Eigen::Index d = family.dimension();
    FeasibleBox box = detail::resolve_box(config.box, d);
    ProblemInstance problem{family, box, f, r, roles, box.center(), Vector()};
    AgentSet honest;
    for (AgentId i = 0; i < n; ++i) {
        if (!is_faulty(roles[i])) honest.push_back(i);
    }
    problem.target = target_minimizer(family, honest, box);
    if (config.x0) {
        if (static_cast<Eigen::Index>(config.x0->size()) != d) throw ConfigError("x0: wrong dimension");
        problem.x0 = to_vector(*config.x0);
        if (!box.contains(problem.x0)) throw ConfigError("x0 lies outside the feasible box");
    }

    ResolvedRun out(config, std::move(problem));
    out.certificate = certify_constants(family, f > 0 ? n - f : n - r);
    out.redundancy = compute_epsilon(family, f, r);
    out.Gamma = box.max_distance_from(out.problem.target);
    const double mu = out.certificate.mu, gamma = out.certificate.gamma;
    const double eps = out.redundancy.epsilon;

    SimulationSpec spec;
    spec.mode = config.mode;
    spec.tau = config.tau;
    spec.filter = FilterKind{config.filter, f};
    spec.delays = config.delay;
    spec.iterations = config.iterations;
    spec.noise = config.stochastic;
    spec.parallel_agents = config.parallel_agents;

    const bool honest_only = detail::all_honest(roles);
    if (config.mode == Mode::Stochastic) {
        if (!config.problem) throw ConfigError("stochastic mode needs problem BS | CS | DS");
        const auto p = *config.problem;
        if (p == StochasticProblem::CS && (f != 0 || config.filter != FilterVariant::Sum)) {
            throw ConfigError("problem CS needs f = 0 and the sum filter");
        }
        if (p == StochasticProblem::BS && r != 0) throw ConfigError("problem BS needs r = 0");
        if (p != StochasticProblem::CS && config.filter != FilterVariant::CGE) {
            throw ConfigError("problems BS and DS need the cge filter");
        }
        if (config.schedule.kind != ScheduleSpec::Kind::Constant) {
            throw ConfigError("stochastic mode needs a constant schedule");
        }
        const double sigma = config.stochastic.sigma;
        // eta_bar does not depend on eta, so any positive probe value works.
        const auto probe = bounds_stochastic(p, n, f, r, mu, gamma, sigma, eps, 1.0, out.Gamma);
        double eta;
        if (config.schedule.eta) {
            eta = *config.schedule.eta;
        } else if (config.schedule.eta_fraction) {
            eta = *config.schedule.eta_fraction * *probe.eta_bar;
        } else {
            throw ConfigError("constant schedule needs eta or eta_fraction");
        }
        if (!(eta > 0.0)) throw ConfigError("constant schedule needs eta > 0 (is eta_bar positive?)");
        out.bounds = bounds_stochastic(p, n, f, r, mu, gamma, sigma, eps, eta, out.Gamma);
        spec.schedule = schedule::Constant{eta};
        if (!out.bounds->feasible) {
            out.skip_reason = "infeasible";
        } else if (eta >= *out.bounds->eta_bar) {
            out.warnings.push_back("eta = " + format_double(eta) + " is not below eta_bar = " +
                                   format_double(*out.bounds->eta_bar) + "; the stochastic bound does not apply");
            out.skip_reason = "eta >= eta_bar";
        }
    } else {
        if (config.schedule.kind == ScheduleSpec::Kind::Harmonic) {
            spec.schedule = schedule::Harmonic{config.schedule.eta0.value_or(1.0 / (static_cast<double>(n) * mu))};
        } else if (config.schedule.eta) {
            spec.schedule = schedule::Constant{*config.schedule.eta};
        } else {
            throw ConfigError("constant schedule outside stochastic mode needs an absolute eta");
        }
        if (config.mode == Mode::Stale) {
            if (f != 0) throw ConfigError("stale mode needs f = 0");
            out.bounds = bounds_stale(n, r, mu, gamma, eps);
        } else if (config.filter == FilterVariant::Sum) {
            if (honest_only && f == 0) {
                out.bounds = bounds_fresh(n, r, mu, gamma, eps);
            } else {
                out.warnings.push_back("the sum filter carries no guarantee with a fault budget; no tail check");
            }
        } else if (config.filter == FilterVariant::CGE) {
            const double delta = config.delta.value_or(1e-3 * out.Gamma);
            out.bounds = bounds_cge(n, f, r, mu, gamma, eps, delta);
        } else if (config.dstar) {
            out.radius = *config.dstar;
        } else {
            out.warnings.push_back("cwtm has no closed-form radius; supply dstar to enable the tail check");
        }
        if (out.bounds) {
            out.radius = out.bounds->radius;
            if (!out.bounds->feasible) out.skip_reason = "infeasible";
        }
    }
    out.spec = std::move(spec);
    return out;
}

struct Check {
    std::string name;
    double value = 0.0;  // worst observed quantity
    double bound = 0.0;
    bool satisfied = true;
    std::string detail;
};

enum class RunStatus { Pass, Fail, Skipped };

struct CurvePoint {
    Iteration t_plus_1 = 0;
    double mean = 0.0;  // mean of ||x^{t+1} - x_H||^2 over replications
    double standard_error = 0.0;
    double bound = 0.0;
};

struct ExperimentResult {
    explicit ExperimentResult(ResolvedRun r) : run(std::move(r)) {}

    ResolvedRun run;
    std::string config_hash;
    Trace trace;  // first replication
    std::vector<CurvePoint> curve;
    std::vector<Check> checks;
    RunStatus status = RunStatus::Pass;
    std::size_t tail_window = 0;
    double tail_max_distance = 0.0;
    std::size_t phi_violations = 0;
    std::size_t phi_checked = 0;

    std::string status_text() const {
        switch (status) {
            case RunStatus::Pass: return "pass";
            case RunStatus::Fail: return "fail";
            case RunStatus::Skipped: return "skipped: " + run.skip_reason.value_or("");
        }
        return "?";
    }
};

/// Default tail: last 10% of the iterations, at least 100, never more than
/// the trace holds.
inline std::size_t tail_window_for(Iteration iterations, std::optional<std::size_t> configured) {
    const auto records = static_cast<std::size_t>(iterations) + 1;
    const std::size_t w = configured.value_or(std::max<std::size_t>(100, static_cast<std::size_t>(iterations) / 10));
    return std::min(w, records);
}

namespace detail {

inline std::vector<std::vector<double>> run_replications(const ResolvedRun& run, std::uint64_t seed,
                                                         std::size_t replications, Trace& first) {
    std::vector<std::vector<double>> sq(replications);
    std::vector<Trace> first_slot(1);
    const auto one = [&](std::size_t k) {
        Trace tr = simulate(run.problem, run.spec, derive_seed(seed, {stream::kReplication, k}));
        auto& out = sq[k];
        out.reserve(tr.records.size());
        for (const auto& rec : tr.records) out.push_back(rec.distance * rec.distance);
        if (k == 0) first_slot[0] = std::move(tr);
    };
    const std::size_t workers =
        std::min<std::size_t>(replications, std::max(1U, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t k = 0; k < replications; ++k) one(k);
    } else {
        std::vector<std::exception_ptr> errors(workers);
        {
            std::vector<std::jthread> threads;
            for (std::size_t w = 0; w < workers; ++w) {
                threads.emplace_back([&, w] {
                    try {
                        for (std::size_t k = w; k < replications; k += workers) one(k);
                    } catch (...) {
                        errors[w] = std::current_exception();
                    }
                });
            }
        }
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }
    first = std::move(first_slot[0]);
    return sq;
}

}  // namespace detail

/// Resolves, simulates and checks one experiment.
inline ExperimentResult run_experiment(const RunConfig& config, const std::filesystem::path& base_dir = {}) {
    ExperimentResult res(resolve_run(config, base_dir));
    res.config_hash = config_hash(config);
    const auto& run = res.run;
    const std::size_t n = run.problem.n(), r = run.problem.r;
    const Iteration T = config.iterations;
    res.tail_window = tail_window_for(T, config.tail_window);

    if (config.mode == Mode::Stochastic) {
        if (config.replications < 1) throw ConfigError("replications must be at least 1");
        const auto sq = detail::run_replications(run, config.seed, config.replications, res.trace);
        const double R = static_cast<double>(config.replications);
        const double initial_sq = (run.problem.x0 - run.problem.target).squaredNorm();
        for (Iteration k = 1; k <= T; ++k) {
            double sum = 0.0;
            for (const auto& rep : sq) sum += rep[static_cast<std::size_t>(k)];
            const double mean = sum / R;
            double var = 0.0;
            for (const auto& rep : sq) {
                const double dv = rep[static_cast<std::size_t>(k)] - mean;
                var += dv * dv;
            }
            const double se = config.replications > 1 ? std::sqrt(var / (R - 1.0) / R) : 0.0;
            res.curve.push_back({k, mean, se, run.bounds->expected_sq_distance_bound(k, initial_sq)});
        }
    } else {
        res.trace = simulate(run.problem, run.spec, config.seed);
    }

    const auto& recs = res.trace.records;
    for (std::size_t i = recs.size() - res.tail_window; i < recs.size(); ++i) {
        res.tail_max_distance = std::max(res.tail_max_distance, recs[i].distance);
    }
    if (T == 0) return res;  // nothing happened, nothing to check

    if (run.skip_reason) {
        res.status = RunStatus::Skipped;
        return res;
    }

    if (config.mode == Mode::Stochastic) {
        Check c{"mc_mean_sq_distance", 0.0, 0.0, true, ""};
        double worst = -std::numeric_limits<double>::infinity();
        for (const auto& p : res.curve) {
            const double margin = p.mean - (p.bound + 3.0 * p.standard_error);
            if (margin > worst) {
                worst = margin;
                c.value = p.mean;
                c.bound = p.bound + 3.0 * p.standard_error;
                c.detail = "tightest at t+1 = " + std::to_string(p.t_plus_1);
            }
        }
        c.satisfied = worst <= 0.0;
        res.checks.push_back(std::move(c));
    } else {
        if (run.radius) {
            Check c{"tail_distance", res.tail_max_distance, *run.radius + config.tolerance, true, ""};
            c.satisfied = c.value <= c.bound;
            c.detail = "max over the last " + std::to_string(res.tail_window) + " records";
            res.checks.push_back(std::move(c));
        }
        if (run.bounds && run.bounds->variant == BoundVariant::CGE) {
            const double threshold = *run.bounds->radius + 0.01;
            for (std::size_t i = 0; i + 1 < recs.size(); ++i) {
                if (recs[i].distance >= threshold) {
                    ++res.phi_checked;
                    if (!(recs[i].phi > 0.0)) ++res.phi_violations;
                }
            }
        }
        if (detail::all_honest(run.problem.roles) && config.filter == FilterVariant::Sum) {
            // Fresh runs sum n - r gradients, stale runs at most n.
            const double eps0 =
                run.problem.f == 0 ? run.redundancy.epsilon : compute_epsilon(run.problem.family, 0, r).epsilon;
            const double mu = run.certificate.mu;
            const double count = config.mode == Mode::Stale ? static_cast<double>(n) : static_cast<double>(n - r);
            const double Gamma_star = run.problem.box.max_distance_from(run.problem.target);
            Check c{"aggregate_norm", 0.0,
                    count * (2.0 * static_cast<double>(n) * mu * eps0 + mu * Gamma_star), true, ""};
            for (std::size_t i = 0; i + 1 < recs.size(); ++i) c.value = std::max(c.value, recs[i].aggregate_norm);
            c.satisfied = c.value <= c.bound;
            res.checks.push_back(std::move(c));
        }
    }
    const bool ok = std::all_of(res.checks.begin(), res.checks.end(), [](const Check& c) { return c.satisfied; });
    res.status = ok ? RunStatus::Pass : RunStatus::Fail;
    return res;
}

inline nlohmann::json bounds_to_json(const TheoremBounds& b) {
    nlohmann::json j{{"variant", std::string(to_string(b.variant))}, {"feasible", b.feasible}, {"alpha", b.alpha}};
    const auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) j[key] = std::isfinite(*v) ? nlohmann::json(*v) : nlohmann::json("inf");
    };
    put(b.variant == BoundVariant::CGE ? "D_star" : "D", b.radius);
    put("xi", b.xi);
    put("delta", b.delta);
    put("eta", b.eta);
    put("eta_bar", b.eta_bar);
    put("rho", b.rho);
    put("M", b.M);
    put("Gamma", b.Gamma);
    put("asymptotic_radius", b.asymptotic_radius);
    return j;
}

inline nlohmann::json redundancy_to_json(const RedundancyReport& rep) {
    nlohmann::json j{{"f", rep.f}, {"r", rep.r}, {"epsilon", rep.epsilon}, {"pairs_examined", rep.pairs_examined}};
    if (rep.witness_pair) {
        j["witness"] = {{"S", rep.witness_pair->first}, {"S_hat", rep.witness_pair->second}};
    } else {
        j["witness"] = nullptr;
    }
    return j;
}

inline nlohmann::json summary_to_json(const ExperimentResult& res) {
    const auto& run = res.run;
    nlohmann::json j;
    j["name"] = run.config.name;
    j["seed"] = run.config.seed;
    j["config_hash"] = res.config_hash;
    j["mode"] = std::string(to_string(run.config.mode));
    j["status"] = res.status_text();
    j["tail_window"] = res.tail_window;
    j["tail_max_distance"] = res.tail_max_distance;
    if (run.radius) {
        j["bound_value"] = std::isfinite(*run.radius) ? nlohmann::json(*run.radius) : nlohmann::json("inf");
    } else {
        j["bound_value"] = nullptr;
    }
    j["satisfied"] = res.status != RunStatus::Fail;
    j["certificate"] = {{"mu", run.certificate.mu},
                        {"gamma", run.certificate.gamma},
                        {"subset_floor", run.certificate.subset_floor}};
    j["redundancy"] = redundancy_to_json(run.redundancy);
    j["target"] = to_std(run.problem.target);
    j["Gamma"] = run.Gamma;
    if (run.bounds) j["bounds"] = bounds_to_json(*run.bounds);
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : res.checks) {
        checks.push_back({{"name", c.name},
                          {"value", c.value},
                          {"bound", c.bound},
                          {"satisfied", c.satisfied},
                          {"detail", c.detail}});
    }
    j["checks"] = std::move(checks);
    if (run.bounds && run.bounds->variant == BoundVariant::CGE) {
        j["phi"] = {{"checked", res.phi_checked}, {"violations", res.phi_violations}};
    }
    j["warnings"] = run.warnings;
    if (!res.curve.empty()) {
        nlohmann::json t = nlohmann::json::array(), mean = nlohmann::json::array(), se = nlohmann::json::array(),
                       bound = nlohmann::json::array();
        for (const auto& p : res.curve) {
            t.push_back(p.t_plus_1);
            mean.push_back(p.mean);
            se.push_back(p.standard_error);
            bound.push_back(p.bound);
        }
        j["mc_curve"] = {{"replications", run.config.replications},
                         {"t_plus_1", std::move(t)},
                         {"mean_sq_distance", std::move(mean)},
                         {"standard_error", std::move(se)},
                         {"bound", std::move(bound)}};
    }
    return j;
}

inline TraceHeader trace_header(const ExperimentResult& res) {
    return {res.run.config.seed, res.config_hash, std::string(to_string(res.run.config.mode))};
}

inline void write_curve_csv(std::ostream& out, const ExperimentResult& res) {
    out << "# seed=" << res.run.config.seed << " config_hash=" << res.config_hash << "\n";
    out << "t_plus_1,mean_sq_distance,standard_error,bound\n";
    for (const auto& p : res.curve) {
        out << p.t_plus_1 << ',' << format_double(p.mean) << ',' << format_double(p.standard_error) << ','
            << format_double(p.bound) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Suites: {"experiments": [{"name": ..., "config": "path.json"} | {"name": ..., "inline": {...}}]}

struct SuiteEntryResult {
    std::string name;
    std::optional<ExperimentResult> result;
    std::string error;  // configuration or engine error, when result is empty
};

inline std::vector<RunConfig> load_manifest(const nlohmann::json& manifest, const std::filesystem::path& base_dir,
                                            std::vector<std::filesystem::path>* config_dirs = nullptr) {
    if (!manifest.contains("experiments") || !manifest.at("experiments").is_array()) {
        throw ConfigError("manifest: expected an \"experiments\" array");
    }
    std::vector<RunConfig> out;
    for (const auto& e : manifest.at("experiments")) {
        if (!e.contains("name")) throw ConfigError("manifest: entry without a name");
        const auto name = e.at("name").get<std::string>();
        RunConfig c;
        std::filesystem::path dir = base_dir;
        if (e.contains("config")) {
            std::filesystem::path p = e.at("config").get<std::string>();
            if (p.is_relative()) p = base_dir / p;
            if (!std::filesystem::exists(p)) throw ConfigError("manifest: config for '" + name + "' not found: " + p.string());
            c = run_config_from_json(read_json_file(p));
            dir = p.parent_path();
        } else if (e.contains("inline")) {
            c = run_config_from_json(e.at("inline"));
        } else {
            throw ConfigError("manifest: entry '" + name + "' has neither config nor inline");
        }
        c.name = name;
        out.push_back(std::move(c));
        if (config_dirs) config_dirs->push_back(dir);
    }
    return out;
}

/// Runs every experiment, in parallel when cores allow; results keep manifest order.
inline std::vector<SuiteEntryResult> run_suite(const std::vector<RunConfig>& configs,
                                               const std::vector<std::filesystem::path>& dirs) {
    std::vector<SuiteEntryResult> out(configs.size());
    const auto one = [&](std::size_t i) {
        out[i].name = configs[i].name;
        try {
            out[i].result = run_experiment(configs[i], i < dirs.size() ? dirs[i] : std::filesystem::path{});
        } catch (const std::exception& e) {
            out[i].error = e.what();
        }
    };
    const std::size_t workers =
        std::min<std::size_t>(configs.size(), std::max(1U, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < configs.size(); ++i) one(i);
    } else {
        std::vector<std::jthread> threads;
        for (std::size_t w = 0; w < workers; ++w) {
            threads.emplace_back([&, w] {
                for (std::size_t i = w; i < configs.size(); i += workers) one(i);
            });
        }
    }
    return out;
}

}  // namespace rdgd
