#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rdgd/bounds.hpp"
#include "rdgd/costs.hpp"
#include "rdgd/engine.hpp"
#include "rdgd/errors.hpp"
#include "rdgd/faults.hpp"
#include "rdgd/filters.hpp"
#include "rdgd/rng.hpp"
#include "rdgd/simnet.hpp"

namespace rdgd {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Cost family documents: {"dimension": d, "agents": [{"A": [[...]], "b": [...]}]}

inline json family_to_json(const CostFamily& family) {
    json agents = json::array();
    for (const auto& c : family.costs()) {
        json rows = json::array();
        for (Eigen::Index i = 0; i < c.A().rows(); ++i) {
            json row = json::array();
            for (Eigen::Index j = 0; j < c.A().cols(); ++j) row.push_back(c.A()(i, j));
            rows.push_back(std::move(row));
        }
        agents.push_back({{"A", std::move(rows)}, {"b", to_std(c.b())}});
    }
    return {{"dimension", family.dimension()}, {"agents", std::move(agents)}};
}

inline CostFamily family_from_json(const json& doc) {
    try {
        const auto d = doc.at("dimension").get<Eigen::Index>();
        if (d < 1) throw ConfigError("family: dimension must be positive");
        std::vector<QuadraticCost> costs;
        for (const auto& a : doc.at("agents")) {
            const auto rows = a.at("A").get<std::vector<std::vector<double>>>();
            const auto b = a.at("b").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(rows.size()) != d || static_cast<Eigen::Index>(b.size()) != d) {
                throw ConfigError("family: agent matrix/vector does not match dimension " + std::to_string(d));
            }
            Matrix A(d, d);
            for (Eigen::Index i = 0; i < d; ++i) {
                if (static_cast<Eigen::Index>(rows[i].size()) != d) throw ConfigError("family: A is not square");
                for (Eigen::Index j = 0; j < d; ++j) A(i, j) = rows[i][j];
            }
            costs.emplace_back(std::move(A), to_vector(b));
        }
        return CostFamily(std::move(costs));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("family: malformed document: ") + e.what());
    } catch (const PreconditionError& e) {
        throw ConfigError(std::string("family: ") + e.what());
    }
}

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("cannot parse " + path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Presets and the random generator

/// d = 1, unit curvature, minimizers at 0, 1, 2.
inline CostFamily preset_line3() {
    std::vector<QuadraticCost> c;
    for (double center : {0.0, 1.0, 2.0}) c.push_back(QuadraticCost::centered(Vector::Constant(1, center)));
    return CostFamily(std::move(c));
}

inline CostFamily preset_family(const std::string& name) {
    if (name == "line3") return preset_line3();
    throw ConfigError("unknown family preset '" + name + "'");
}

struct GeneratorSpec {
    std::uint64_t seed = 0;
    std::size_t n = 3;
    std::size_t d = 1;
    double spread = 1.0;  // centers uniform in [-spread, spread]^d
    double eig_lo = 1.0;  // eigenvalues of each A_i uniform in [eig_lo, eig_hi]
    double eig_hi = 2.0;

    bool operator==(const GeneratorSpec&) const = default;
};

/// A_i = Q diag(lambda) Q' with Haar-ish random rotation Q, b_i = A_i c_i.
/// eig_lo == eig_hi gives A_i = eig_lo * I exactly.
inline CostFamily generate_family(const GeneratorSpec& g) {
    if (g.n < 1 || g.d < 1) throw ConfigError("generate: need n, d >= 1");
    if (!(g.eig_lo > 0.0) || g.eig_hi < g.eig_lo) throw ConfigError("generate: need 0 < eig_lo <= eig_hi");
    if (!(g.spread >= 0.0)) throw ConfigError("generate: spread must be nonnegative");
    const auto d = static_cast<Eigen::Index>(g.d);
    std::vector<QuadraticCost> costs;
    for (std::size_t i = 0; i < g.n; ++i) {
        Rng rng(derive_seed(g.seed, {stream::kGenerator, i}));
        Matrix A;
        if (g.eig_lo == g.eig_hi) {
            A = g.eig_lo * Matrix::Identity(d, d);
        } else {
            Matrix gauss(d, d);
            for (Eigen::Index r = 0; r < d; ++r)
                for (Eigen::Index c = 0; c < d; ++c) gauss(r, c) = rng.normal();
            const Matrix Q = Eigen::HouseholderQR<Matrix>(gauss).householderQ();
            Vector lambda(d);
            for (Eigen::Index k = 0; k < d; ++k) lambda[k] = rng.uniform(g.eig_lo, g.eig_hi);
            A = Q * lambda.asDiagonal() * Q.transpose();
        }
        Vector center(d);
        for (Eigen::Index k = 0; k < d; ++k) center[k] = rng.uniform(-g.spread, g.spread);
        Vector b = A * center;
        costs.emplace_back(std::move(A), std::move(b));
    }
    return CostFamily(std::move(costs));
}

// ---------------------------------------------------------------------------
// Run configuration

namespace family_source {
struct Preset {
    std::string name;
    bool operator==(const Preset&) const = default;
};
struct File {
    std::string path;
    bool operator==(const File&) const = default;
};
struct Generate {
    GeneratorSpec spec;
    bool operator==(const Generate&) const = default;
};
struct Inline {
    CostFamily family;
    bool operator==(const Inline&) const = default;
};
}  // namespace family_source

using FamilySource =
    std::variant<family_source::Preset, family_source::File, family_source::Generate, family_source::Inline>;

struct ScheduleSpec {
    enum class Kind { Harmonic, Constant } kind = Kind::Harmonic;
    std::optional<double> eta0;          // harmonic; default 1 / (n mu)
    std::optional<double> eta;           // constant, absolute
    std::optional<double> eta_fraction;  // constant, as a fraction of eta_bar

    bool operator==(const ScheduleSpec&) const = default;
};

struct BoxSpec {
    std::optional<double> half_width = 10.0;
    std::vector<double> lower;
    std::vector<double> upper;

    bool operator==(const BoxSpec&) const = default;
};

struct OutputSpec {
    std::string trace_csv;
    std::string trace_json;
    std::string summary;
    std::string curve_csv;
    bool full_vectors = false;

    bool operator==(const OutputSpec&) const = default;
};

struct RunConfig {
    std::string name = "run";
    FamilySource family = family_source::Preset{"line3"};
    std::optional<std::size_t> n;  // cross-checked against the family when given
    std::size_t f = 0;
    std::size_t r = 0;
    Mode mode = Mode::Sync;
    std::size_t tau = 0;
    std::optional<StochasticProblem> problem;
    FilterVariant filter = FilterVariant::Sum;
    std::vector<AgentRole> roles;  // empty = everyone honest
    DelayModel delay = delay::Constant{0};
    ScheduleSpec schedule;
    Iteration iterations = 1000;
    std::size_t replications = 1;
    BoxSpec box;
    std::optional<std::vector<double>> x0;
    std::uint64_t seed = 0;
    StochasticGradConfig stochastic;
    std::optional<std::size_t> tail_window;
    double tolerance = 0.0;
    std::optional<double> delta;
    std::optional<double> dstar;
    bool parallel_agents = false;
    OutputSpec output;

    bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline Mode parse_mode(const std::string& s) {
    if (s == "sync") return Mode::Sync;
    if (s == "async") return Mode::Async;
    if (s == "stale") return Mode::Stale;
    if (s == "stochastic") return Mode::Stochastic;
    throw ConfigError("unknown mode '" + s + "' (expected sync | async | stale | stochastic)");
}

inline json delay_to_json(const DelayModel& m) {
    return std::visit(
        [](const auto& d) -> json {
            using D = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<D, delay::Constant>) {
                return {{"model", "constant"}, {"iterations", d.iterations}};
            } else if constexpr (std::is_same_v<D, delay::GeometricTail>) {
                return {{"model", "geometric"}, {"p", d.p}};
            } else if constexpr (std::is_same_v<D, delay::FixedSlowSet>) {
                json j{{"model", "fixed_slow"}, {"agents", d.agents}};
                j["extra"] = d.extra ? json(*d.extra) : json(nullptr);
                return j;
            } else {
                return {{"model", "round_robin"}, {"count", d.count}, {"extra", d.extra}};
            }
        },
        m);
}

inline DelayModel delay_from_json(const json& j) {
    const auto model = j.at("model").get<std::string>();
    if (model == "constant") return delay::Constant{j.value("iterations", Delay{0})};
    if (model == "geometric") return delay::GeometricTail{j.at("p").get<double>()};
    if (model == "fixed_slow") {
        delay::FixedSlowSet s;
        s.agents = j.at("agents").get<AgentSet>();
        std::sort(s.agents.begin(), s.agents.end());
        if (j.contains("extra") && !j.at("extra").is_null()) s.extra = j.at("extra").get<Delay>();
        return s;
    }
    if (model == "round_robin") return delay::RoundRobin{j.value("count", std::size_t{1}), j.value("extra", Delay{1})};
    throw ConfigError("unknown delay model '" + model + "' (expected constant | geometric | fixed_slow | round_robin)");
}

template <class T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
    if (v) j[key] = *v;
}

template <class T>
std::optional<T> get_optional(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

}  // namespace detail

inline json to_json(const RunConfig& c) {
    json j;
    j["name"] = c.name;
    j["family"] = std::visit(
        [](const auto& s) -> json {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, family_source::Preset>) {
                return {{"preset", s.name}};
            } else if constexpr (std::is_same_v<S, family_source::File>) {
                return {{"file", s.path}};
            } else if constexpr (std::is_same_v<S, family_source::Generate>) {
                return {{"generate",
                         {{"seed", s.spec.seed}, {"n", s.spec.n}, {"d", s.spec.d}, {"spread", s.spec.spread},
                          {"eig_lo", s.spec.eig_lo}, {"eig_hi", s.spec.eig_hi}}}};
            } else {
                return {{"inline", family_to_json(s.family)}};
            }
        },
        c.family);
    detail::put_optional(j, "n", c.n);
    j["f"] = c.f;
    j["r"] = c.r;
    j["mode"] = std::string(to_string(c.mode));
    j["tau"] = c.tau;
    if (c.problem) j["problem"] = std::string(to_string(*c.problem));
    j["filter"] = std::string(to_string(c.filter));
    json roles = json::array();
    for (const auto& r : c.roles) roles.push_back(to_string(r));
    j["roles"] = std::move(roles);
    j["delay"] = detail::delay_to_json(c.delay);
    json sched;
    sched["kind"] = c.schedule.kind == ScheduleSpec::Kind::Harmonic ? "harmonic" : "constant";
    detail::put_optional(sched, "eta0", c.schedule.eta0);
    detail::put_optional(sched, "eta", c.schedule.eta);
    detail::put_optional(sched, "eta_fraction", c.schedule.eta_fraction);
    j["schedule"] = std::move(sched);
    j["iterations"] = c.iterations;
    j["replications"] = c.replications;
    json box;
    detail::put_optional(box, "half_width", c.box.half_width);
    if (!c.box.lower.empty()) box["lower"] = c.box.lower;
    if (!c.box.upper.empty()) box["upper"] = c.box.upper;
    j["box"] = std::move(box);
    detail::put_optional(j, "x0", c.x0);
    j["seed"] = c.seed;
    j["stochastic"] = {{"sigma", c.stochastic.sigma},
                       {"batch_size", c.stochastic.batch_size},
                       {"noise", c.stochastic.noise_model == NoiseModel::UniformSphere ? "uniform-sphere"
                                                                                       : "gaussian-isotropic-truncated"}};
    detail::put_optional(j, "tail_window", c.tail_window);
    j["tolerance"] = c.tolerance;
    detail::put_optional(j, "delta", c.delta);
    detail::put_optional(j, "dstar", c.dstar);
    j["parallel_agents"] = c.parallel_agents;
    j["output"] = {{"trace_csv", c.output.trace_csv},
                   {"trace_json", c.output.trace_json},
                   {"summary", c.output.summary},
                   {"curve_csv", c.output.curve_csv},
                   {"full_vectors", c.output.full_vectors}};
    return j;
}

/// Missing keys take the RunConfig defaults.
inline RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    try {
        c.name = j.value("name", c.name);
        if (j.contains("family")) {
            const auto& fam = j.at("family");
            if (fam.contains("preset")) {
                c.family = family_source::Preset{fam.at("preset").get<std::string>()};
            } else if (fam.contains("file")) {
                c.family = family_source::File{fam.at("file").get<std::string>()};
            } else if (fam.contains("generate")) {
                const auto& g = fam.at("generate");
                GeneratorSpec s;
                s.seed = g.value("seed", s.seed);
                s.n = g.value("n", s.n);
                s.d = g.value("d", s.d);
                s.spread = g.value("spread", s.spread);
                s.eig_lo = g.value("eig_lo", s.eig_lo);
                s.eig_hi = g.value("eig_hi", s.eig_hi);
                c.family = family_source::Generate{s};
            } else if (fam.contains("inline")) {
                c.family = family_source::Inline{family_from_json(fam.at("inline"))};
            } else {
                throw ConfigError("family: expected one of preset | file | generate | inline");
            }
        }
        c.n = detail::get_optional<std::size_t>(j, "n");
        c.f = j.value("f", c.f);
        c.r = j.value("r", c.r);
        if (j.contains("mode")) c.mode = detail::parse_mode(j.at("mode").get<std::string>());
        c.tau = j.value("tau", c.tau);
        if (auto p = detail::get_optional<std::string>(j, "problem")) c.problem = parse_problem(*p);
        if (j.contains("filter")) c.filter = parse_filter(j.at("filter").get<std::string>());
        if (j.contains("roles")) {
            for (const auto& r : j.at("roles")) c.roles.push_back(parse_role(r.get<std::string>()));
        }
        if (j.contains("delay")) c.delay = detail::delay_from_json(j.at("delay"));
        if (j.contains("schedule")) {
            const auto& s = j.at("schedule");
            const auto kind = s.value("kind", std::string("harmonic"));
            if (kind == "harmonic") c.schedule.kind = ScheduleSpec::Kind::Harmonic;
            else if (kind == "constant") c.schedule.kind = ScheduleSpec::Kind::Constant;
            else throw ConfigError("schedule: unknown kind '" + kind + "' (expected harmonic | constant)");
            c.schedule.eta0 = detail::get_optional<double>(s, "eta0");
            c.schedule.eta = detail::get_optional<double>(s, "eta");
            c.schedule.eta_fraction = detail::get_optional<double>(s, "eta_fraction");
        }
        c.iterations = j.value("iterations", c.iterations);
        c.replications = j.value("replications", c.replications);
        if (j.contains("box")) {
            const auto& b = j.at("box");
            c.box.half_width = detail::get_optional<double>(b, "half_width");
            c.box.lower = b.value("lower", std::vector<double>{});
            c.box.upper = b.value("upper", std::vector<double>{});
        }
        c.x0 = detail::get_optional<std::vector<double>>(j, "x0");
        c.seed = j.value("seed", c.seed);
        if (j.contains("stochastic")) {
            const auto& s = j.at("stochastic");
            c.stochastic.sigma = s.value("sigma", 0.0);
            c.stochastic.batch_size = s.value("batch_size", 1);
            const auto noise = s.value("noise", std::string("gaussian-isotropic-truncated"));
            if (noise == "uniform-sphere") c.stochastic.noise_model = NoiseModel::UniformSphere;
            else if (noise == "gaussian-isotropic-truncated") c.stochastic.noise_model = NoiseModel::GaussianTruncated;
            else throw ConfigError("stochastic: unknown noise model '" + noise + "'");
        }
        c.tail_window = detail::get_optional<std::size_t>(j, "tail_window");
        c.tolerance = j.value("tolerance", c.tolerance);
        c.delta = detail::get_optional<double>(j, "delta");
        c.dstar = detail::get_optional<double>(j, "dstar");
        c.parallel_agents = j.value("parallel_agents", c.parallel_agents);
        if (j.contains("output")) {
            const auto& o = j.at("output");
            c.output.trace_csv = o.value("trace_csv", std::string{});
            c.output.trace_json = o.value("trace_json", std::string{});
            c.output.summary = o.value("summary", std::string{});
            c.output.curve_csv = o.value("curve_csv", std::string{});
            c.output.full_vectors = o.value("full_vectors", false);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

/// FNV-1a over the canonical JSON form. Output paths and the agent
/// threading switch cannot change a trajectory and are left out.
inline std::string config_hash(const RunConfig& c) {
    json j = to_json(c);
    j.erase("output");
    j.erase("parallel_agents");
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline CostFamily resolve_family(const FamilySource& src, const std::filesystem::path& base_dir = {}) {
    return std::visit(
        [&](const auto& s) -> CostFamily {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, family_source::Preset>) {
                return preset_family(s.name);
            } else if constexpr (std::is_same_v<S, family_source::File>) {
                std::filesystem::path p(s.path);
                if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
                return family_from_json(read_json_file(p));
            } else if constexpr (std::is_same_v<S, family_source::Generate>) {
                return generate_family(s.spec);
            } else {
                return s.family;
            }
        },
        src);
}

}  // namespace rdgd
