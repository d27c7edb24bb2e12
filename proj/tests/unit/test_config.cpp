#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "generators.hpp"
#include "rdgd/config.hpp"

using namespace rdgd;

namespace {

RunConfig random_config(Rng& rng) {
    RunConfig c;
    c.name = "cfg" + std::to_string(rng.next() % 1000);
    switch (rng.next() % 4) {
        case 0: c.family = family_source::Preset{"line3"}; break;
        case 1: c.family = family_source::File{"families/f.json"}; break;
        case 2: c.family = family_source::Generate{{rng.next(), 4, 2, 0.5, 1.0, 1.5}}; break;
        default: c.family = family_source::Inline{gen::family(rng, 3, 2)}; break;
    }
    if (rng.next() % 2) c.n = 4;
    c.f = gen::index(rng, 0, 2);
    c.r = gen::index(rng, 0, 2);
    c.mode = static_cast<Mode>(rng.next() % 4);
    c.tau = gen::index(rng, 0, 3);
    if (rng.next() % 2) c.problem = static_cast<StochasticProblem>(rng.next() % 3);
    c.filter = static_cast<FilterVariant>(rng.next() % 3);
    for (const char* role : {"honest", "reverse", "random:0.5", "large:20", "centerflip"}) {
        if (rng.next() % 2) c.roles.push_back(parse_role(role));
    }
    switch (rng.next() % 4) {
        case 0: c.delay = delay::Constant{Delay(rng.next() % 3)}; break;
        case 1: c.delay = delay::GeometricTail{rng.uniform(0.1, 1.0)}; break;
        case 2: c.delay = delay::FixedSlowSet{{1, 3}, rng.next() % 2 ? std::optional<Delay>(2) : std::nullopt}; break;
        default: c.delay = delay::RoundRobin{2, 3}; break;
    }
    c.schedule.kind = rng.next() % 2 ? ScheduleSpec::Kind::Harmonic : ScheduleSpec::Kind::Constant;
    if (rng.next() % 2) c.schedule.eta0 = rng.uniform(0, 1);
    if (rng.next() % 2) c.schedule.eta = rng.uniform(0, 1);
    if (rng.next() % 2) c.schedule.eta_fraction = rng.uniform(0, 1);
    c.iterations = Iteration(rng.next() % 10000);
    c.replications = gen::index(rng, 1, 300);
    if (rng.next() % 2) {
        c.box.half_width = rng.uniform(1, 10);
    } else {
        c.box.half_width.reset();
        c.box.lower = {-1.0, -2.0};
        c.box.upper = {1.0, rng.uniform(0, 3)};
    }
    if (rng.next() % 2) c.x0 = std::vector<double>{rng.uniform(-1, 1), 0.1};
    c.seed = rng.next();
    c.stochastic = {rng.uniform(0, 1), static_cast<int>(gen::index(rng, 1, 8)),
                    rng.next() % 2 ? NoiseModel::UniformSphere : NoiseModel::GaussianTruncated};
    if (rng.next() % 2) c.tail_window = gen::index(rng, 1, 500);
    c.tolerance = rng.uniform(0, 0.1);
    if (rng.next() % 2) c.delta = rng.uniform(0, 0.1);
    if (rng.next() % 2) c.dstar = rng.uniform(0, 5);
    c.parallel_agents = rng.next() % 2;
    c.output = {"t.csv", rng.next() % 2 ? "t.json" : "", "s.json", "", rng.next() % 2 == 0};
    return c;
}

}  // namespace

TEST(RunConfig, RoundTripsThroughJson) {
    Rng rng(71);
    for (int k = 0; k < 200; ++k) {
        const auto c = random_config(rng);
        const auto text = to_json(c).dump();
        const auto back = run_config_from_json(json::parse(text));
        EXPECT_TRUE(back == c) << text;
        EXPECT_EQ(to_json(back).dump(), text);
    }
}

TEST(RunConfig, DefaultsFillMissingKeys) {
    const auto c = run_config_from_json(json::parse(R"({"f": 1})"));
    RunConfig expected;
    expected.f = 1;
    EXPECT_TRUE(c == expected);
}

TEST(RunConfig, RejectsUnknownNames) {
    EXPECT_THROW(run_config_from_json(json::parse(R"({"mode": "warp"})")), ConfigError);
    EXPECT_THROW(run_config_from_json(json::parse(R"({"filter": "krum"})")), ConfigError);
    EXPECT_THROW(run_config_from_json(json::parse(R"({"roles": ["evil"]})")), ConfigError);
    EXPECT_THROW(run_config_from_json(json::parse(R"({"delay": {"model": "poisson"}})")), ConfigError);
    EXPECT_THROW(run_config_from_json(json::parse(R"({"family": {"magic": 1}})")), ConfigError);
    EXPECT_THROW(run_config_from_json(json::parse(R"({"f": "one"})")), ConfigError);
}

TEST(ConfigHash, IgnoresOutputsAndThreading) {
    RunConfig a;
    RunConfig b = a;
    b.output.trace_csv = "elsewhere.csv";
    b.parallel_agents = true;
    EXPECT_EQ(config_hash(a), config_hash(b));
    b.seed = 1;
    EXPECT_NE(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 16U);
}

TEST(Family, JsonRoundTrip) {
    Rng rng(72);
    const auto fam = gen::family(rng, 4, 3);
    EXPECT_TRUE(family_from_json(json::parse(family_to_json(fam).dump())) == fam);
}

TEST(Family, MalformedDocuments) {
    EXPECT_THROW(family_from_json(json::parse(R"({"dimension": 2, "agents": [{"A": [[1]], "b": [0, 0]}]})")),
                 ConfigError);
    EXPECT_THROW(family_from_json(json::parse(R"({"agents": []})")), ConfigError);
    EXPECT_THROW(family_from_json(json::parse(R"({"dimension": 1, "agents": []})")), ConfigError);
    EXPECT_THROW(family_from_json(json::parse(R"({"dimension": 1, "agents": [{"A": [[-1]], "b": [0]}]})")),
                 ConfigError);
}

TEST(Generator, DeterministicBytes) {
    const GeneratorSpec g{42, 5, 3, 2.0, 0.5, 2.0};
    EXPECT_EQ(family_to_json(generate_family(g)).dump(2), family_to_json(generate_family(g)).dump(2));
    GeneratorSpec other = g;
    other.seed = 43;
    EXPECT_NE(family_to_json(generate_family(g)).dump(), family_to_json(generate_family(other)).dump());
}

TEST(Generator, SpectrumAndCentersInRange) {
    const GeneratorSpec g{7, 6, 4, 1.5, 0.5, 2.0};
    const auto fam = generate_family(g);
    for (const auto& c : fam.costs()) {
        const auto ev = Eigen::SelfAdjointEigenSolver<Matrix>(c.A()).eigenvalues();
        EXPECT_GE(ev.minCoeff(), 0.5 - 1e-12);
        EXPECT_LE(ev.maxCoeff(), 2.0 + 1e-12);
        const Vector center = c.A().ldlt().solve(c.b());
        EXPECT_LE(center.cwiseAbs().maxCoeff(), 1.5 + 1e-9);
    }
}

TEST(Generator, ZeroSpreadMeansZeroEpsilon) {
    const auto fam = generate_family({3, 5, 2, 0.0, 0.5, 2.0});
    EXPECT_EQ(compute_epsilon(fam, 1, 1).epsilon, 0.0);
}

TEST(Generator, UnitCurvatureIsExact) {
    const auto fam = generate_family({3, 4, 3, 1.0, 1.0, 1.0});
    for (const auto& c : fam.costs()) EXPECT_TRUE(c.A() == Matrix::Identity(3, 3));
}

TEST(Presets, Line3) {
    const auto fam = preset_family("line3");
    ASSERT_EQ(fam.size(), 3U);
    EXPECT_EQ(fam.dimension(), 1);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(subset_minimizer(fam, {AgentId(i)}).minimizer[0], double(i));
    EXPECT_THROW(preset_family("nope"), ConfigError);
}

TEST(Family, ResolvesFilesRelativeToConfig) {
    const auto dir = std::filesystem::temp_directory_path() / "rdgd_config_test";
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "fam.json");
        out << family_to_json(preset_line3()).dump();
    }
    EXPECT_TRUE(resolve_family(family_source::File{"fam.json"}, dir) == preset_line3());
    EXPECT_THROW(resolve_family(family_source::File{"missing.json"}, dir), ConfigError);
    std::filesystem::remove_all(dir);
}
