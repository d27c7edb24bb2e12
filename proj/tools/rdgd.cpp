// rdgd: command-line front end for the resilient distributed GD simulator.
// Exit codes: 0 all checks pass or skip, 1 a check failed, 2 configuration error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rdgd/rdgd.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw rdgd::ConfigError("cannot write " + path.string());
    out << text;
}

fs::path output_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("RDGD_OUTPUT_DIR"); env && *env) return env;
    return {};
}

fs::path place(const fs::path& dir, const std::string& configured, const std::string& fallback) {
    const std::string& name = configured.empty() ? fallback : configured;
    if (name.empty()) return {};
    fs::path p(name);
    return p.is_relative() && !dir.empty() ? dir / p : p;
}

// --- generate -------------------------------------------------------------

struct GenerateArgs {
    rdgd::GeneratorSpec spec;
    std::string preset;
    std::string output;
    std::size_t subset_floor = 1;
};

int cmd_generate(const GenerateArgs& a) {
    const rdgd::CostFamily family = a.preset.empty() ? rdgd::generate_family(a.spec) : rdgd::preset_family(a.preset);
    const std::string doc = rdgd::family_to_json(family).dump(2) + "\n";
    const auto floor = std::min(std::max<std::size_t>(a.subset_floor, 1), family.size());
    const auto cert = rdgd::certify_constants(family, floor);
    const json cert_json{{"agents", family.size()},
                         {"dimension", family.dimension()},
                         {"mu", cert.mu},
                         {"gamma", cert.gamma},
                         {"subset_floor", cert.subset_floor}};
    if (a.output.empty() || a.output == "-") {
        std::cout << doc;
        std::cerr << cert_json.dump() << "\n";
    } else {
        write_text(a.output, doc);
        std::cout << cert_json.dump(2) << "\n";
    }
    return kExitOk;
}

// --- analyze --------------------------------------------------------------

struct AnalyzeArgs {
    std::string family;
    std::string preset;
    std::size_t f = 0;
    std::size_t r = 0;
    bool grid = false;
    bool json_out = false;
};

rdgd::CostFamily load_family(const std::string& file, const std::string& preset) {
    if (!file.empty() && !preset.empty()) throw rdgd::ConfigError("give either --family or --preset, not both");
    if (!file.empty()) return rdgd::family_from_json(rdgd::read_json_file(file));
    return rdgd::preset_family(preset.empty() ? "line3" : preset);
}

int cmd_analyze(const AnalyzeArgs& a) {
    const auto family = load_family(a.family, a.preset);
    const std::size_t n = family.size();
    if (a.grid) {
        std::cout << "f,r,epsilon\n";
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t f = 0; 2 * f < n - r; ++f) {
                const auto rep = rdgd::compute_epsilon(family, f, r);
                std::cout << f << ',' << r << ',' << rdgd::format_double(rep.epsilon) << '\n';
            }
        }
        return kExitOk;
    }
    const auto rep = rdgd::compute_epsilon(family, a.f, a.r);
    if (a.json_out) {
        std::cout << rdgd::redundancy_to_json(rep).dump(2) << "\n";
    } else {
        std::cout << "epsilon(f=" << a.f << ", r=" << a.r << ") = " << rdgd::format_double(rep.epsilon) << " over "
                  << rep.pairs_examined << " pairs\n";
    }
    return kExitOk;
}

// --- bounds ---------------------------------------------------------------

int cmd_bounds(const std::string& config_path) {
    const auto config = rdgd::run_config_from_json(rdgd::read_json_file(config_path));
    const auto run = rdgd::resolve_run(config, fs::path(config_path).parent_path());
    json j{{"certificate", {{"mu", run.certificate.mu}, {"gamma", run.certificate.gamma}}},
           {"redundancy", rdgd::redundancy_to_json(run.redundancy)},
           {"Gamma", run.Gamma},
           {"warnings", run.warnings}};
    j["bounds"] = run.bounds ? rdgd::bounds_to_json(*run.bounds) : json(nullptr);
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

// --- run ------------------------------------------------------------------

struct RunArgs {
    std::string config;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<rdgd::Iteration> iterations;
    std::optional<std::size_t> replications;
    std::optional<std::size_t> tail_window;
    bool parallel_agents = false;
    bool full_vectors = false;
    bool json_out = false;
};

int cmd_run(const RunArgs& a) {
    auto config = rdgd::run_config_from_json(rdgd::read_json_file(a.config));
    if (a.seed) config.seed = *a.seed;
    if (a.iterations) config.iterations = *a.iterations;
    if (a.replications) config.replications = *a.replications;
    if (a.tail_window) config.tail_window = *a.tail_window;
    if (a.parallel_agents) config.parallel_agents = true;
    if (a.full_vectors) config.output.full_vectors = true;

    const auto res = rdgd::run_experiment(config, fs::path(a.config).parent_path());
    const auto header = rdgd::trace_header(res);
    const fs::path dir = output_dir(a.out_dir);
    const bool defaults = !dir.empty();
    if (const auto p = place(dir, config.output.trace_csv, defaults ? config.name + ".trace.csv" : ""); !p.empty()) {
        std::ostringstream s;
        rdgd::write_trace_csv(s, res.trace, header);
        write_text(p, s.str());
    }
    if (const auto p = place(dir, config.output.trace_json, ""); !p.empty()) {
        write_text(p, rdgd::trace_to_json(res.trace, header, config.output.full_vectors).dump() + "\n");
    }
    const json summary = rdgd::summary_to_json(res);
    if (const auto p = place(dir, config.output.summary, defaults ? config.name + ".summary.json" : ""); !p.empty()) {
        write_text(p, summary.dump(2) + "\n");
    }
    if (!res.curve.empty()) {
        if (const auto p = place(dir, config.output.curve_csv, defaults ? config.name + ".curve.csv" : "");
            !p.empty()) {
            std::ostringstream s;
            rdgd::write_curve_csv(s, res);
            write_text(p, s.str());
        }
    }
    if (a.json_out) {
        std::cout << summary.dump(2) << "\n";
    } else {
        std::cout << config.name << ": " << res.status_text() << " (tail max "
                  << rdgd::format_double(res.tail_max_distance) << " over " << res.tail_window << " records)\n";
        for (const auto& c : res.checks) {
            std::cout << "  " << (c.satisfied ? "ok   " : "FAIL ") << c.name << ": " << rdgd::format_double(c.value)
                      << " <= " << rdgd::format_double(c.bound) << "\n";
        }
        for (const auto& w : res.run.warnings) std::cout << "  warning: " << w << "\n";
    }
    return res.status == rdgd::RunStatus::Fail ? kExitCheckFailed : kExitOk;
}

// --- suite ----------------------------------------------------------------

int cmd_suite(const std::string& manifest_path, const std::string& report, bool json_out) {
    std::vector<fs::path> dirs;
    const auto configs =
        rdgd::load_manifest(rdgd::read_json_file(manifest_path), fs::path(manifest_path).parent_path(), &dirs);
    const auto results = rdgd::run_suite(configs, dirs);

    int code = kExitOk;
    json rows = json::array();
    for (const auto& e : results) {
        if (!e.result) {
            code = kExitConfig;
            rows.push_back({{"name", e.name}, {"status", "error"}, {"error", e.error}});
            if (!json_out) std::cout << "ERROR " << e.name << ": " << e.error << "\n";
            continue;
        }
        const auto& r = *e.result;
        if (r.status == rdgd::RunStatus::Fail && code == kExitOk) code = kExitCheckFailed;
        json row = rdgd::summary_to_json(r);
        row.erase("mc_curve");
        rows.push_back(row);
        if (!json_out) {
            std::string tag = r.status == rdgd::RunStatus::Pass ? "PASS" : r.status == rdgd::RunStatus::Fail ? "FAIL" : "SKIP";
            std::cout << tag << ' ' << e.name << ": " << r.status_text();
            for (const auto& c : r.checks) {
                std::cout << "; " << c.name << ' ' << rdgd::format_double(c.value) << " <= "
                          << rdgd::format_double(c.bound);
            }
            std::cout << "\n";
        }
    }
    const json doc{{"experiments", rows}};
    if (json_out) std::cout << doc.dump(2) << "\n";
    if (!report.empty()) write_text(report, doc.dump(2) + "\n");
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Resilient distributed gradient descent simulator"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "write a random quadratic cost family");
    g->add_option("--seed", gen.spec.seed, "generator seed");
    g->add_option("--n", gen.spec.n, "number of agents")->check(CLI::PositiveNumber);
    g->add_option("--d", gen.spec.d, "dimension")->check(CLI::PositiveNumber);
    g->add_option("--spread", gen.spec.spread, "centers uniform in [-spread, spread]^d");
    g->add_option("--eig-lo", gen.spec.eig_lo, "smallest eigenvalue of each A_i");
    g->add_option("--eig-hi", gen.spec.eig_hi, "largest eigenvalue of each A_i");
    g->add_option("--preset", gen.preset, "named family instead of a random one (line3)");
    g->add_option("--subset-floor", gen.subset_floor, "smallest subset size in the gamma certificate");
    g->add_option("-o,--output", gen.output, "family file ('-' for stdout)");

    AnalyzeArgs an;
    auto* a = app.add_subcommand("analyze", "exact (f, r; epsilon)-redundancy of a family");
    a->add_option("--family", an.family, "family JSON file");
    a->add_option("--preset", an.preset, "named family");
    a->add_option("--f", an.f, "Byzantine budget");
    a->add_option("--r", an.r, "straggler budget");
    a->add_flag("--grid", an.grid, "CSV of epsilon over every feasible (f, r)");
    a->add_flag("--json", an.json_out, "JSON report");

    std::string bounds_config;
    auto* b = app.add_subcommand("bounds", "closed-form bound constants for a run config");
    b->add_option("--config", bounds_config, "run config JSON")->required();
    b->add_flag("--json", "accepted for symmetry; output is always JSON");

    RunArgs ra;
    auto* r = app.add_subcommand("run", "simulate one config and check its bounds");
    r->add_option("--config", ra.config, "run config JSON")->required();
    r->add_option("--out-dir", ra.out_dir, "output directory (default: $RDGD_OUTPUT_DIR)");
    r->add_option("--seed", ra.seed, "master seed");
    r->add_option("--iterations", ra.iterations, "iteration count T");
    r->add_option("--replications", ra.replications, "Monte-Carlo replications (stochastic mode)");
    r->add_option("--tail-window", ra.tail_window, "records in the tail window");
    r->add_flag("--parallel-agents", ra.parallel_agents, "evaluate agent gradients on worker threads");
    r->add_flag("--full-vectors", ra.full_vectors, "include x and aggregates in the JSON trace");
    r->add_flag("--json", ra.json_out, "print the summary JSON");

    std::string manifest, report;
    bool suite_json = false;
    auto* s = app.add_subcommand("suite", "run every experiment in a manifest");
    s->add_option("--manifest", manifest, "manifest JSON")->required();
    s->add_option("--report", report, "write the JSON report here");
    s->add_flag("--json", suite_json, "print the JSON report instead of one line per experiment");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*g) return cmd_generate(gen);
        if (*a) return cmd_analyze(an);
        if (*b) return cmd_bounds(bounds_config);
        if (*r) return cmd_run(ra);
        if (*s) return cmd_suite(manifest, report, suite_json);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
