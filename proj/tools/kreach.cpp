// kreach: sample, fit and run first-hitting safety estimators and oracles.

#include "kreach/config.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace kreach;

namespace {

struct GlobalOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    int threads = 0;
    std::string out;
    bool huge = false;
};

RunConfig load(const GlobalOptions& g) {
    RunConfig cfg = g.config.empty() ? run_config_from_json(nlohmann::json::object()) : load_run_config(g.config);
    if (g.seed) {
        cfg.seed = *g.seed;
        cfg.source["seed"] = *g.seed;
    }
    if (!g.out.empty()) cfg.out_dir = g.out;
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    return cfg;
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
    return (fs::path(cfg.out_dir) / name).string();
}

std::string gib(double bytes) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << bytes / (1024.0 * 1024.0 * 1024.0) << " GiB";
    return s.str();
}

constexpr double kHugeBytes = 4.0 * 1024 * 1024 * 1024;

// Prints the memory estimate for large runs and refuses very large ones
// without --huge.
void check_memory(const RunConfig& cfg, const std::vector<Method>& methods, bool huge) {
    double worst = 0.0;
    for (Method m : methods) worst = std::max(worst, estimated_memory_bytes(cfg, m));
    if (cfg.state_dimension() >= 1000 || worst > 1024.0 * 1024 * 1024) {
        std::cerr << "memory estimate: " << gib(worst) << " (state dim " << cfg.state_dimension() << ", M "
                  << cfg.sampling.size << ")\n";
    }
    if (worst > kHugeBytes && !huge) {
        throw ConfigError("estimated memory " + gib(worst) + " exceeds " + gib(kHugeBytes) +
                          "; rerun with --huge to proceed");
    }
}

void write_field(const RunConfig& cfg, const std::string& stem, const SafetyField& field) {
    write_field_json(out_path(cfg, stem + ".json"), field);
    write_field_csv(out_path(cfg, stem + ".csv"), field);
}

std::vector<Method> filter(const std::vector<Method>& methods, bool estimators) {
    std::vector<Method> out;
    for (Method m : methods) {
        if (is_estimator(m) == estimators) out.push_back(m);
    }
    return out;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ----------------------------------------------------------------------------

int cmd_sample(const GlobalOptions& g) {
    const RunConfig cfg = load(g);
    if (!cfg.sampling.file.empty()) throw ConfigError("sample: sampling.file is set; nothing to generate");
    check_memory(cfg, {}, g.huge);
    const auto sample = obtain_sample(cfg);
    const std::string path = out_path(cfg, "sample.csv");
    write_sample_csv(path, *sample);
    std::cout << "wrote " << sample->size() << " transitions to " << path << '\n';
    return 0;
}

int cmd_reach(const GlobalOptions& g) {
    const RunConfig cfg = load(g);
    const auto estimators = filter(cfg.methods, true);
    if (estimators.empty()) throw ConfigError("reach: method must include exact or rff (use dp / mc subcommands for oracles)");
    check_memory(cfg, estimators, g.huge);
    const PointMatrix points = build_eval_points(cfg);
    const auto sample = obtain_sample(cfg);
    for (Method m : estimators) {
        const MethodRun run = run_method(cfg, m, points, sample);
        write_field(cfg, std::string("field_") + to_string(m), run.field);
        std::cout << to_string(m) << ": " << points.rows() << " points, fit " << run.times.fit << " s, recursion "
                  << run.times.recursion << " s, max V0 " << run.field.layers.front().maxCoeff() << '\n';
    }
    return 0;
}

int cmd_oracle(const GlobalOptions& g, Method method) {
    RunConfig cfg = load(g);
    cfg.methods = {method};
    cfg.validate();
    const PointMatrix points = build_eval_points(cfg);
    const MethodRun run = run_method(cfg, method, points);
    write_field(cfg, std::string("field_") + to_string(method), run.field);
    std::cout << to_string(method) << ": " << points.rows() << " points in " << run.times.total() << " s\n";
    return 0;
}

int cmd_validate(const GlobalOptions& g) {
    const RunConfig cfg = load(g);
    const auto estimators = filter(cfg.methods, true);
    const auto oracles = filter(cfg.methods, false);
    if (estimators.empty() || cfg.methods.size() < 2) {
        throw ConfigError("validate: method must list an estimator (exact, rff) and a reference (dp, mc, or a "
                          "second estimator)");
    }
    check_memory(cfg, estimators, g.huge);
    const PointMatrix points = build_eval_points(cfg);
    const auto sample = obtain_sample(cfg);

    std::vector<std::pair<Method, SafetyField>> fields;
    for (Method m : cfg.methods) {
        const MethodRun run = run_method(cfg, m, points, is_estimator(m) ? sample : nullptr);
        write_field(cfg, std::string("field_") + to_string(m), run.field);
        fields.emplace_back(m, run.field);
    }

    // Compare every estimator with the first reference: the first oracle if
    // present, otherwise the first listed method.
    const Method reference = oracles.empty() ? cfg.methods.front() : oracles.front();
    const SafetyField* ref = nullptr;
    for (const auto& [m, f] : fields) {
        if (m == reference) {
            ref = &f;
            break;
        }
    }
    nlohmann::ordered_json report;
    report["reference"] = to_string(reference);
    report["points"] = points.rows();
    for (const auto& [m, f] : fields) {
        if (!is_estimator(m) || &f == ref) continue;
        const FieldError err = compare_fields(f, *ref);
        const std::string stem = std::string("error_") + to_string(m) + "_vs_" + to_string(reference);
        write_error_csv(out_path(cfg, stem + ".csv"), f, err);
        report["errors"][to_string(m)] = {{"max_abs", err.max_abs}, {"mean_abs", err.mean_abs}};
        std::cout << to_string(m) << " vs " << to_string(reference) << ": max abs " << err.max_abs << ", mean abs "
                  << err.mean_abs << '\n';
    }
    std::ofstream(out_path(cfg, "validate.json")) << report.dump(2) << '\n';
    return 0;
}

nlohmann::ordered_json fingerprint() {
    nlohmann::ordered_json env;
#if defined(__clang__)
    env["compiler"] = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
    env["compiler"] = std::string("gcc ") + __VERSION__;
#endif
    env["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                   std::to_string(EIGEN_MINOR_VERSION);
#ifdef _OPENMP
    env["openmp_threads"] = omp_get_max_threads();
#else
    env["openmp_threads"] = 1;
#endif
    env["hardware_threads"] = std::thread::hardware_concurrency();
    return env;
}

nlohmann::ordered_json timing_json(const std::vector<PhaseTimes>& runs) {
    std::vector<double> sample, fit, rec, total;
    for (const auto& t : runs) {
        sample.push_back(t.sample);
        fit.push_back(t.fit);
        rec.push_back(t.recursion);
        total.push_back(t.total());
    }
    return {{"sample_s", median(sample)}, {"fit_s", median(fit)}, {"recursion_s", median(rec)},
            {"total_s", median(total)},   {"iterations", runs.size()}};
}

// Median timings of one method; the final field is returned for error checks.
std::pair<nlohmann::ordered_json, SafetyField> time_method(const RunConfig& cfg, Method m, const PointMatrix& points) {
    for (int i = 0; i < cfg.bench.warmup; ++i) (void)run_method(cfg, m, points);
    std::vector<PhaseTimes> times;
    SafetyField last;
    for (int i = 0; i < cfg.bench.iterations; ++i) {
        MethodRun run = run_method(cfg, m, points);
        if (i > 0 && run.field.layers != last.layers) {
            throw NumericalError(std::string("bench: ") + to_string(m) + " results differ across repetitions");
        }
        times.push_back(run.times);
        last = std::move(run.field);
    }
    auto j = timing_json(times);
    j["per_step_recursion_s"] = cfg.horizon > 0 ? j["recursion_s"].get<double>() / cfg.horizon : 0.0;
    return {j, std::move(last)};
}

int cmd_bench(const GlobalOptions& g) {
    const RunConfig cfg = load(g);
    check_memory(cfg, cfg.methods, g.huge);
    const PointMatrix points = build_eval_points(cfg);

    nlohmann::ordered_json report;
    report["system"] = cfg.system.name;
    report["dimensions"] = {{"n", cfg.state_dimension()}, {"m", cfg.input_dimension()}, {"M", cfg.sampling.size},
                            {"D", cfg.rff.D},             {"N", cfg.horizon},          {"grid", points.rows()}};
    std::vector<std::pair<Method, SafetyField>> fields;
    for (Method m : cfg.methods) {
        auto [timing, field] = time_method(cfg, m, points);
        report["methods"][to_string(m)] = timing;
        std::cout << std::setw(6) << to_string(m) << "  total " << timing["total_s"].get<double>() << " s  (fit "
                  << timing["fit_s"].get<double>() << " s, recursion " << timing["recursion_s"].get<double>()
                  << " s)\n";
        fields.emplace_back(m, std::move(field));
    }
    for (const auto& [oracle, ref] : fields) {
        if (is_estimator(oracle)) continue;
        for (const auto& [m, f] : fields) {
            if (!is_estimator(m)) continue;
            report["errors"][std::string(to_string(m)) + "_vs_" + to_string(oracle)] = compare_fields(f, ref).max_abs;
        }
    }

    if (!cfg.bench.copies.empty()) {
        auto& sweep = report["repeated_quadrotor_sweep"] = nlohmann::ordered_json::array();
        for (int copies : cfg.bench.copies) {
            nlohmann::json src = cfg.source;
            src["method"] = {"exact", "rff"};
            src["system"] = {{"name", "repeated_quadrotor"}, {"copies", copies}, {"spacing", cfg.system.spacing}};
            for (const char* key : {"disturbance", "grid", "sampling"}) src.erase(key);
            src["sampling"] = {{"size", cfg.bench.sweep_size}};
            src["rff"]["D"] = cfg.bench.sweep_features;
            src["problem"]["horizon"] = cfg.bench.sweep_horizon;
            src["problem"].erase("policy");
            RunConfig sub = run_config_from_json(src);
            sub.seed = cfg.seed;
            sub.validate();
            check_memory(sub, sub.methods, g.huge);
            const PointMatrix point = build_eval_points(sub);
            nlohmann::ordered_json row;
            row["copies"] = copies;
            row["state_dim"] = sub.state_dimension();
            for (Method m : sub.methods) row[to_string(m)] = time_method(sub, m, point).first;
            std::cout << "copies " << std::setw(6) << copies << "  dim " << std::setw(7) << sub.state_dimension()
                      << "  exact " << row["exact"]["total_s"].get<double>() << " s  rff "
                      << row["rff"]["total_s"].get<double>() << " s\n";
            sweep.push_back(row);
        }
    }
    report["environment"] = fingerprint();
    report["config"] = cfg.source;
    const std::string path = out_path(cfg, "bench.json");
    std::ofstream(path) << report.dump(2) << '\n';
    std::cout << "wrote " << path << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kreach: first-hitting safety probabilities from sampled transitions"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalOptions g;
    std::uint64_t seed = 0;
    app.add_option("--config", g.config, "Run configuration file")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "Master seed (overrides the config)");
    app.add_option("--threads", g.threads, "Worker thread cap (0 = default)")->check(CLI::NonNegativeNumber);
    app.add_option("--out", g.out, "Output directory (overrides the config)");
    app.add_flag("--huge", g.huge, "Allow runs whose memory estimate exceeds 4 GiB");

    auto* sample = app.add_subcommand("sample", "Generate a transition sample CSV");
    auto* reach = app.add_subcommand("reach", "Fit embeddings and write safety fields");
    auto* validate = app.add_subcommand("validate", "Compare estimators against an oracle");
    auto* bench = app.add_subcommand("bench", "Time methods and the repeated-quadrotor sweep");
    auto* dp = app.add_subcommand("dp", "Grid dynamic-programming oracle");
    auto* mc = app.add_subcommand("mc", "Monte Carlo oracle");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (seed_opt->count() > 0) g.seed = seed;
    if (g.threads > 0) {
#ifdef _OPENMP
        omp_set_num_threads(g.threads);
#endif
        Eigen::setNbThreads(g.threads);
    }

    try {
        if (*sample) return cmd_sample(g);
        if (*reach) return cmd_reach(g);
        if (*validate) return cmd_validate(g);
        if (*bench) return cmd_bench(g);
        if (*dp) return cmd_oracle(g, Method::Dp);
        if (*mc) return cmd_oracle(g, Method::Mc);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const DimensionError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
