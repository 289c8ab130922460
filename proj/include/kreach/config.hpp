// Run configuration: a TOML-subset text format, validation, and builders
// that turn a configuration into systems, problems, samples and estimators.

#pragma once

#include "kreach/core.hpp"
#include "kreach/embedding.hpp"
#include "kreach/oracles.hpp"
#include "kreach/reachability.hpp"
#include "kreach/sampling.hpp"
#include "kreach/systems.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace kreach {

/// Parses `[section]` headers, `key = value` lines and `#` comments. Values
/// are double-quoted strings, numbers, true/false, or (nested) arrays.
/// Dotted section names nest. Throws ConfigError with the line number.
nlohmann::json parse_config_text(std::istream& in);
nlohmann::json parse_config_text(const std::string& text);
nlohmann::json parse_config_file(const std::string& path);

enum class Method { Exact, Rff, Dp, Mc };
const char* to_string(Method method);
Method parse_method(const std::string& text);
[[nodiscard]] inline bool is_estimator(Method m) { return m == Method::Exact || m == Method::Rff; }

struct SystemConfig {
    std::string name = "integrator";  // integrator | quadrotor | repeated_quadrotor
    double dt = 0.25;
    QuadrotorParams quad;
    int copies = 1;
    double spacing = 2.0;
};

struct DisturbanceConfig {
    std::string kind = "gaussian";  // gaussian | beta | exponential | none
    std::vector<double> variance;   // diagonal; empty = system default
    double alpha = 2.0;
    double beta = 0.5;
    double rate = 3.0;
    double scale = 0.1;
};

struct SamplingConfig {
    Eigen::Index size = 2500;
    std::string initial;  // uniform | gaussian | list; empty = system default
    std::vector<double> lower, upper;    // uniform box
    std::vector<double> center;          // gaussian
    std::vector<double> variance;        // gaussian, diagonal
    std::vector<std::vector<double>> points;  // list
    std::string file;                    // read instead of generating
};

struct KernelConfig {
    double sigma_x = 0.1;
    double sigma_u = 0.1;
    double lambda = 1.0;
};

struct RffConfig {
    Eigen::Index D = 15000;
    JointMode mode = JointMode::Concatenated;
    SolveRoute route = SolveRoute::Auto;
    std::optional<std::uint64_t> seed;  // defaults to the master seed
};

struct GridConfig {
    // Axes with resolution 1 are held at `lower`.
    std::vector<double> lower, upper;
    std::vector<int> resolution;
    std::vector<std::vector<double>> points;  // explicit points instead of a lattice
};

struct BenchConfig {
    int warmup = 1;
    int iterations = 3;
    std::vector<int> copies;  // repeated-quadrotor sweep; empty = skip
    Eigen::Index sweep_size = 1000;
    Eigen::Index sweep_features = 2000;
    int sweep_horizon = 1;
};

struct RunConfig {
    std::uint64_t seed = 1;
    std::vector<Method> methods{Method::Exact};
    SystemConfig system;
    DisturbanceConfig disturbance;
    SamplingConfig sampling;
    KernelConfig kernel;
    RffConfig rff;
    int horizon = 5;
    std::string policy;  // zero | hover_lqr; empty = system default
    GridConfig grid;
    int dp_resolution = 100;
    std::int64_t mc_trials = 100000;
    BenchConfig bench;
    std::string out_dir = "out";
    bool clamp = true;
    nlohmann::json source = nlohmann::json::object();  // parsed text, echoed into meta

    /// Defaults filled from the system choice; throws ConfigError on any
    /// inconsistency before compute starts.
    void validate() const;
    [[nodiscard]] int state_dimension() const;
    [[nodiscard]] int input_dimension() const;
};

RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// ----------------------------------------------------------------------------
// Builders

Disturbance build_disturbance(const RunConfig& cfg);
SystemModel build_system(const RunConfig& cfg);
MarkovPolicy build_policy(const RunConfig& cfg);
SafetyProblem build_problem(const RunConfig& cfg);
SamplingPlan build_sampling_plan(const RunConfig& cfg);
PointMatrix build_eval_points(const RunConfig& cfg);

/// Reads `sampling.file` if set, otherwise generates a sample.
std::shared_ptr<const TransitionSample> obtain_sample(const RunConfig& cfg);

std::unique_ptr<ConditionalEmbedding> build_embedding(const RunConfig& cfg, Method method,
                                                      std::shared_ptr<const TransitionSample> sample);

/// 8 * M * (2n + m) bytes for the sample plus the dominant per-method matrices.
double estimated_memory_bytes(const RunConfig& cfg, Method method);

// ----------------------------------------------------------------------------
// Timed runs

struct PhaseTimes {
    double sample = 0.0;
    double fit = 0.0;
    double recursion = 0.0;
    [[nodiscard]] double total() const noexcept { return sample + fit + recursion; }
};

struct MethodRun {
    SafetyField field;
    PhaseTimes times;
};

/// Fits and runs one estimator or oracle on `eval_points`. When `sample` is
/// null an estimator obtains its own (and times it).
MethodRun run_method(const RunConfig& cfg, Method method, const PointMatrix& eval_points,
                     std::shared_ptr<const TransitionSample> sample = nullptr);

}  // namespace kreach
