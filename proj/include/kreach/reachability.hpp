// First-hitting-time value recursion over a learned conditional embedding.
//
//   V_N(x) = 1_T(x)
//   V_k(x) = 1_T(x) + 1_{K\T}(x) * Y_{k+1}^T c(x, pi_k(x)),  Y_{k+1} = [V_{k+1}(y_1) ... V_{k+1}(y_M)]
//
// and V_0(x0) approximates the probability of hitting T within N steps while
// staying in K beforehand.

#pragma once

#include "kreach/core.hpp"
#include "kreach/embedding.hpp"

#include <json.hpp>

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace kreach {

using ValueVector = Eigen::VectorXd;

/// Per-step values over a fixed set of evaluation points.
struct SafetyField {
    PointMatrix points;               // one evaluation point per row
    std::vector<ValueVector> layers;  // layers[k] = V_k at every point, k = 0..N
    nlohmann::ordered_json meta = nlohmann::ordered_json::object();

    [[nodiscard]] int horizon() const noexcept { return static_cast<int>(layers.size()) - 1; }
    [[nodiscard]] Eigen::Index size() const noexcept { return points.rows(); }
};

struct RecursionOptions {
    /// Clamp every propagated value into [0, 1].
    bool clamp = true;
    /// Upper bound on memory spent caching per-query kernel rows or features
    /// across steps (stationary policies only).
    std::size_t cache_bytes = std::size_t{1} << 30;
};

SafetyField backward_recursion(const SafetyProblem& problem, const ConditionalEmbedding& embedding,
                               const PointMatrix& eval_points, const RecursionOptions& options = {});

/// V_0 at one evaluation point.
double safety_probability(const SafetyField& field, Eigen::Index index);

/// Regular lattice over `region`, endpoints included, last free axis varying
/// fastest. Axes with a `fixed` value are held there; every other axis must
/// be bounded and have resolution >= 2.
PointMatrix grid_points(const HyperRectangle& region, const std::vector<int>& resolution,
                        const std::vector<std::optional<double>>& fixed = {});

/// {"meta": ..., "points": [[...]...], "layers": [[...]...]}.
nlohmann::ordered_json to_json(const SafetyField& field);
SafetyField safety_field_from_json(const nlohmann::ordered_json& j);
void write_field_json(const std::string& path, const SafetyField& field);
/// Flat `x_1,...,x_n,V0` rows for plotting.
void write_field_csv(std::ostream& out, const SafetyField& field);
void write_field_csv(const std::string& path, const SafetyField& field);

struct FieldError {
    double max_abs = 0.0;
    double mean_abs = 0.0;
    Eigen::VectorXd per_point;  // |a - b| at layer 0
};

/// Layer-0 comparison of two fields on the same points.
FieldError compare_fields(const SafetyField& estimate, const SafetyField& reference);
void write_error_csv(const std::string& path, const SafetyField& estimate, const FieldError& error);

}  // namespace kreach
