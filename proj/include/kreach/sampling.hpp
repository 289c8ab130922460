// Transition dataset generation: x_i from an initial distribution,
// u_i = pi(x_i), y_i = one simulated step with a fresh disturbance.

#pragma once

#include "kreach/core.hpp"
#include "kreach/systems.hpp"

#include <cstdint>
#include <string>
#include <variant>

namespace kreach {

struct UniformOverBox {
    HyperRectangle box;  // every axis bounded
};

struct FixedList {
    PointMatrix points;  // cycled when M exceeds the list length
};

struct GaussianAround {
    StateVector center;
    Eigen::MatrixXd covariance;
};

using InitialDistribution = std::variant<UniformOverBox, FixedList, GaussianAround>;

std::string describe(const InitialDistribution& dist);

struct SamplingPlan {
    InitialDistribution initial;
    Eigen::Index size = 0;  // M
    std::uint64_t seed = 0;
    MarkovPolicy policy = MarkovPolicy::zero(1);

    /// Throws ConfigError / DimensionError if the plan does not fit `system`.
    void validate(const SystemModel& system) const;
};

/// Row i uses its own stream derived from (seed, i), so the result does not
/// depend on the thread count.
TransitionSample generate_sample(const SystemModel& system, const SamplingPlan& plan);

}  // namespace kreach
