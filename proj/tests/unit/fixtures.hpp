// Shared builders for unit tests.

#pragma once

#include "kreach/core.hpp"
#include "kreach/random.hpp"
#include "kreach/sampling.hpp"
#include "kreach/systems.hpp"

#include <memory>

namespace kreach::test {

inline SystemModel gaussian_integrator(double variance = 0.01) {
    return make_integrator(0.25, Disturbance::gaussian_diagonal(Eigen::Vector2d::Constant(variance)));
}

inline std::shared_ptr<const TransitionSample> integrator_sample(Eigen::Index m, std::uint64_t seed,
                                                                 double variance = 0.01) {
    SamplingPlan plan{UniformOverBox{HyperRectangle::cube(2, -1.0, 1.0)}, m, seed, MarkovPolicy::zero(1)};
    return std::make_shared<const TransitionSample>(generate_sample(gaussian_integrator(variance), plan));
}

inline PointMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    std::normal_distribution<double> n(0.0, scale);
    PointMatrix p(rows, cols);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = n(rng);
    return p;
}

inline std::shared_ptr<const TransitionSample> random_sample(Eigen::Index m, int n, int inputs, std::uint64_t seed) {
    return std::make_shared<const TransitionSample>(random_matrix(m, n, seed, 0.5), random_matrix(m, inputs, seed + 1, 0.5),
                                                    random_matrix(m, n, seed + 2, 0.5));
}

}  // namespace kreach::test
