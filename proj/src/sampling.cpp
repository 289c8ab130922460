#include "kreach/sampling.hpp"

#include "kreach/random.hpp"

#include <sstream>

namespace kreach {

std::string describe(const InitialDistribution& dist) {
    std::ostringstream s;
    std::visit(
        [&](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, UniformOverBox>) {
                s << "uniform_box";
            } else if constexpr (std::is_same_v<T, FixedList>) {
                s << "fixed_list(" << d.points.rows() << ")";
            } else {
                s << "gaussian_around";
            }
        },
        dist);
    return s.str();
}

void SamplingPlan::validate(const SystemModel& system) const {
    if (size < 1) throw ConfigError("sampling plan: sample size M must be >= 1");
    const int n = system.state_dimension();
    require_dimension(policy.input_dimension(), system.input_dimension(), "sampling plan policy input");
    std::visit(
        [&](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, UniformOverBox>) {
                require_dimension(d.box.dimension(), n, "sampling plan box");
                for (int a = 0; a < n; ++a) {
                    if (!d.box.axis(a).is_bounded()) {
                        throw ConfigError("sampling plan: uniform box axis " + std::to_string(a) +
                                          " is unbounded; use gaussian_around instead");
                    }
                }
            } else if constexpr (std::is_same_v<T, FixedList>) {
                if (d.points.rows() < 1) throw ConfigError("sampling plan: fixed list is empty");
                require_dimension(d.points.cols(), n, "sampling plan fixed list");
            } else {
                require_dimension(d.center.size(), n, "sampling plan center");
                require_dimension(d.covariance.rows(), n, "sampling plan covariance rows");
                require_dimension(d.covariance.cols(), n, "sampling plan covariance cols");
            }
        },
        initial);
}

TransitionSample generate_sample(const SystemModel& system, const SamplingPlan& plan) {
    plan.validate(system);
    const int n = system.state_dimension();
    const int m = system.input_dimension();
    const Eigen::Index rows = plan.size;
    const std::uint64_t base = derive_seed(plan.seed, stream::kSampling);

    // Reuse the Gaussian factorization of the disturbance type.
    std::optional<Disturbance> spread;
    if (const auto* g = std::get_if<GaussianAround>(&plan.initial)) spread = Disturbance::gaussian(g->covariance);

    PointMatrix states(rows, n), inputs(rows, m), successors(rows, n);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < rows; ++i) {
        Rng rng(derive_seed(base, static_cast<std::uint64_t>(i)));
        StateVector x(n);
        std::visit(
            [&](const auto& d) {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, UniformOverBox>) {
                    for (int a = 0; a < n; ++a) {
                        std::uniform_real_distribution<double> unif(d.box.axis(a).lower, d.box.axis(a).upper);
                        x[a] = unif(rng);
                    }
                } else if constexpr (std::is_same_v<T, FixedList>) {
                    x = d.points.row(i % d.points.rows()).transpose();
                } else {
                    x = d.center + spread->draw(rng);
                }
            },
            plan.initial);
        const InputVector u = plan.policy(0, x);
        states.row(i) = x.transpose();
        inputs.row(i) = u.transpose();
        successors.row(i) = system.sample_step(x, u, rng).transpose();
    }

    SampleMetadata meta{system.name(), plan.seed, system.disturbance().name(), plan.policy.name()};
    return TransitionSample(std::move(states), std::move(inputs), std::move(successors), std::move(meta));
}

}  // namespace kreach
