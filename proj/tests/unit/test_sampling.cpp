#include "kreach/sampling.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <sstream>

using namespace kreach;

TEST_CASE("fixed list with zero noise gives the deterministic step") {
    const SystemModel sys = make_integrator(0.25, Disturbance::none(2));
    PointMatrix pts(1, 2);
    pts << 0.4, -0.8;
    const TransitionSample s = generate_sample(sys, SamplingPlan{FixedList{pts}, 1, 3, MarkovPolicy::zero(1)});
    CHECK(s.size() == 1);
    CHECK(s.successors().row(0) == Eigen::RowVector2d(0.4 - 0.2, -0.8));
    CHECK(s.inputs()(0, 0) == 0.0);

    const TransitionSample cycled = generate_sample(sys, SamplingPlan{FixedList{pts}, 3, 3, MarkovPolicy::zero(1)});
    CHECK(cycled.states().row(2) == pts.row(0));
}

TEST_CASE("uniform initial states") {
    const TransitionSample s = generate_sample(
        test::gaussian_integrator(), SamplingPlan{UniformOverBox{HyperRectangle::cube(2, -1, 1)}, 10000, 5, MarkovPolicy::zero(1)});
    CHECK(s.states().colwise().mean().cwiseAbs().maxCoeff() <= 0.02);
    CHECK(s.states().cwiseAbs().maxCoeff() <= 1.0);
    CHECK(s.metadata().system == "integrator");
    CHECK(s.metadata().seed == 5);
    CHECK(s.metadata().policy == "zero");
}

TEST_CASE("residual covariance matches the noise") {
    const SystemModel sys = test::gaussian_integrator();
    const TransitionSample s =
        generate_sample(sys, SamplingPlan{UniformOverBox{HyperRectangle::cube(2, -1, 1)}, 100000, 6, MarkovPolicy::zero(1)});
    const Eigen::MatrixXd pred = s.states() * sys.affine()->A.transpose() + s.inputs() * sys.affine()->B.transpose();
    const Eigen::MatrixXd r = s.successors() - pred;
    const Eigen::MatrixXd centered = r.rowwise() - r.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(r.rows() - 1);
    CHECK(std::abs(cov(0, 0) - 0.01) <= 0.05 * 0.01);
    CHECK(std::abs(cov(1, 1) - 0.01) <= 0.05 * 0.01);
    CHECK(std::abs(cov(0, 1)) <= 0.05 * 0.01);
}

TEST_CASE("policy inputs are recomputable") {
    const QuadrotorParams p;
    const SystemModel sys = make_quadrotor(p, Disturbance::gaussian_diagonal(Eigen::VectorXd::Constant(6, 1e-3)));
    const MarkovPolicy pol = hover_lqr_policy(p, LqrWeights::quadrotor_default(), quadrotor_default_reference());
    const TransitionSample s = generate_sample(
        sys, SamplingPlan{GaussianAround{quadrotor_default_reference(), 0.25 * Eigen::MatrixXd::Identity(6, 6)}, 200, 7, pol});
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        CHECK(s.inputs().row(i).transpose() == pol(0, s.states().row(i).transpose()));
    }
    const Eigen::VectorXd mean = s.states().colwise().mean();
    CHECK(std::abs(mean[2] - 1.0) <= 0.15);
}

TEST_CASE("same seed gives identical bytes") {
    const SamplingPlan plan{UniformOverBox{HyperRectangle::cube(2, -1, 1)}, 500, 42, MarkovPolicy::zero(1)};
    std::ostringstream a, b, c;
    write_sample_csv(a, generate_sample(test::gaussian_integrator(), plan));
    write_sample_csv(b, generate_sample(test::gaussian_integrator(), plan));
    SamplingPlan other = plan;
    other.seed = 43;
    write_sample_csv(c, generate_sample(test::gaussian_integrator(), other));
    CHECK(a.str() == b.str());
    CHECK(a.str() != c.str());
}

TEST_CASE("plan validation") {
    const SystemModel sys = test::gaussian_integrator();
    CHECK_THROWS_AS(SamplingPlan({UniformOverBox{HyperRectangle::cube(2, -1, 1)}, 0, 1, MarkovPolicy::zero(1)}).validate(sys),
                    ConfigError);
    CHECK_THROWS_AS(SamplingPlan({UniformOverBox{HyperRectangle::cube(3, -1, 1)}, 5, 1, MarkovPolicy::zero(1)}).validate(sys),
                    DimensionError);
    CHECK_THROWS(SamplingPlan({UniformOverBox{HyperRectangle({AxisInterval::unbounded(), AxisInterval::closed(0, 1)})}, 5, 1,
                               MarkovPolicy::zero(1)})
                     .validate(sys));
    CHECK_THROWS_AS(SamplingPlan({FixedList{PointMatrix::Zero(2, 2)}, 5, 1, MarkovPolicy::zero(2)}).validate(sys), DimensionError);
    CHECK(describe(InitialDistribution{FixedList{PointMatrix::Zero(2, 2)}}).find("list") != std::string::npos);
}
