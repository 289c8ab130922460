#include "kreach/embedding.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <Eigen/LU>

#include <cmath>

using namespace kreach;
using kreach::test::integrator_sample;
using kreach::test::random_matrix;
using kreach::test::random_sample;

namespace {

const JointKernel kSmall{GaussianKernel(0.1), GaussianKernel(0.1)};

}  // namespace

TEST_CASE("single sample exact embedding") {
    auto s = std::make_shared<const TransitionSample>(PointMatrix::Constant(1, 2, 0.3), PointMatrix::Zero(1, 1),
                                                      PointMatrix::Zero(1, 2));
    const auto e = fit_exact(s, kSmall, 1.0);
    CHECK(e->factorization().size() == 1);
    const Eigen::VectorXd b = beta(*e, Eigen::Vector2d(0.3, 0.3), Eigen::VectorXd::Zero(1));
    CHECK(b.size() == 1);
    CHECK(b[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("exact embedding matches dense inverse") {
    auto s = random_sample(5, 2, 1, 40);
    const JointKernel k{GaussianKernel(0.7), GaussianKernel(0.9)};
    const auto e = fit_exact(s, k, 0.2);
    const Eigen::MatrixXd g = gram(k, s->states(), s->inputs(), s->states(), s->inputs());
    const Eigen::MatrixXd inv = (g + 0.2 * 5.0 * Eigen::MatrixXd::Identity(5, 5)).inverse();
    const Eigen::Vector2d x(0.1, -0.3);
    const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 0.2);
    Eigen::VectorXd kappa(5);
    for (int i = 0; i < 5; ++i) {
        kappa[i] = joint_eval(k.state, k.input, s->states().row(i).transpose(), s->inputs().row(i).transpose(), x, u);
    }
    CHECK((beta(*e, x, u) - inv * kappa).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("duplicate sample rows still fit") {
    PointMatrix x(3, 2);
    x << 0.2, 0.2, 0.2, 0.2, 0.2, 0.2;
    auto s = std::make_shared<const TransitionSample>(x, PointMatrix::Zero(3, 1), x);
    CHECK_NOTHROW((void)fit_exact(s, kSmall, 1e-6));
}

TEST_CASE("exact expectation on the integrator") {
    auto s = integrator_sample(2500, 7);
    const auto e = fit_exact(s, JointKernel{GaussianKernel(0.2), GaussianKernel(0.2)}, 1e-3);
    const Eigen::VectorXd u = Eigen::VectorXd::Zero(1);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(2500);
    for (const Eigen::Vector2d x : {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(0.3, -0.4), Eigen::Vector2d(-0.5, 0.5)}) {
        const Eigen::VectorXd b = beta(*e, x, u);
        const double mass = ones.dot(b);
        CHECK(mass >= 0.9);
        CHECK(mass <= 1.0);
        const Eigen::Vector2d mean(x[0] + 0.25 * x[1], x[1]);
        const Eigen::Vector2d est = s->successors().transpose() * b;
        CHECK((est - mean).cwiseAbs().maxCoeff() <= 0.05);
    }
}

TEST_CASE("expectation operator is linear") {
    auto s = random_sample(40, 2, 1, 9);
    const auto e = fit_exact(s, JointKernel{GaussianKernel(0.5), GaussianKernel(0.5)}, 0.01);
    const Eigen::VectorXd f = random_matrix(40, 1, 1), g = random_matrix(40, 1, 2);
    const PointMatrix q = random_matrix(7, 2, 3, 0.5), qu = random_matrix(7, 1, 4, 0.5);
    const Eigen::VectorXd lhs = e->expectations(2.5 * f - 0.7 * g, q, qu);
    const Eigen::VectorXd rhs = 2.5 * e->expectations(f, q, qu) - 0.7 * e->expectations(g, q, qu);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + lhs.cwiseAbs().maxCoeff()));
}

TEST_CASE("batched coefficients agree with scalar queries") {
    auto s = random_sample(30, 2, 1, 11);
    const auto exact = fit_exact(s, JointKernel{GaussianKernel(0.6), GaussianKernel(0.6)}, 0.05);
    const auto rff = fit_rff(s, JointFeatureMap::sample(JointMode::Concatenated, 50, 2, 1, 0.6, 0.6, 5), 0.05);
    PointMatrix q(3, 2), qu(3, 1);
    q << 0.1, 0.2, -0.3, 0.4, 0.0, 0.0;
    qu << 0.0, 0.5, -0.5;
    for (const ConditionalEmbedding* e : {static_cast<const ConditionalEmbedding*>(exact.get()),
                                          static_cast<const ConditionalEmbedding*>(rff.get())}) {
        const Eigen::MatrixXd c = e->batched_coefficients(q, qu);
        CHECK(c.rows() == 30);
        CHECK(c.cols() == 3);
        for (int j = 0; j < 3; ++j) {
            CHECK((c.col(j) - e->coefficients(q.row(j).transpose(), qu.row(j).transpose())).cwiseAbs().maxCoeff() <= 1e-12);
        }
        // Order independence.
        PointMatrix rq = q.colwise().reverse(), rqu = qu.colwise().reverse();
        const Eigen::MatrixXd rc = e->batched_coefficients(rq, rqu);
        CHECK((rc.col(0) - c.col(2)).cwiseAbs().maxCoeff() <= 1e-12);
        // Q = 1 batch equals the scalar call.
        const Eigen::MatrixXd one = e->batched_coefficients(q.topRows(1), qu.topRows(1));
        CHECK((one.col(0) - e->coefficients(q.row(0).transpose(), qu.row(0).transpose())).cwiseAbs().maxCoeff() <= 1e-12);
        // expectations and prepared batches agree with f^T c.
        const Eigen::VectorXd f = random_matrix(30, 1, 3);
        const Eigen::VectorXd direct = c.transpose() * f;
        CHECK((e->expectations(f, q, qu) - direct).cwiseAbs().maxCoeff() <= 1e-12);
        for (std::size_t budget : {std::size_t{0}, std::size_t{1} << 20}) {
            const auto batch = e->prepare_queries(q, qu, budget);
            CHECK(batch->size() == 3);
            CHECK((batch->expectations(f) - direct).cwiseAbs().maxCoeff() <= 1e-12);
        }
        CHECK_THROWS_AS((void)e->coefficients(Eigen::Vector3d(0, 0, 0), qu.row(0).transpose()), DimensionError);
    }
}

TEST_CASE("push-through identity") {
    for (const auto& [m, d] : {std::pair<int, int>{5, 3}, {12, 10}, {20, 7}, {6, 9}}) {
        auto s = random_sample(m, 2, 1, static_cast<std::uint64_t>(100 + m));
        const auto map = JointFeatureMap::sample(JointMode::Concatenated, d, 2, 1, 0.5, 0.5, 3);
        for (SolveRoute route : {SolveRoute::Primal, SolveRoute::Dual}) {
            const auto e = fit_rff(s, map, 0.1, route);
            for (int q = 0; q < 4; ++q) {
                const Eigen::VectorXd x = random_matrix(2, 1, 200 + static_cast<std::uint64_t>(q), 0.5);
                const Eigen::VectorXd u = random_matrix(1, 1, 300 + static_cast<std::uint64_t>(q), 0.5);
                CHECK((gamma(*e, x, u) - e->dual_coefficients(x, u)).cwiseAbs().maxCoeff() <= 1e-8);
            }
        }
    }
}

TEST_CASE("rff fit internals") {
    auto s = random_sample(6, 2, 1, 60);
    const auto map = JointFeatureMap::sample(JointMode::Concatenated, 3, 2, 1, 0.5, 0.5, 3);
    const auto e = fit_rff(s, map, 0.1);
    CHECK(e->route() == SolveRoute::Primal);
    // H against a brute-force triple loop over unscaled features / D.
    const Eigen::MatrixXd raw = map.features(s->states(), s->inputs());
    const Eigen::MatrixXd h = e->feature_gram();
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            double sum = 0.0;
            for (int i = 0; i < 6; ++i) sum += raw(i, a) * raw(i, b);
            CHECK(h(a, b) == doctest::Approx(sum / 3.0).epsilon(1e-12));
        }
    }
    CHECK((h - h.transpose()).cwiseAbs().maxCoeff() == 0.0);
    // W (H + lambda M I) = Z.
    const Eigen::MatrixXd resid = e->projection() * (h + 0.6 * Eigen::MatrixXd::Identity(3, 3)) - e->scaled_features();
    CHECK(resid.norm() <= 1e-6 * e->scaled_features().norm());

    const auto again = fit_rff(s, JointFeatureMap::sample(JointMode::Concatenated, 3, 2, 1, 0.5, 0.5, 3), 0.1);
    CHECK(again->feature_gram() == h);

    const auto d1 = fit_rff(s, JointFeatureMap::sample(JointMode::Concatenated, 1, 2, 1, 0.5, 0.5, 3), 0.1);
    CHECK(d1->feature_gram()(0, 0) == doctest::Approx(d1->scaled_features().squaredNorm()));

    CHECK(gamma(*e, Eigen::Vector2d(0, 0), Eigen::VectorXd::Zero(1)).size() == 6);
    CHECK(e->expectations(Eigen::VectorXd::Zero(6), s->states(), s->inputs()).isZero());
}

TEST_CASE("auto route choice") {
    auto s = random_sample(8, 2, 1, 70);
    CHECK(fit_rff(s, JointFeatureMap::sample(JointMode::Concatenated, 5, 2, 1, 0.5, 0.5, 3), 0.1)->route() ==
          SolveRoute::Primal);
    CHECK(fit_rff(s, JointFeatureMap::sample(JointMode::Concatenated, 50, 2, 1, 0.5, 0.5, 3), 0.1)->route() ==
          SolveRoute::Dual);
    CHECK(parse_solve_route("dual") == SolveRoute::Dual);
    CHECK_THROWS_AS((void)parse_solve_route("sideways"), ConfigError);
}

TEST_CASE("tensor features with small bases") {
    auto s = random_sample(15, 2, 1, 80);
    const auto map = JointFeatureMap::tensor(sample_basis(3, 2, 0.5, 1), sample_basis(2, 1, 0.5, 2));
    const auto e = fit_rff(s, map, 0.1);
    CHECK(e->feature_dimension() == 6);
    const Eigen::Vector2d x(0.1, 0.1);
    const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 0.2);
    CHECK((gamma(*e, x, u) - e->dual_coefficients(x, u)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("rff coefficients approach exact ones as features grow") {
    auto s = integrator_sample(400, 5);
    const JointKernel k{GaussianKernel(0.3), GaussianKernel(0.3)};
    const double lambda = 1e-3;
    const auto exact = fit_exact(s, k, lambda);
    const Eigen::VectorXd f = (s->successors().col(0).array().abs() <= 0.5 && s->successors().col(1).array().abs() <= 0.5)
                                  .cast<double>();
    const PointMatrix q = kreach::test::random_matrix(20, 2, 8, 0.4);
    const PointMatrix qu = PointMatrix::Zero(20, 1);
    const Eigen::VectorXd ref = exact->expectations(f, q, qu);
    double previous = 1e9;
    for (Eigen::Index d : {100, 1000, 10000}) {
        const auto rff = fit_rff(s, JointFeatureMap::sample(JointMode::Concatenated, d, 2, 1, 0.3, 0.3, 17), lambda);
        const double err = (rff->expectations(f, q, qu) - ref).cwiseAbs().maxCoeff();
        CHECK(err < previous);
        previous = err;
    }
    CHECK(previous <= 0.05);
}

TEST_CASE("lambda schedule") {
    CHECK(lambda_schedule(100) == doctest::Approx(0.1));
    CHECK(lambda_schedule(400, 2.0) == doctest::Approx(0.1));
    CHECK_THROWS_AS((void)lambda_schedule(0), ConfigError);
}

TEST_CASE("embedding determinism") {
    auto s = integrator_sample(200, 3);
    const auto a = fit_rff(s, JointFeatureMap::sample(JointMode::Concatenated, 300, 2, 1, 0.2, 0.2, 9), 0.01);
    const auto b = fit_rff(s, JointFeatureMap::sample(JointMode::Concatenated, 300, 2, 1, 0.2, 0.2, 9), 0.01);
    const Eigen::Vector2d x(0.2, 0.1);
    CHECK(gamma(*a, x, Eigen::VectorXd::Zero(1)) == gamma(*b, x, Eigen::VectorXd::Zero(1)));
    CHECK(integrator_sample(200, 3)->successors() == s->successors());
}
