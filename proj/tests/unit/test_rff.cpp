#include "kreach/kernels.hpp"
#include "kreach/random.hpp"
#include "kreach/rff.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

using namespace kreach;

namespace {

RffBasis single(double w, double b) {
    return RffBasis(Eigen::MatrixXd::Constant(1, 1, w), Eigen::VectorXd::Constant(1, b),
                    Eigen::VectorXd::Constant(1, 1.0), 0);
}

}  // namespace

TEST_CASE("basis shape and phases") {
    const RffBasis one = sample_basis(1, 3, 0.5, 7);
    CHECK(one.size() == 1);
    CHECK(one.dimension() == 3);
    CHECK(one.phases()[0] >= 0.0);
    CHECK(one.phases()[0] < 2.0 * std::acos(-1.0));
    CHECK_THROWS_AS((void)sample_basis(0, 2, 0.1, 1), ConfigError);
    CHECK_THROWS_AS((void)sample_basis(5, 2, 0.0, 1), ConfigError);
}

TEST_CASE("frequency moments match the spectral measure") {
    const RffBasis b = sample_basis(100000, 2, 0.1, 3);
    for (int j = 0; j < 2; ++j) {
        const Eigen::VectorXd w = b.frequencies().col(j);
        const double mean = w.mean();
        const double var = (w.array() - mean).square().sum() / static_cast<double>(w.size() - 1);
        CHECK(std::abs(var - 100.0) <= 2.0);
        CHECK(std::abs(mean) <= 0.1);
    }
    const double pmean = b.phases().mean();
    CHECK(std::abs(pmean - std::acos(-1.0)) <= 0.05);
}

TEST_CASE("basis determinism") {
    const RffBasis a = sample_basis(50, 3, 0.4, 99), b = sample_basis(50, 3, 0.4, 99);
    CHECK(a.frequencies() == b.frequencies());
    CHECK(a.phases() == b.phases());
    CHECK(sample_basis(50, 3, 0.4, 100).frequencies() != a.frequencies());
}

TEST_CASE("feature map closed forms") {
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.7);
    CHECK(feature_map(single(0.0, 0.0), x)[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(std::abs(feature_map(single(0.0, std::acos(-1.0) / 2.0), x)[0]) <= 1e-15);
    const RffBasis b = sample_basis(200, 2, 0.3, 5);
    const Eigen::VectorXd z = feature_map(b, Eigen::Vector2d(0.3, -1.2));
    CHECK(z.cwiseAbs().maxCoeff() <= std::sqrt(2.0) + 1e-15);
    CHECK_THROWS_AS((void)feature_map(b, x), DimensionError);
    // Zero frequencies give constant features.
    const RffBasis zero(Eigen::MatrixXd::Zero(4, 2), Eigen::VectorXd::LinSpaced(4, 0.0, 3.0),
                        Eigen::VectorXd::Ones(2), 0);
    CHECK(feature_map(zero, Eigen::Vector2d(1, 2)) == feature_map(zero, Eigen::Vector2d(-3, 5)));
}

TEST_CASE("feature matrix rows equal the feature map") {
    const RffBasis b = sample_basis(30, 2, 0.3, 5);
    PointMatrix p(3, 2);
    p << 0, 0, 0.1, -0.2, 1, 1;
    const Eigen::MatrixXd z = feature_matrix(b, p);
    CHECK(z.rows() == 3);
    CHECK(z.cols() == 30);
    for (int i = 0; i < 3; ++i) CHECK((z.row(i).transpose() - feature_map(b, p.row(i).transpose())).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("kernel estimate") {
    const RffBasis one = sample_basis(1, 2, 0.5, 8);
    const Eigen::Vector2d x(0.1, 0.2), y(-0.3, 0.4);
    const double w = std::sqrt(2.0) * std::cos(one.frequencies().row(0).dot(x) + one.phases()[0]);
    const double v = std::sqrt(2.0) * std::cos(one.frequencies().row(0).dot(y) + one.phases()[0]);
    CHECK(kernel_estimate(one, x, y) == doctest::Approx(w * v).epsilon(1e-14));

    const RffBasis b = sample_basis(10000, 2, 0.1, 12);
    CHECK(std::abs(kernel_estimate(b, x, x) - 1.0) <= 0.05);
    CHECK(std::abs(kernel_estimate(b, x, x + Eigen::Vector2d(0.1, 0.0)) - std::exp(-0.5)) <= 0.05);
}

TEST_CASE("kernel estimate concentration on random pairs") {
    const GaussianKernel k(0.5);
    const RffBasis b = sample_basis(10000, 3, 0.5, 21);
    Rng rng(4);
    std::normal_distribution<double> n(0.0, 0.4);
    int outliers = 0;
    for (int i = 0; i < 100; ++i) {
        Eigen::Vector3d x(n(rng), n(rng), n(rng)), y(n(rng), n(rng), n(rng));
        const double est = kernel_estimate(b, x, y);
        CHECK(std::abs(est) <= 2.0);
        if (std::abs(est - eval(k, x, y)) > 0.05) ++outliers;
    }
    CHECK(outliers <= 2);
}

TEST_CASE("estimate error shrinks with basis count") {
    // Averaging over R bases of size D: RMS error scales like (R D)^-1/2.
    const GaussianKernel k(0.3);
    const Eigen::Vector2d x(0.05, -0.1), y(0.2, 0.1);
    const double truth = eval(k, x, y);
    const auto rms = [&](Eigen::Index d) {
        double s = 0.0;
        const int reps = 200;
        for (int r = 0; r < reps; ++r) {
            const double e = kernel_estimate(sample_basis(d, 2, 0.3, 1000 + static_cast<std::uint64_t>(r)), x, y) - truth;
            s += e * e;
        }
        return std::sqrt(s / reps);
    };
    const double slope = (std::log(rms(1000)) - std::log(rms(10))) / (std::log(1000.0) - std::log(10.0));
    CHECK(slope == doctest::Approx(-0.5).epsilon(0.3));
}

TEST_CASE("joint feature maps") {
    const Eigen::Vector2d x(0.2, -0.1), x2(0.25, -0.05);
    const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 0.3), u2 = Eigen::VectorXd::Constant(1, 0.2);

    const auto tensor = JointFeatureMap::tensor(sample_basis(100, 2, 0.4, 1), sample_basis(100, 1, 0.4, 2));
    CHECK(tensor.dimension() == 10000);
    const Eigen::VectorXd zt = tensor(x, u);
    CHECK(zt.cwiseAbs().maxCoeff() <= 2.0 + 1e-14);
    CHECK(std::abs(zt.squaredNorm() / 10000.0 - 1.0) <= 0.05);
    // Row-major flattening of the outer product.
    const Eigen::VectorXd zx = feature_map(tensor.primary_basis(), x), zu = feature_map(tensor.input_basis(), u);
    CHECK(zt[1 * 100 + 7] == doctest::Approx(zx[1] * zu[7]).epsilon(1e-14));

    const auto concat = JointFeatureMap::sample(JointMode::Concatenated, 10000, 2, 1, 0.4, 0.4, 3);
    CHECK(concat.dimension() == 10000);
    const GaussianKernel k(0.4);
    const double truth = joint_eval(k, k, x, u, x2, u2);
    CHECK(std::abs(concat(x, u).dot(concat(x2, u2)) / 10000.0 - truth) <= 0.05);

    // Anisotropic concatenated basis approximates the product of different bandwidths.
    const auto aniso = JointFeatureMap::sample(JointMode::Concatenated, 20000, 2, 1, 0.3, 2.0, 4);
    const double t2 = joint_eval(GaussianKernel(0.3), GaussianKernel(2.0), x, u, x2, u2);
    CHECK(std::abs(aniso(x, u).dot(aniso(x2, u2)) / 20000.0 - t2) <= 0.05);

    PointMatrix s(2, 2), in(2, 1);
    s << 0.2, -0.1, 0.25, -0.05;
    in << 0.3, 0.2;
    const Eigen::MatrixXd f = concat.features(s, in);
    CHECK((f.row(1).transpose() - concat(x2, u2)).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK((joint_feature(concat, x, u) - concat(x, u)).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS((void)concat(x, Eigen::Vector2d(0, 0)), DimensionError);
}

TEST_CASE("concatenated and tensor agree with joint kernel on random pairs") {
    // Tensor estimates carry the variance of each 100-frequency factor, so
    // they are averaged over independent bases to check the expectation.
    const GaussianKernel k(0.5);
    const auto concat = JointFeatureMap::sample(JointMode::Concatenated, 10000, 2, 1, 0.5, 0.5, 32);
    std::vector<JointFeatureMap> tensors;
    for (std::uint64_t r = 0; r < 20; ++r) {
        tensors.push_back(JointFeatureMap::sample(JointMode::Tensor, 10000, 2, 1, 0.5, 0.5, 500 + r));
    }
    Rng rng(6);
    std::normal_distribution<double> n(0.0, 0.3);
    double t_err = 0.0, c_err = 0.0;
    for (int i = 0; i < 100; ++i) {
        const Eigen::Vector2d x(n(rng), n(rng)), y(n(rng), n(rng));
        const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, n(rng)), v = Eigen::VectorXd::Constant(1, n(rng));
        const double truth = joint_eval(k, k, x, u, y, v);
        double t = 0.0;
        for (const auto& map : tensors) t += map(x, u).dot(map(y, v)) / static_cast<double>(map.dimension());
        t_err += std::abs(t / static_cast<double>(tensors.size()) - truth);
        c_err += std::abs(concat(x, u).dot(concat(y, v)) / static_cast<double>(concat.dimension()) - truth);
    }
    CHECK(t_err / 100.0 <= 0.03);
    CHECK(c_err / 100.0 <= 0.03);
}

TEST_CASE("joint mode names") {
    CHECK(parse_joint_mode("tensor") == JointMode::Tensor);
    CHECK(parse_joint_mode("concatenated") == JointMode::Concatenated);
    CHECK(std::string(to_string(JointMode::Tensor)) == "tensor");
    CHECK_THROWS_AS((void)parse_joint_mode("bogus"), ConfigError);
}

TEST_CASE("basis CSV round trip") {
    const RffBasis b = sample_basis(7, 3, 0.25, 77);
    std::stringstream buf;
    write_basis_csv(buf, b);
    CHECK(buf.str().rfind("# kernel-reach rff-basis v1; D=7; dim=3; sigma=0.25; seed=77", 0) == 0);
    const RffBasis back = read_basis_csv(buf);
    CHECK(back.frequencies() == b.frequencies());
    CHECK(back.phases() == b.phases());
    CHECK(back.seed() == 77);
}
