// Gaussian kernels, Gram assembly and the regularized SPD solve behind the
// exact embedding.

#pragma once

#include "kreach/core.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace kreach {

/// k(x, x') = exp(-|x - x'|^2 / (2 sigma^2)).
class GaussianKernel {
public:
    explicit GaussianKernel(double sigma = 0.1);

    [[nodiscard]] double sigma() const noexcept { return sigma_; }

    /// Kernel value from a squared distance.
    [[nodiscard]] double from_squared_distance(double d2) const noexcept {
        return std::exp(-d2 * inv_two_sigma2_);
    }

    [[nodiscard]] double operator()(const Eigen::Ref<const Eigen::VectorXd>& x,
                                    const Eigen::Ref<const Eigen::VectorXd>& y) const;

private:
    double sigma_;
    double inv_two_sigma2_;
};

/// Product kernel k_X(x, x') * k_U(u, u') on the joint space.
struct JointKernel {
    GaussianKernel state{0.1};
    GaussianKernel input{0.1};

    [[nodiscard]] double operator()(const Eigen::Ref<const Eigen::VectorXd>& x,
                                    const Eigen::Ref<const Eigen::VectorXd>& u,
                                    const Eigen::Ref<const Eigen::VectorXd>& x2,
                                    const Eigen::Ref<const Eigen::VectorXd>& u2) const;
};

double eval(const GaussianKernel& k, const Eigen::Ref<const Eigen::VectorXd>& x,
            const Eigen::Ref<const Eigen::VectorXd>& y);

double joint_eval(const GaussianKernel& kx, const GaussianKernel& ku,
                  const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& u,
                  const Eigen::Ref<const Eigen::VectorXd>& x2, const Eigen::Ref<const Eigen::VectorXd>& u2);

/// entries(i, j) = k(rows_i, cols_j), points stored one per row. When `rows`
/// and `cols` are the same object only the lower triangle is evaluated.
Eigen::MatrixXd gram(const GaussianKernel& k, const PointMatrix& rows, const PointMatrix& cols);

/// Joint Gram matrix k_X(x_i, x'_j) * k_U(u_i, u'_j).
Eigen::MatrixXd gram(const JointKernel& k, const PointMatrix& row_states, const PointMatrix& row_inputs,
                     const PointMatrix& col_states, const PointMatrix& col_inputs);

/// Cholesky factorization of G + lambda*M*I with one jitter retry.
class RegularizedCholesky {
public:
    RegularizedCholesky(const Eigen::MatrixXd& gram, double lambda, Eigen::Index sample_size);

    [[nodiscard]] Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
    [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

    [[nodiscard]] Eigen::Index size() const noexcept { return llt_.rows(); }
    [[nodiscard]] double shift() const noexcept { return shift_; }
    [[nodiscard]] double jitter() const noexcept { return jitter_; }

private:
    Eigen::LLT<Eigen::MatrixXd> llt_;
    double shift_ = 0.0;   // lambda * M
    double jitter_ = 0.0;  // extra diagonal added on retry
};

/// Solves (G + lambda*M*I) X = rhs.
Eigen::MatrixXd regularized_spd_solve(const Eigen::MatrixXd& gram, double lambda, Eigen::Index sample_size,
                                      const Eigen::MatrixXd& rhs);

/// Median pairwise distance of the rows (capped at `max_points` leading rows).
/// A bandwidth heuristic; nothing uses it by default.
double median_heuristic_sigma(const PointMatrix& points, Eigen::Index max_points = 1000);

}  // namespace kreach
