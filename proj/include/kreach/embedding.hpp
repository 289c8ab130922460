// Conditional distribution embeddings of the stochastic kernel Q(. | x, u).
//
// Both estimators produce a coefficient vector c(x, u) in R^M such that
// E[f(y) | x, u] ~ f^T c(x, u) with f = [f(y_1), ..., f(y_M)].
//
//   exact:  beta(x, u)  = (G + lambda M I)^-1 kappa(x, u),  G_ij = k((x_i,u_i),(x_j,u_j))
//   RFF:    gamma(x, u) = (Z Z^T + lambda M I)^-1 Z zeta(x, u)
//                       = Z (Z^T Z + lambda M I)^-1 zeta(x, u)
//
// In the RFF estimator Z holds the joint features scaled by 1/sqrt(D_j), so
// Z Z^T is the feature approximation of G and gamma -> beta as D_j grows.

#pragma once

#include "kreach/core.hpp"
#include "kreach/kernels.hpp"
#include "kreach/rff.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <memory>
#include <optional>
#include <string>

namespace kreach {

/// Theoretical regularization schedule lambda = scale / sqrt(M).
double lambda_schedule(Eigen::Index sample_size, double scale = 1.0);

/// A fixed set of queries whose expectations are evaluated repeatedly, as in
/// the backward recursion with a stationary policy.
class QueryBatch {
public:
    virtual ~QueryBatch() = default;
    [[nodiscard]] virtual Eigen::Index size() const = 0;
    /// f^T c(q) for every query q in the batch.
    [[nodiscard]] virtual Eigen::VectorXd expectations(const Eigen::Ref<const Eigen::VectorXd>& f) const = 0;
};

class ConditionalEmbedding {
public:
    virtual ~ConditionalEmbedding() = default;

    [[nodiscard]] const TransitionSample& sample() const noexcept { return *sample_; }
    [[nodiscard]] double lambda() const noexcept { return lambda_; }
    [[nodiscard]] virtual std::string method() const = 0;

    /// Coefficient vector for one query (length M).
    [[nodiscard]] virtual Eigen::VectorXd coefficients(const Eigen::Ref<const Eigen::VectorXd>& x,
                                                       const Eigen::Ref<const Eigen::VectorXd>& u) const = 0;

    /// Column j is the coefficient vector of query (states_j, inputs_j); M x Q.
    [[nodiscard]] virtual Eigen::MatrixXd batched_coefficients(const PointMatrix& states,
                                                               const PointMatrix& inputs) const = 0;

    /// f^T c(states_j, inputs_j) for every query without materializing the
    /// M x Q coefficient matrix.
    [[nodiscard]] virtual Eigen::VectorXd expectations(const Eigen::Ref<const Eigen::VectorXd>& f,
                                                       const PointMatrix& states,
                                                       const PointMatrix& inputs) const = 0;

    /// Prepares queries for repeated expectations. Implementations cache the
    /// query-dependent factor (kernel rows or features) when it fits in
    /// `cache_bytes`, otherwise they recompute on every call.
    [[nodiscard]] virtual std::unique_ptr<QueryBatch> prepare_queries(PointMatrix states, PointMatrix inputs,
                                                                      std::size_t cache_bytes) const;

protected:
    ConditionalEmbedding(std::shared_ptr<const TransitionSample> sample, double lambda);

    void check_queries(const PointMatrix& states, const PointMatrix& inputs) const;
    void check_query(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& u) const;

private:
    std::shared_ptr<const TransitionSample> sample_;
    double lambda_;
};

class ExactEmbedding final : public ConditionalEmbedding {
public:
    ExactEmbedding(std::shared_ptr<const TransitionSample> sample, JointKernel kernel, double lambda);

    [[nodiscard]] std::string method() const override { return "exact"; }
    [[nodiscard]] const JointKernel& kernel() const noexcept { return kernel_; }
    [[nodiscard]] const RegularizedCholesky& factorization() const noexcept { return factor_; }

    [[nodiscard]] Eigen::VectorXd coefficients(const Eigen::Ref<const Eigen::VectorXd>& x,
                                               const Eigen::Ref<const Eigen::VectorXd>& u) const override;
    [[nodiscard]] Eigen::MatrixXd batched_coefficients(const PointMatrix& states,
                                                       const PointMatrix& inputs) const override;
    [[nodiscard]] Eigen::VectorXd expectations(const Eigen::Ref<const Eigen::VectorXd>& f, const PointMatrix& states,
                                               const PointMatrix& inputs) const override;
    [[nodiscard]] std::unique_ptr<QueryBatch> prepare_queries(PointMatrix states, PointMatrix inputs,
                                                              std::size_t cache_bytes) const override;

    /// kappa_i = k_X(x_i, x) k_U(u_i, u) for each query column (M x Q).
    [[nodiscard]] Eigen::MatrixXd cross_kernel(const PointMatrix& states, const PointMatrix& inputs) const;

private:
    JointKernel kernel_;
    RegularizedCholesky factor_;
};

/// Which side of the push-through identity gets factored.
enum class SolveRoute {
    Auto,    // primal when D_j <= M, dual otherwise
    Primal,  // D_j x D_j system Z^T Z + lambda M I
    Dual,    // M x M system Z Z^T + lambda M I
};

const char* to_string(SolveRoute route);
SolveRoute parse_solve_route(const std::string& text);

class RffEmbedding final : public ConditionalEmbedding {
public:
    RffEmbedding(std::shared_ptr<const TransitionSample> sample, JointFeatureMap features, double lambda,
                 SolveRoute route = SolveRoute::Auto);

    [[nodiscard]] std::string method() const override { return "rff"; }
    [[nodiscard]] const JointFeatureMap& feature_map() const noexcept { return features_; }
    [[nodiscard]] SolveRoute route() const noexcept { return route_; }
    [[nodiscard]] Eigen::Index feature_dimension() const noexcept { return features_.dimension(); }

    /// Scaled sample features Z (M x D_j), rows zeta(x_i, u_i) / sqrt(D_j).
    [[nodiscard]] const Eigen::MatrixXd& scaled_features() const noexcept { return z_; }
    /// H = Z^T Z (D_j x D_j), recomputed on demand.
    [[nodiscard]] Eigen::MatrixXd feature_gram() const;
    /// W = Z (Z^T Z + lambda M I)^-1 (M x D_j).
    [[nodiscard]] const Eigen::MatrixXd& projection() const noexcept { return w_; }

    /// Scaled query features zeta(x, u) / sqrt(D_j), one per row.
    [[nodiscard]] Eigen::MatrixXd query_features(const PointMatrix& states, const PointMatrix& inputs) const;

    [[nodiscard]] Eigen::VectorXd coefficients(const Eigen::Ref<const Eigen::VectorXd>& x,
                                               const Eigen::Ref<const Eigen::VectorXd>& u) const override;
    [[nodiscard]] Eigen::MatrixXd batched_coefficients(const PointMatrix& states,
                                                       const PointMatrix& inputs) const override;
    [[nodiscard]] Eigen::VectorXd expectations(const Eigen::Ref<const Eigen::VectorXd>& f, const PointMatrix& states,
                                               const PointMatrix& inputs) const override;
    [[nodiscard]] std::unique_ptr<QueryBatch> prepare_queries(PointMatrix states, PointMatrix inputs,
                                                              std::size_t cache_bytes) const override;

    /// gamma via the M x M system, independent of the fitted route. Test oracle
    /// for the push-through identity; O(M^3).
    [[nodiscard]] Eigen::VectorXd dual_coefficients(const Eigen::Ref<const Eigen::VectorXd>& x,
                                                    const Eigen::Ref<const Eigen::VectorXd>& u) const;

private:
    JointFeatureMap features_;
    SolveRoute route_;
    Eigen::MatrixXd z_;
    Eigen::MatrixXd w_;
};

std::unique_ptr<ExactEmbedding> fit_exact(std::shared_ptr<const TransitionSample> sample, const JointKernel& kernel,
                                          double lambda);
std::unique_ptr<RffEmbedding> fit_rff(std::shared_ptr<const TransitionSample> sample, JointFeatureMap features,
                                      double lambda, SolveRoute route = SolveRoute::Auto);

Eigen::VectorXd beta(const ExactEmbedding& embedding, const Eigen::Ref<const Eigen::VectorXd>& x,
                     const Eigen::Ref<const Eigen::VectorXd>& u);
Eigen::VectorXd gamma(const RffEmbedding& embedding, const Eigen::Ref<const Eigen::VectorXd>& x,
                      const Eigen::Ref<const Eigen::VectorXd>& u);

}  // namespace kreach
