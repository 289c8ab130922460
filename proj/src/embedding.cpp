#include "kreach/embedding.hpp"

#include <algorithm>
#include <cmath>

namespace kreach {

namespace {

// Queries are processed in column blocks so M x Q intermediates stay bounded.
constexpr Eigen::Index kQueryBlock = 2048;

Eigen::MatrixXd symmetric_product(const Eigen::MatrixXd& a) {
    // a^T a, lower triangle via rank update then mirrored.
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(a.cols(), a.cols());
    out.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
    out.triangularView<Eigen::StrictlyUpper>() = out.transpose();
    return out;
}

// Recomputes through the embedding on every call.
class UncachedBatch final : public QueryBatch {
public:
    UncachedBatch(const ConditionalEmbedding& owner, PointMatrix states, PointMatrix inputs)
        : owner_(owner), states_(std::move(states)), inputs_(std::move(inputs)) {}

    [[nodiscard]] Eigen::Index size() const override { return states_.rows(); }
    [[nodiscard]] Eigen::VectorXd expectations(const Eigen::Ref<const Eigen::VectorXd>& f) const override {
        return owner_.expectations(f, states_, inputs_);
    }

private:
    const ConditionalEmbedding& owner_;
    PointMatrix states_;
    PointMatrix inputs_;
};

// Exact path with cached kernel rows K (M x Q): f^T A^-1 K = (A^-1 f)^T K.
class CachedKernelBatch final : public QueryBatch {
public:
    CachedKernelBatch(const RegularizedCholesky& factor, Eigen::MatrixXd cross) : factor_(factor), cross_(std::move(cross)) {}

    [[nodiscard]] Eigen::Index size() const override { return cross_.cols(); }
    [[nodiscard]] Eigen::VectorXd expectations(const Eigen::Ref<const Eigen::VectorXd>& f) const override {
        require_dimension(f.size(), cross_.rows(), "expectations f");
        const Eigen::VectorXd alpha = factor_.solve(Eigen::VectorXd(f));
        return cross_.transpose() * alpha;
    }

private:
    const RegularizedCholesky& factor_;
    Eigen::MatrixXd cross_;
};

// RFF path with cached query features Phi (Q x D_j): Phi (W^T f).
class CachedFeatureBatch final : public QueryBatch {
public:
    CachedFeatureBatch(const Eigen::MatrixXd& projection, Eigen::MatrixXd features)
        : projection_(projection), features_(std::move(features)) {}

    [[nodiscard]] Eigen::Index size() const override { return features_.rows(); }
    [[nodiscard]] Eigen::VectorXd expectations(const Eigen::Ref<const Eigen::VectorXd>& f) const override {
        require_dimension(f.size(), projection_.rows(), "expectations f");
        const Eigen::VectorXd v = projection_.transpose() * f;
        return features_ * v;
    }

private:
    const Eigen::MatrixXd& projection_;
    Eigen::MatrixXd features_;
};

bool fits(Eigen::Index rows, Eigen::Index cols, std::size_t budget) {
    return static_cast<double>(rows) * static_cast<double>(cols) * sizeof(double) <= static_cast<double>(budget);
}

}  // namespace

double lambda_schedule(Eigen::Index sample_size, double scale) {
    if (sample_size < 1) throw ConfigError("lambda_schedule: sample size must be >= 1");
    return scale / std::sqrt(static_cast<double>(sample_size));
}

ConditionalEmbedding::ConditionalEmbedding(std::shared_ptr<const TransitionSample> sample, double lambda)
    : sample_(std::move(sample)), lambda_(lambda) {
    if (!sample_) throw ConfigError("embedding: null sample");
    if (!(lambda_ > 0.0) || !std::isfinite(lambda_)) throw ConfigError("embedding: lambda must be > 0");
}

void ConditionalEmbedding::check_queries(const PointMatrix& states, const PointMatrix& inputs) const {
    require_dimension(states.cols(), sample_->state_dimension(), "query states");
    require_dimension(inputs.cols(), sample_->input_dimension(), "query inputs");
    require_dimension(inputs.rows(), states.rows(), "query count");
}

void ConditionalEmbedding::check_query(const Eigen::Ref<const Eigen::VectorXd>& x,
                                       const Eigen::Ref<const Eigen::VectorXd>& u) const {
    require_dimension(x.size(), sample_->state_dimension(), "query state");
    require_dimension(u.size(), sample_->input_dimension(), "query input");
}

std::unique_ptr<QueryBatch> ConditionalEmbedding::prepare_queries(PointMatrix states, PointMatrix inputs,
                                                                  std::size_t /*cache_bytes*/) const {
    check_queries(states, inputs);
    return std::make_unique<UncachedBatch>(*this, std::move(states), std::move(inputs));
}

// ----------------------------------------------------------------------------
// Exact

ExactEmbedding::ExactEmbedding(std::shared_ptr<const TransitionSample> sample, JointKernel kernel, double lambda)
    : ConditionalEmbedding(std::move(sample), lambda),
      kernel_(kernel),
      factor_(gram(kernel_, this->sample().states(), this->sample().inputs(), this->sample().states(),
                   this->sample().inputs()),
              lambda, this->sample().size()) {}

Eigen::MatrixXd ExactEmbedding::cross_kernel(const PointMatrix& states, const PointMatrix& inputs) const {
    check_queries(states, inputs);
    return gram(kernel_, sample().states(), sample().inputs(), states, inputs);
}

Eigen::VectorXd ExactEmbedding::coefficients(const Eigen::Ref<const Eigen::VectorXd>& x,
                                             const Eigen::Ref<const Eigen::VectorXd>& u) const {
    check_query(x, u);
    PointMatrix xs = x.transpose();
    PointMatrix us = u.transpose();
    return factor_.solve(Eigen::VectorXd(cross_kernel(xs, us).col(0)));
}

Eigen::MatrixXd ExactEmbedding::batched_coefficients(const PointMatrix& states, const PointMatrix& inputs) const {
    check_queries(states, inputs);
    Eigen::MatrixXd out(sample().size(), states.rows());
    for (Eigen::Index start = 0; start < states.rows(); start += kQueryBlock) {
        const Eigen::Index len = std::min(kQueryBlock, states.rows() - start);
        const PointMatrix xs = states.middleRows(start, len);
        const PointMatrix us = inputs.middleRows(start, len);
        out.middleCols(start, len) = factor_.solve(cross_kernel(xs, us));
    }
    return out;
}

Eigen::VectorXd ExactEmbedding::expectations(const Eigen::Ref<const Eigen::VectorXd>& f, const PointMatrix& states,
                                             const PointMatrix& inputs) const {
    require_dimension(f.size(), sample().size(), "expectations f");
    check_queries(states, inputs);
    // f^T A^-1 kappa_j = (A^-1 f)^T kappa_j since A is symmetric.
    const Eigen::VectorXd alpha = factor_.solve(Eigen::VectorXd(f));
    Eigen::VectorXd out(states.rows());
    for (Eigen::Index start = 0; start < states.rows(); start += kQueryBlock) {
        const Eigen::Index len = std::min(kQueryBlock, states.rows() - start);
        const PointMatrix xs = states.middleRows(start, len);
        const PointMatrix us = inputs.middleRows(start, len);
        out.segment(start, len) = cross_kernel(xs, us).transpose() * alpha;
    }
    return out;
}

std::unique_ptr<QueryBatch> ExactEmbedding::prepare_queries(PointMatrix states, PointMatrix inputs,
                                                            std::size_t cache_bytes) const {
    check_queries(states, inputs);
    if (fits(sample().size(), states.rows(), cache_bytes)) {
        return std::make_unique<CachedKernelBatch>(factor_, cross_kernel(states, inputs));
    }
    return std::make_unique<UncachedBatch>(*this, std::move(states), std::move(inputs));
}

// ----------------------------------------------------------------------------
// RFF

const char* to_string(SolveRoute route) {
    switch (route) {
        case SolveRoute::Auto: return "auto";
        case SolveRoute::Primal: return "primal";
        case SolveRoute::Dual: return "dual";
    }
    return "?";
}

SolveRoute parse_solve_route(const std::string& text) {
    if (text == "auto") return SolveRoute::Auto;
    if (text == "primal") return SolveRoute::Primal;
    if (text == "dual") return SolveRoute::Dual;
    throw ConfigError("unknown solve route '" + text + "' (expected auto, primal or dual)");
}

RffEmbedding::RffEmbedding(std::shared_ptr<const TransitionSample> sample, JointFeatureMap features, double lambda,
                           SolveRoute route)
    : ConditionalEmbedding(std::move(sample), lambda), features_(std::move(features)), route_(route) {
    require_dimension(features_.state_dimension(), this->sample().state_dimension(), "RFF feature map state");
    require_dimension(features_.input_dimension(), this->sample().input_dimension(), "RFF feature map input");

    const Eigen::Index m = this->sample().size();
    const Eigen::Index dj = features_.dimension();
    if (route_ == SolveRoute::Auto) route_ = dj <= m ? SolveRoute::Primal : SolveRoute::Dual;

    z_ = features_.features(this->sample().states(), this->sample().inputs());
    z_ /= std::sqrt(static_cast<double>(dj));

    if (route_ == SolveRoute::Primal) {
        const RegularizedCholesky factor(symmetric_product(z_), lambda, m);
        // W = Z A^-1 = (A^-1 Z^T)^T
        w_ = factor.solve(Eigen::MatrixXd(z_.transpose())).transpose();
    } else {
        const RegularizedCholesky factor(symmetric_product(z_.transpose()), lambda, m);
        w_ = factor.solve(z_);
    }
}

Eigen::MatrixXd RffEmbedding::feature_gram() const {
    return symmetric_product(z_);
}

Eigen::MatrixXd RffEmbedding::query_features(const PointMatrix& states, const PointMatrix& inputs) const {
    check_queries(states, inputs);
    Eigen::MatrixXd q = features_.features(states, inputs);
    q /= std::sqrt(static_cast<double>(features_.dimension()));
    return q;
}

Eigen::VectorXd RffEmbedding::coefficients(const Eigen::Ref<const Eigen::VectorXd>& x,
                                           const Eigen::Ref<const Eigen::VectorXd>& u) const {
    check_query(x, u);
    const Eigen::VectorXd zeta = features_(x, u) / std::sqrt(static_cast<double>(features_.dimension()));
    return w_ * zeta;
}

Eigen::MatrixXd RffEmbedding::batched_coefficients(const PointMatrix& states, const PointMatrix& inputs) const {
    check_queries(states, inputs);
    Eigen::MatrixXd out(sample().size(), states.rows());
    for (Eigen::Index start = 0; start < states.rows(); start += kQueryBlock) {
        const Eigen::Index len = std::min(kQueryBlock, states.rows() - start);
        const PointMatrix xs = states.middleRows(start, len);
        const PointMatrix us = inputs.middleRows(start, len);
        out.middleCols(start, len).noalias() = w_ * query_features(xs, us).transpose();
    }
    return out;
}

Eigen::VectorXd RffEmbedding::expectations(const Eigen::Ref<const Eigen::VectorXd>& f, const PointMatrix& states,
                                           const PointMatrix& inputs) const {
    require_dimension(f.size(), sample().size(), "expectations f");
    check_queries(states, inputs);
    const Eigen::VectorXd v = w_.transpose() * f;
    Eigen::VectorXd out(states.rows());
    for (Eigen::Index start = 0; start < states.rows(); start += kQueryBlock) {
        const Eigen::Index len = std::min(kQueryBlock, states.rows() - start);
        const PointMatrix xs = states.middleRows(start, len);
        const PointMatrix us = inputs.middleRows(start, len);
        out.segment(start, len).noalias() = query_features(xs, us) * v;
    }
    return out;
}

std::unique_ptr<QueryBatch> RffEmbedding::prepare_queries(PointMatrix states, PointMatrix inputs,
                                                          std::size_t cache_bytes) const {
    check_queries(states, inputs);
    if (fits(states.rows(), feature_dimension(), cache_bytes)) {
        return std::make_unique<CachedFeatureBatch>(w_, query_features(states, inputs));
    }
    return std::make_unique<UncachedBatch>(*this, std::move(states), std::move(inputs));
}

Eigen::VectorXd RffEmbedding::dual_coefficients(const Eigen::Ref<const Eigen::VectorXd>& x,
                                                const Eigen::Ref<const Eigen::VectorXd>& u) const {
    check_query(x, u);
    const Eigen::VectorXd zeta = features_(x, u) / std::sqrt(static_cast<double>(features_.dimension()));
    Eigen::MatrixXd a = z_ * z_.transpose();
    a.diagonal().array() += lambda() * static_cast<double>(sample().size());
    return a.ldlt().solve(z_ * zeta);
}

std::unique_ptr<ExactEmbedding> fit_exact(std::shared_ptr<const TransitionSample> sample, const JointKernel& kernel,
                                          double lambda) {
    return std::make_unique<ExactEmbedding>(std::move(sample), kernel, lambda);
}

std::unique_ptr<RffEmbedding> fit_rff(std::shared_ptr<const TransitionSample> sample, JointFeatureMap features,
                                      double lambda, SolveRoute route) {
    return std::make_unique<RffEmbedding>(std::move(sample), std::move(features), lambda, route);
}

Eigen::VectorXd beta(const ExactEmbedding& embedding, const Eigen::Ref<const Eigen::VectorXd>& x,
                     const Eigen::Ref<const Eigen::VectorXd>& u) {
    return embedding.coefficients(x, u);
}

Eigen::VectorXd gamma(const RffEmbedding& embedding, const Eigen::Ref<const Eigen::VectorXd>& x,
                      const Eigen::Ref<const Eigen::VectorXd>& u) {
    return embedding.coefficients(x, u);
}

}  // namespace kreach
