#include "kreach/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace kreach {

GaussianKernel::GaussianKernel(double sigma) : sigma_(sigma), inv_two_sigma2_(0.0) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("GaussianKernel: sigma must be > 0");
    inv_two_sigma2_ = 1.0 / (2.0 * sigma * sigma);
}

double GaussianKernel::operator()(const Eigen::Ref<const Eigen::VectorXd>& x,
                                  const Eigen::Ref<const Eigen::VectorXd>& y) const {
    require_dimension(y.size(), x.size(), "GaussianKernel");
    return from_squared_distance((x - y).squaredNorm());
}

double JointKernel::operator()(const Eigen::Ref<const Eigen::VectorXd>& x,
                               const Eigen::Ref<const Eigen::VectorXd>& u,
                               const Eigen::Ref<const Eigen::VectorXd>& x2,
                               const Eigen::Ref<const Eigen::VectorXd>& u2) const {
    return state(x, x2) * input(u, u2);
}

double eval(const GaussianKernel& k, const Eigen::Ref<const Eigen::VectorXd>& x,
            const Eigen::Ref<const Eigen::VectorXd>& y) {
    return k(x, y);
}

double joint_eval(const GaussianKernel& kx, const GaussianKernel& ku,
                  const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& u,
                  const Eigen::Ref<const Eigen::VectorXd>& x2, const Eigen::Ref<const Eigen::VectorXd>& u2) {
    return JointKernel{kx, ku}(x, u, x2, u2);
}

namespace {

// Points as contiguous columns; the pairwise loops below stream them.
struct ColumnBlock {
    Eigen::MatrixXd points;  // d x count
    double scale;            // 1 / (2 sigma^2)
};

// out(i, j) = exp(-sum_b scale_b * |a_b(:, i) - c_b(:, j)|^2)
void assemble(const std::vector<ColumnBlock>& rows, const std::vector<ColumnBlock>& cols, bool symmetric,
              Eigen::MatrixXd& out) {
    const Eigen::Index nr = rows.front().points.cols();
    const Eigen::Index nc = cols.front().points.cols();
    out.resize(nr, nc);
#pragma omp parallel for schedule(dynamic, 16)
    for (Eigen::Index i = 0; i < nr; ++i) {
        const Eigen::Index jend = symmetric ? i + 1 : nc;
        for (Eigen::Index j = 0; j < jend; ++j) {
            double exponent = 0.0;
            for (std::size_t b = 0; b < rows.size(); ++b) {
                exponent += rows[b].scale * (rows[b].points.col(i) - cols[b].points.col(j)).squaredNorm();
            }
            out(i, j) = std::exp(-exponent);
        }
    }
    if (symmetric) {
        out.triangularView<Eigen::StrictlyUpper>() = out.transpose();
    }
}

void require_nonempty(const PointMatrix& p, const char* what) {
    if (p.rows() == 0) throw ConfigError(std::string(what) + ": empty point sequence");
}

}  // namespace

Eigen::MatrixXd gram(const GaussianKernel& k, const PointMatrix& rows, const PointMatrix& cols) {
    require_nonempty(rows, "gram rows");
    require_nonempty(cols, "gram cols");
    require_dimension(cols.cols(), rows.cols(), "gram");
    const double scale = 1.0 / (2.0 * k.sigma() * k.sigma());
    const bool symmetric = &rows == &cols;
    std::vector<ColumnBlock> r{{rows.transpose(), scale}};
    Eigen::MatrixXd out;
    if (symmetric) {
        assemble(r, r, true, out);
    } else {
        std::vector<ColumnBlock> c{{cols.transpose(), scale}};
        assemble(r, c, false, out);
    }
    return out;
}

Eigen::MatrixXd gram(const JointKernel& k, const PointMatrix& row_states, const PointMatrix& row_inputs,
                     const PointMatrix& col_states, const PointMatrix& col_inputs) {
    require_nonempty(row_states, "gram rows");
    require_nonempty(col_states, "gram cols");
    require_dimension(row_inputs.rows(), row_states.rows(), "gram row inputs");
    require_dimension(col_inputs.rows(), col_states.rows(), "gram col inputs");
    require_dimension(col_states.cols(), row_states.cols(), "gram states");
    require_dimension(col_inputs.cols(), row_inputs.cols(), "gram inputs");
    const double sx = 1.0 / (2.0 * k.state.sigma() * k.state.sigma());
    const double su = 1.0 / (2.0 * k.input.sigma() * k.input.sigma());
    const bool symmetric = &row_states == &col_states && &row_inputs == &col_inputs;
    std::vector<ColumnBlock> r{{row_states.transpose(), sx}, {row_inputs.transpose(), su}};
    Eigen::MatrixXd out;
    if (symmetric) {
        assemble(r, r, true, out);
    } else {
        std::vector<ColumnBlock> c{{col_states.transpose(), sx}, {col_inputs.transpose(), su}};
        assemble(r, c, false, out);
    }
    return out;
}

// ----------------------------------------------------------------------------

RegularizedCholesky::RegularizedCholesky(const Eigen::MatrixXd& gram, double lambda, Eigen::Index sample_size) {
    if (gram.rows() != gram.cols()) throw DimensionError("RegularizedCholesky: matrix is not square");
    if (gram.rows() == 0) throw ConfigError("RegularizedCholesky: empty matrix");
    if (!(lambda > 0.0)) throw ConfigError("RegularizedCholesky: lambda must be > 0");
    if (sample_size < 1) throw ConfigError("RegularizedCholesky: sample size must be >= 1");
    shift_ = lambda * static_cast<double>(sample_size);

    Eigen::MatrixXd a = gram;
    a.diagonal().array() += shift_;
    llt_.compute(a);
    if (llt_.info() != Eigen::Success) {
        jitter_ = 1e-10 * a.trace() / static_cast<double>(a.rows());
        a.diagonal().array() += jitter_;
        llt_.compute(a);
        if (llt_.info() != Eigen::Success) {
            std::ostringstream msg;
            msg << "Cholesky factorization of G + lambda*M*I failed even with jitter " << jitter_
                << "; the regularized Gram matrix is not numerically positive definite"
                   " (check for non-finite samples or increase lambda)";
            throw NumericalError(msg.str());
        }
    }
}

Eigen::MatrixXd RegularizedCholesky::solve(const Eigen::MatrixXd& rhs) const {
    require_dimension(rhs.rows(), size(), "RegularizedCholesky::solve");
    return llt_.solve(rhs);
}

Eigen::VectorXd RegularizedCholesky::solve(const Eigen::VectorXd& rhs) const {
    require_dimension(rhs.size(), size(), "RegularizedCholesky::solve");
    return llt_.solve(rhs);
}

Eigen::MatrixXd regularized_spd_solve(const Eigen::MatrixXd& gram, double lambda, Eigen::Index sample_size,
                                      const Eigen::MatrixXd& rhs) {
    return RegularizedCholesky(gram, lambda, sample_size).solve(rhs);
}

double median_heuristic_sigma(const PointMatrix& points, Eigen::Index max_points) {
    const Eigen::Index n = std::min(points.rows(), max_points);
    if (n < 2) throw ConfigError("median_heuristic_sigma: need at least two points");
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) d.push_back((points.row(i) - points.row(j)).norm());
    }
    auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    return *mid;
}

}  // namespace kreach
