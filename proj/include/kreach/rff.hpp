// Random Fourier features for the Gaussian kernel.
//
// Bochner: a Gaussian kernel with bandwidth sigma is the Fourier transform of
// N(0, sigma^-2 I). With w_i drawn from that measure and b_i ~ U[0, 2pi),
//   z_i(x) = sqrt(2) cos(w_i^T x + b_i),   k(x, x') ~ (1/D) sum_i z_i(x) z_i(x').

#pragma once

#include "kreach/core.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <string>

namespace kreach {

class RffBasis {
public:
    /// frequencies: D x dim (one frequency per row); phases: D.
    RffBasis(Eigen::MatrixXd frequencies, Eigen::VectorXd phases, Eigen::VectorXd sigmas, std::uint64_t seed);

    [[nodiscard]] Eigen::Index size() const noexcept { return frequencies_.rows(); }
    [[nodiscard]] int dimension() const noexcept { return static_cast<int>(frequencies_.cols()); }
    [[nodiscard]] const Eigen::MatrixXd& frequencies() const noexcept { return frequencies_; }
    [[nodiscard]] const Eigen::VectorXd& phases() const noexcept { return phases_; }
    /// Per-coordinate bandwidth of the approximated kernel.
    [[nodiscard]] const Eigen::VectorXd& sigmas() const noexcept { return sigmas_; }
    [[nodiscard]] bool is_isotropic() const;
    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

private:
    Eigen::MatrixXd frequencies_;
    Eigen::VectorXd phases_;
    Eigen::VectorXd sigmas_;
    std::uint64_t seed_;
};

/// D frequencies for an isotropic Gaussian kernel of bandwidth sigma on R^dim.
RffBasis sample_basis(Eigen::Index D, int dim, double sigma, std::uint64_t seed);

/// Anisotropic variant: coordinate j uses bandwidth sigmas[j], so the features
/// approximate prod_j exp(-(x_j - x'_j)^2 / 2 sigmas_j^2).
RffBasis sample_basis(Eigen::Index D, const Eigen::VectorXd& sigmas, std::uint64_t seed);

/// z(x), components sqrt(2) cos(w_i^T x + b_i).
Eigen::VectorXd feature_map(const RffBasis& basis, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Feature rows for every row of `points` (count x D).
Eigen::MatrixXd feature_matrix(const RffBasis& basis, const PointMatrix& points);

/// (1/D) <z(x), z(x')>.
double kernel_estimate(const RffBasis& basis, const Eigen::Ref<const Eigen::VectorXd>& x,
                       const Eigen::Ref<const Eigen::VectorXd>& y);

enum class JointMode { Tensor, Concatenated };

const char* to_string(JointMode mode);
JointMode parse_joint_mode(const std::string& text);

/// Feature map on the joint space X x U.
///
/// Tensor: z_X(x) (x) z_U(u) flattened row-major, D_j = D_x * D_u.
/// Concatenated: one basis on the stacked vector [x; u], D_j = D.
/// In both modes <zeta(x,u), zeta(x',u')> / D_j estimates k_X(x,x') k_U(u,u').
class JointFeatureMap {
public:
    static JointFeatureMap tensor(RffBasis state_basis, RffBasis input_basis);
    static JointFeatureMap concatenated(RffBasis joint_basis, int state_dim);

    /// Draws the bases from `seed`. Concatenated mode uses an anisotropic basis
    /// when sigma_x != sigma_u.
    static JointFeatureMap sample(JointMode mode, Eigen::Index D, int state_dim, int input_dim,
                                  double sigma_x, double sigma_u, std::uint64_t seed);

    [[nodiscard]] JointMode mode() const noexcept { return mode_; }
    [[nodiscard]] Eigen::Index dimension() const noexcept;
    [[nodiscard]] int state_dimension() const noexcept { return state_dim_; }
    [[nodiscard]] int input_dimension() const noexcept { return input_dim_; }
    [[nodiscard]] const RffBasis& primary_basis() const noexcept { return first_; }
    /// Input basis; only meaningful in tensor mode.
    [[nodiscard]] const RffBasis& input_basis() const;

    [[nodiscard]] Eigen::VectorXd operator()(const Eigen::Ref<const Eigen::VectorXd>& x,
                                             const Eigen::Ref<const Eigen::VectorXd>& u) const;
    /// Rows zeta(states_i, inputs_i), unnormalized (count x D_j).
    [[nodiscard]] Eigen::MatrixXd features(const PointMatrix& states, const PointMatrix& inputs) const;

private:
    JointFeatureMap(JointMode mode, RffBasis first, RffBasis second, int state_dim, int input_dim);

    JointMode mode_;
    RffBasis first_;
    RffBasis second_;
    int state_dim_;
    int input_dim_;
};

Eigen::VectorXd joint_feature(const JointFeatureMap& map, const Eigen::Ref<const Eigen::VectorXd>& x,
                              const Eigen::Ref<const Eigen::VectorXd>& u);

/// `# kernel-reach rff-basis v1; D=..; dim=..; sigma=..; seed=..` then rows
/// w_1,...,w_dim,b.
void write_basis_csv(std::ostream& out, const RffBasis& basis);
RffBasis read_basis_csv(std::istream& in);

}  // namespace kreach
