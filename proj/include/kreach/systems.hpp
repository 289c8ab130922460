// Benchmark systems, disturbance models, policies and trajectory simulation.

#pragma once

#include "kreach/core.hpp"
#include "kreach/random.hpp"

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <string>
#include <variant>

namespace kreach {

// ----------------------------------------------------------------------------
// Disturbances
// ----------------------------------------------------------------------------

struct GaussianNoise {
    Eigen::MatrixXd covariance;
};

/// scale * Beta(alpha, beta), independently per coordinate.
struct ScaledBetaNoise {
    int dim = 1;
    double alpha = 2.0;
    double beta = 0.5;
    double scale = 1.0;
};

/// scale * Exp(rate), independently per coordinate.
struct ScaledExponentialNoise {
    int dim = 1;
    double rate = 3.0;
    double scale = 1.0;
};

class Disturbance {
public:
    static Disturbance gaussian(Eigen::MatrixXd covariance);
    static Disturbance gaussian_diagonal(const Eigen::VectorXd& variances);
    static Disturbance scaled_beta(int dim, double alpha, double beta, double scale);
    static Disturbance scaled_exponential(int dim, double rate, double scale);
    /// Zero disturbance (a Gaussian with zero covariance).
    static Disturbance none(int dim);
    /// `copies` independent draws of `base`, concatenated.
    static Disturbance repeated(const Disturbance& base, int copies);

    [[nodiscard]] int dimension() const noexcept { return base_dim_ * copies_; }
    [[nodiscard]] int copies() const noexcept { return copies_; }
    [[nodiscard]] std::string name() const;

    [[nodiscard]] Eigen::VectorXd draw(Rng& rng) const;
    void draw_into(Rng& rng, Eigen::Ref<Eigen::VectorXd> out) const;

    /// Per-coordinate variances when this is a Gaussian with diagonal
    /// covariance (including the zero disturbance).
    [[nodiscard]] std::optional<Eigen::VectorXd> diagonal_gaussian_variances() const;
    [[nodiscard]] Eigen::VectorXd mean() const;

    [[nodiscard]] const std::variant<GaussianNoise, ScaledBetaNoise, ScaledExponentialNoise>& kind() const noexcept {
        return kind_;
    }

private:
    using Kind = std::variant<GaussianNoise, ScaledBetaNoise, ScaledExponentialNoise>;
    Disturbance(Kind kind, int base_dim);

    void draw_block(Rng& rng, Eigen::Ref<Eigen::VectorXd> out) const;

    Kind kind_;
    int base_dim_;
    int copies_ = 1;
    Eigen::MatrixXd factor_;     // Gaussian: covariance = factor * factor^T
    bool diagonal_ = true;       // Gaussian: covariance is diagonal
};

Eigen::VectorXd draw_disturbance(const Disturbance& d, Rng& rng);

// ----------------------------------------------------------------------------
// Systems
// ----------------------------------------------------------------------------

/// x+ = A x + B u + w.
struct AffineDynamics {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
};

class SystemModel {
public:
    using StepFunction =
        std::function<StateVector(const StateVector& x, const InputVector& u, const Eigen::VectorXd& w)>;

    SystemModel(std::string name, int state_dim, int input_dim, double dt, StepFunction step,
                Disturbance disturbance, std::optional<AffineDynamics> affine = std::nullopt);

    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] int state_dimension() const noexcept { return state_dim_; }
    [[nodiscard]] int input_dimension() const noexcept { return input_dim_; }
    [[nodiscard]] double dt() const noexcept { return dt_; }
    [[nodiscard]] const Disturbance& disturbance() const noexcept { return disturbance_; }
    [[nodiscard]] const std::optional<AffineDynamics>& affine() const noexcept { return affine_; }
    [[nodiscard]] const StepFunction& step_function() const noexcept { return step_; }

    /// Deterministic successor for a given disturbance realization.
    [[nodiscard]] StateVector step(const StateVector& x, const InputVector& u, const Eigen::VectorXd& w) const;
    /// Successor with a fresh disturbance draw.
    [[nodiscard]] StateVector sample_step(const StateVector& x, const InputVector& u, Rng& rng) const;

    /// Same dynamics with a different disturbance.
    [[nodiscard]] SystemModel with_disturbance(Disturbance disturbance) const;

private:
    std::string name_;
    int state_dim_;
    int input_dim_;
    double dt_;
    StepFunction step_;
    Disturbance disturbance_;
    std::optional<AffineDynamics> affine_;
};

/// x+ = [1 T; 0 1] x + [T^2/2; T] u + w.
Eigen::Vector2d integrator_step(const Eigen::Vector2d& x, double u, const Eigen::Vector2d& w, double dt);
SystemModel make_integrator(double dt, Disturbance disturbance);

struct QuadrotorParams {
    double inertia = 2.0;
    double arm_length = 2.0;
    double mass = 5.0;
    double gravity = 9.8;
    double dt = 0.25;

    [[nodiscard]] double hover_thrust() const noexcept { return mass * gravity / 2.0; }
    void validate() const;
};

/// One forward-Euler step of the planar quadrotor, state
/// z = [x, xdot, y, ydot, theta, thetadot], input u = [u1, u2], then + w.
Eigen::VectorXd quadrotor_step(const Eigen::Ref<const Eigen::VectorXd>& z, const Eigen::Ref<const Eigen::VectorXd>& u,
                               const Eigen::Ref<const Eigen::VectorXd>& w, const QuadrotorParams& params);
SystemModel make_quadrotor(const QuadrotorParams& params, Disturbance disturbance);

/// Euler-discretized linearization about hover: z+ = A dz + B du.
AffineDynamics quadrotor_linearization(const QuadrotorParams& params);

/// Block-diagonal composition of `copies` independent instances of `base`.
/// The disturbance is drawn independently per copy.
SystemModel repeated_system(const SystemModel& base, int copies);

// ----------------------------------------------------------------------------
// Policies
// ----------------------------------------------------------------------------

struct LqrWeights {
    Eigen::MatrixXd state;  // Q
    Eigen::MatrixXd input;  // R

    static LqrWeights quadrotor_default();  // Q = I6, R = 0.1 I2
};

struct LqrSolution {
    Eigen::MatrixXd gain;        // K, u = -K dz
    Eigen::MatrixXd cost;        // P, stabilizing DARE solution
    Eigen::MatrixXd closed_loop; // A - B K
};

/// Infinite-horizon discrete LQR via Riccati iteration.
LqrSolution discrete_lqr(const AffineDynamics& model, const LqrWeights& weights);

/// Default hover reference (0, 0, 1, 0, 0, 0).
Eigen::VectorXd quadrotor_default_reference();

/// u(z) = u_hover + K (z_ref - z).
MarkovPolicy hover_lqr_policy(const QuadrotorParams& params, const LqrWeights& weights,
                              const Eigen::VectorXd& reference);

/// Applies one block policy per copy of a repeated system; copy c tracks
/// `reference` shifted by c * lateral_spacing along z1.
MarkovPolicy repeated_hover_lqr_policy(const QuadrotorParams& params, const LqrWeights& weights,
                                       const Eigen::VectorXd& reference, int copies, double lateral_spacing);

// ----------------------------------------------------------------------------
// Benchmark sets
// ----------------------------------------------------------------------------

struct SafeTargetSets {
    SetPredicate safe;
    SetPredicate target;
};

/// K = [-1, 1]^2, T = [-0.5, 0.5]^2.
SafeTargetSets integrator_sets();

/// K = {|z1| < 1, z3 >= 0}, T = {|z1| < 1, z3 >= 0.8}, so that K \ T is the
/// altitude band 0 <= z3 < 0.8 inside the lateral tube.
SafeTargetSets quadrotor_sets();

/// Parallel tubes: copy c uses quadrotor_sets() shifted by c * spacing on z1.
SafeTargetSets repeated_quadrotor_sets(int copies, double lateral_spacing);

// ----------------------------------------------------------------------------

/// x_0 ... x_steps with x_{k+1} = step(x_k, pi_k(x_k), w_k).
PointMatrix simulate(const SystemModel& system, const MarkovPolicy& policy, const StateVector& x0, int steps,
                     Rng& rng);

}  // namespace kreach
