#include "kreach/systems.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <sstream>

namespace kreach {

// ----------------------------------------------------------------------------
// Disturbances

Disturbance::Disturbance(Kind kind, int base_dim) : kind_(std::move(kind)), base_dim_(base_dim) {
    if (base_dim_ < 1) throw ConfigError("Disturbance: dimension must be >= 1");
}

Disturbance Disturbance::gaussian(Eigen::MatrixXd covariance) {
    if (covariance.rows() != covariance.cols() || covariance.rows() < 1) {
        throw DimensionError("Disturbance::gaussian: covariance must be square and non-empty");
    }
    if (!covariance.isApprox(covariance.transpose(), 1e-12) && !(covariance - covariance.transpose()).isZero(1e-15)) {
        throw ConfigError("Disturbance::gaussian: covariance must be symmetric");
    }
    const auto n = static_cast<int>(covariance.rows());
    Disturbance d(GaussianNoise{covariance}, n);
    const Eigen::MatrixXd off = covariance - Eigen::MatrixXd(covariance.diagonal().asDiagonal());
    d.diagonal_ = off.isZero(0.0);
    if (d.diagonal_) {
        if ((covariance.diagonal().array() < 0.0).any()) throw ConfigError("Disturbance::gaussian: negative variance");
        d.factor_ = covariance.diagonal().cwiseSqrt();
    } else {
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance);
        const double floor = -1e-12 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
        if (eig.eigenvalues().minCoeff() < floor) throw ConfigError("Disturbance::gaussian: covariance is not PSD");
        d.factor_ = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
    return d;
}

Disturbance Disturbance::gaussian_diagonal(const Eigen::VectorXd& variances) {
    return gaussian(variances.asDiagonal());
}

Disturbance Disturbance::scaled_beta(int dim, double alpha, double beta, double scale) {
    if (!(alpha > 0.0) || !(beta > 0.0)) throw ConfigError("Disturbance::scaled_beta: alpha, beta must be > 0");
    if (!(scale > 0.0)) throw ConfigError("Disturbance::scaled_beta: scale must be > 0");
    return Disturbance(ScaledBetaNoise{dim, alpha, beta, scale}, dim);
}

Disturbance Disturbance::scaled_exponential(int dim, double rate, double scale) {
    if (!(rate > 0.0)) throw ConfigError("Disturbance::scaled_exponential: rate must be > 0");
    if (!(scale > 0.0)) throw ConfigError("Disturbance::scaled_exponential: scale must be > 0");
    return Disturbance(ScaledExponentialNoise{dim, rate, scale}, dim);
}

Disturbance Disturbance::none(int dim) {
    return gaussian(Eigen::MatrixXd::Zero(dim, dim));
}

Disturbance Disturbance::repeated(const Disturbance& base, int copies) {
    if (copies < 1) throw ConfigError("Disturbance::repeated: copies must be >= 1");
    Disturbance d = base;
    d.copies_ = base.copies_ * copies;
    return d;
}

std::string Disturbance::name() const {
    std::ostringstream s;
    std::visit(
        [&](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, GaussianNoise>) {
                if (k.covariance.isZero(0.0)) s << "none";
                else s << "gaussian";
            } else if constexpr (std::is_same_v<T, ScaledBetaNoise>) {
                s << "beta(" << k.alpha << "," << k.beta << ")x" << k.scale;
            } else {
                s << "exponential(" << k.rate << ")x" << k.scale;
            }
        },
        kind_);
    return s.str();
}

void Disturbance::draw_block(Rng& rng, Eigen::Ref<Eigen::VectorXd> out) const {
    std::visit(
        [&](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, GaussianNoise>) {
                std::normal_distribution<double> normal(0.0, 1.0);
                if (diagonal_) {
                    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = factor_(i, 0) * normal(rng);
                } else {
                    Eigen::VectorXd z(out.size());
                    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
                    out = factor_ * z;
                }
            } else if constexpr (std::is_same_v<T, ScaledBetaNoise>) {
                std::gamma_distribution<double> ga(k.alpha, 1.0);
                std::gamma_distribution<double> gb(k.beta, 1.0);
                for (Eigen::Index i = 0; i < out.size(); ++i) {
                    const double a = ga(rng);
                    const double b = gb(rng);
                    out[i] = k.scale * a / (a + b);
                }
            } else {
                std::exponential_distribution<double> ex(k.rate);
                for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = k.scale * ex(rng);
            }
        },
        kind_);
}

void Disturbance::draw_into(Rng& rng, Eigen::Ref<Eigen::VectorXd> out) const {
    require_dimension(out.size(), dimension(), "Disturbance::draw_into");
    for (int c = 0; c < copies_; ++c) draw_block(rng, out.segment(c * base_dim_, base_dim_));
}

Eigen::VectorXd Disturbance::draw(Rng& rng) const {
    Eigen::VectorXd w(dimension());
    draw_into(rng, w);
    return w;
}

std::optional<Eigen::VectorXd> Disturbance::diagonal_gaussian_variances() const {
    const auto* g = std::get_if<GaussianNoise>(&kind_);
    if (g == nullptr || !diagonal_) return std::nullopt;
    return Eigen::VectorXd(g->covariance.diagonal().replicate(copies_, 1));
}

Eigen::VectorXd Disturbance::mean() const {
    const double m = std::visit(
        [](const auto& k) -> double {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, GaussianNoise>) return 0.0;
            else if constexpr (std::is_same_v<T, ScaledBetaNoise>) return k.scale * k.alpha / (k.alpha + k.beta);
            else return k.scale / k.rate;
        },
        kind_);
    return Eigen::VectorXd::Constant(dimension(), m);
}

Eigen::VectorXd draw_disturbance(const Disturbance& d, Rng& rng) {
    return d.draw(rng);
}

// ----------------------------------------------------------------------------
// Systems

SystemModel::SystemModel(std::string name, int state_dim, int input_dim, double dt, StepFunction step,
                         Disturbance disturbance, std::optional<AffineDynamics> affine)
    : name_(std::move(name)),
      state_dim_(state_dim),
      input_dim_(input_dim),
      dt_(dt),
      step_(std::move(step)),
      disturbance_(std::move(disturbance)),
      affine_(std::move(affine)) {
    if (state_dim_ < 1 || input_dim_ < 1) throw ConfigError("SystemModel: dimensions must be >= 1");
    if (!(dt_ > 0.0)) throw ConfigError("SystemModel: sampling time must be > 0");
    require_dimension(disturbance_.dimension(), state_dim_, "SystemModel disturbance");
    if (affine_) {
        require_dimension(affine_->A.rows(), state_dim_, "SystemModel A rows");
        require_dimension(affine_->A.cols(), state_dim_, "SystemModel A cols");
        require_dimension(affine_->B.rows(), state_dim_, "SystemModel B rows");
        require_dimension(affine_->B.cols(), input_dim_, "SystemModel B cols");
    }
}

StateVector SystemModel::step(const StateVector& x, const InputVector& u, const Eigen::VectorXd& w) const {
    require_dimension(x.size(), state_dim_, "SystemModel::step state");
    require_dimension(u.size(), input_dim_, "SystemModel::step input");
    require_dimension(w.size(), state_dim_, "SystemModel::step disturbance");
    return step_(x, u, w);
}

StateVector SystemModel::sample_step(const StateVector& x, const InputVector& u, Rng& rng) const {
    return step(x, u, disturbance_.draw(rng));
}

SystemModel SystemModel::with_disturbance(Disturbance disturbance) const {
    return SystemModel(name_, state_dim_, input_dim_, dt_, step_, std::move(disturbance), affine_);
}

Eigen::Vector2d integrator_step(const Eigen::Vector2d& x, double u, const Eigen::Vector2d& w, double dt) {
    return {x[0] + dt * x[1] + 0.5 * dt * dt * u + w[0], x[1] + dt * u + w[1]};
}

SystemModel make_integrator(double dt, Disturbance disturbance) {
    AffineDynamics affine;
    affine.A.resize(2, 2);
    affine.A << 1.0, dt, 0.0, 1.0;
    affine.B.resize(2, 1);
    affine.B << 0.5 * dt * dt, dt;
    auto step = [dt](const StateVector& x, const InputVector& u, const Eigen::VectorXd& w) -> StateVector {
        return integrator_step(x, u[0], w, dt);
    };
    return SystemModel("integrator", 2, 1, dt, step, std::move(disturbance), std::move(affine));
}

void QuadrotorParams::validate() const {
    if (!(inertia > 0.0 && arm_length > 0.0 && mass > 0.0 && gravity > 0.0 && dt > 0.0)) {
        throw ConfigError("QuadrotorParams: all constants must be positive");
    }
}

Eigen::VectorXd quadrotor_step(const Eigen::Ref<const Eigen::VectorXd>& z, const Eigen::Ref<const Eigen::VectorXd>& u,
                               const Eigen::Ref<const Eigen::VectorXd>& w, const QuadrotorParams& p) {
    require_dimension(z.size(), 6, "quadrotor_step state");
    require_dimension(u.size(), 2, "quadrotor_step input");
    require_dimension(w.size(), 6, "quadrotor_step disturbance");
    const double thrust = u[0] + u[1];
    const double theta = z[4];
    Eigen::VectorXd rate(6);
    rate << z[1], -thrust * std::sin(theta) / p.mass, z[3], (thrust * std::cos(theta) - p.mass * p.gravity) / p.mass,
        z[5], p.arm_length * (u[0] - u[1]) / p.inertia;
    return z + p.dt * rate + w;
}

SystemModel make_quadrotor(const QuadrotorParams& params, Disturbance disturbance) {
    params.validate();
    auto step = [params](const StateVector& z, const InputVector& u, const Eigen::VectorXd& w) -> StateVector {
        return quadrotor_step(z, u, w, params);
    };
    return SystemModel("quadrotor", 6, 2, params.dt, step, std::move(disturbance));
}

AffineDynamics quadrotor_linearization(const QuadrotorParams& p) {
    p.validate();
    Eigen::MatrixXd ac = Eigen::MatrixXd::Zero(6, 6);
    ac(0, 1) = 1.0;
    ac(1, 4) = -p.gravity;
    ac(2, 3) = 1.0;
    ac(4, 5) = 1.0;
    Eigen::MatrixXd bc = Eigen::MatrixXd::Zero(6, 2);
    bc(3, 0) = bc(3, 1) = 1.0 / p.mass;
    bc(5, 0) = p.arm_length / p.inertia;
    bc(5, 1) = -p.arm_length / p.inertia;
    return {Eigen::MatrixXd::Identity(6, 6) + p.dt * ac, p.dt * bc};
}

SystemModel repeated_system(const SystemModel& base, int copies) {
    if (copies < 1) throw ConfigError("repeated_system: copies must be >= 1");
    if (copies == 1) return base;
    const int n = base.state_dimension();
    const int m = base.input_dimension();
    auto block_step = base.step_function();
    auto step = [block_step, n, m, copies](const StateVector& x, const InputVector& u,
                                           const Eigen::VectorXd& w) -> StateVector {
        StateVector out(x.size());
        for (int c = 0; c < copies; ++c) {
            out.segment(c * n, n) = block_step(x.segment(c * n, n), u.segment(c * m, m), w.segment(c * n, n));
        }
        return out;
    };
    std::optional<AffineDynamics> affine;
    if (base.affine() && static_cast<long>(n) * copies <= 4096) {
        AffineDynamics a;
        a.A = Eigen::MatrixXd::Zero(n * copies, n * copies);
        a.B = Eigen::MatrixXd::Zero(n * copies, m * copies);
        for (int c = 0; c < copies; ++c) {
            a.A.block(c * n, c * n, n, n) = base.affine()->A;
            a.B.block(c * n, c * m, n, m) = base.affine()->B;
        }
        affine = std::move(a);
    }
    return SystemModel("repeated_" + base.name() + "_x" + std::to_string(copies), n * copies, m * copies, base.dt(),
                       step, Disturbance::repeated(base.disturbance(), copies), std::move(affine));
}

// ----------------------------------------------------------------------------
// Policies

LqrWeights LqrWeights::quadrotor_default() {
    return {Eigen::MatrixXd::Identity(6, 6), 0.1 * Eigen::MatrixXd::Identity(2, 2)};
}

LqrSolution discrete_lqr(const AffineDynamics& model, const LqrWeights& w) {
    const auto& a = model.A;
    const auto& b = model.B;
    const Eigen::Index n = a.rows();
    require_dimension(a.cols(), n, "discrete_lqr A");
    require_dimension(b.rows(), n, "discrete_lqr B");
    require_dimension(w.state.rows(), n, "discrete_lqr Q");
    require_dimension(w.input.rows(), b.cols(), "discrete_lqr R");

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> q_eig(w.state);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> r_eig(w.input);
    if (q_eig.eigenvalues().minCoeff() < -1e-12) throw ConfigError("discrete_lqr: state weight must be PSD");
    if (r_eig.eigenvalues().minCoeff() <= 0.0) throw ConfigError("discrete_lqr: input weight must be positive definite");

    Eigen::MatrixXd p = w.state;
    Eigen::MatrixXd k;
    bool converged = false;
    for (int it = 0; it < 100000; ++it) {
        const Eigen::MatrixXd btp = b.transpose() * p;
        k = (w.input + btp * b).ldlt().solve(btp * a);
        Eigen::MatrixXd next = w.state + a.transpose() * p * (a - b * k);
        next = 0.5 * (next + next.transpose());
        if (!next.allFinite()) break;
        const double change = (next - p).cwiseAbs().maxCoeff();
        p = std::move(next);
        if (change <= 1e-11 * std::max(1.0, p.cwiseAbs().maxCoeff())) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw NumericalError("discrete_lqr: Riccati iteration did not converge; (A, B) may not be stabilizable "
                             "or the weights are degenerate");
    }
    const Eigen::MatrixXd btp = b.transpose() * p;
    k = (w.input + btp * b).ldlt().solve(btp * a);
    Eigen::MatrixXd closed = a - b * k;
    const double radius = closed.eigenvalues().cwiseAbs().maxCoeff();
    if (!(radius < 1.0)) {
        throw NumericalError("discrete_lqr: closed loop is not stable (spectral radius " + std::to_string(radius) +
                             "); check that the state weight observes every unstable mode");
    }
    return {std::move(k), std::move(p), std::move(closed)};
}

Eigen::VectorXd quadrotor_default_reference() {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(6);
    r[2] = 1.0;
    return r;
}

MarkovPolicy hover_lqr_policy(const QuadrotorParams& params, const LqrWeights& weights,
                              const Eigen::VectorXd& reference) {
    require_dimension(reference.size(), 6, "hover_lqr_policy reference");
    const Eigen::MatrixXd gain = discrete_lqr(quadrotor_linearization(params), weights).gain;
    const Eigen::Vector2d hover = Eigen::Vector2d::Constant(params.hover_thrust());
    return MarkovPolicy::stationary("hover_lqr", 2, [gain, hover, reference](const StateVector& z) -> InputVector {
        return hover + gain * (reference - z);
    });
}

MarkovPolicy repeated_hover_lqr_policy(const QuadrotorParams& params, const LqrWeights& weights,
                                       const Eigen::VectorXd& reference, int copies, double lateral_spacing) {
    if (copies < 1) throw ConfigError("repeated_hover_lqr_policy: copies must be >= 1");
    require_dimension(reference.size(), 6, "repeated_hover_lqr_policy reference");
    const Eigen::MatrixXd gain = discrete_lqr(quadrotor_linearization(params), weights).gain;
    const double hover = params.hover_thrust();
    return MarkovPolicy::stationary(
        copies == 1 ? "hover_lqr" : "repeated_hover_lqr", 2 * copies,
        [gain, hover, reference, copies, lateral_spacing](const StateVector& z) -> InputVector {
            InputVector u(2 * copies);
            Eigen::VectorXd ref = reference;
            for (int c = 0; c < copies; ++c) {
                ref[0] = reference[0] + lateral_spacing * c;
                u.segment(2 * c, 2) = Eigen::Vector2d::Constant(hover) + gain * (ref - z.segment(6 * c, 6));
            }
            return u;
        });
}

// ----------------------------------------------------------------------------
// Sets

SafeTargetSets integrator_sets() {
    return {HyperRectangle::cube(2, -1.0, 1.0), HyperRectangle::cube(2, -0.5, 0.5)};
}

namespace {

HyperRectangle quadrotor_safe_block() {
    std::vector<AxisInterval> axes(6, AxisInterval::unbounded());
    axes[0] = AxisInterval::open(-1.0, 1.0);
    axes[2] = AxisInterval{0.0, std::numeric_limits<double>::infinity(), true, true};
    return HyperRectangle(std::move(axes));
}

HyperRectangle quadrotor_target_block() {
    std::vector<AxisInterval> axes(6, AxisInterval::unbounded());
    axes[0] = AxisInterval::open(-1.0, 1.0);
    axes[2] = AxisInterval{0.8, std::numeric_limits<double>::infinity(), true, true};
    return HyperRectangle(std::move(axes));
}

}  // namespace

SafeTargetSets quadrotor_sets() {
    return {quadrotor_safe_block(), quadrotor_target_block()};
}

SafeTargetSets repeated_quadrotor_sets(int copies, double lateral_spacing) {
    if (copies < 1) throw ConfigError("repeated_quadrotor_sets: copies must be >= 1");
    if (copies == 1) return quadrotor_sets();
    std::vector<HyperRectangle> safe, target;
    safe.reserve(static_cast<std::size_t>(copies));
    target.reserve(static_cast<std::size_t>(copies));
    for (int c = 0; c < copies; ++c) {
        safe.push_back(quadrotor_safe_block().translated(0, lateral_spacing * c));
        target.push_back(quadrotor_target_block().translated(0, lateral_spacing * c));
    }
    return {ProductSet(std::move(safe)), ProductSet(std::move(target))};
}

PointMatrix simulate(const SystemModel& system, const MarkovPolicy& policy, const StateVector& x0, int steps,
                     Rng& rng) {
    if (steps < 0) throw ConfigError("simulate: steps must be >= 0");
    require_dimension(x0.size(), system.state_dimension(), "simulate x0");
    PointMatrix traj(steps + 1, system.state_dimension());
    traj.row(0) = x0.transpose();
    StateVector x = x0;
    for (int k = 0; k < steps; ++k) {
        x = system.sample_step(x, policy(k, x), rng);
        traj.row(k + 1) = x.transpose();
    }
    return traj;
}

}  // namespace kreach
