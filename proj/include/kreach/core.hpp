// Problem-domain types shared by every module: vectors, sets, policies,
// transition samples and first-hitting problems.

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace kreach {

using StateVector = Eigen::VectorXd;
using InputVector = Eigen::VectorXd;

/// Points stored one per row.
using PointMatrix = Eigen::MatrixXd;

// ----------------------------------------------------------------------------
// Errors
// ----------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Vector or matrix sizes disagree with what the owning object declares.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid user-supplied parameters or configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Factorization or convergence failure.
class NumericalError : public Error {
public:
    using Error::Error;
};

void require_dimension(Eigen::Index actual, Eigen::Index expected, const char* what);
void require_finite(const Eigen::Ref<const Eigen::VectorXd>& v, const char* what);

// ----------------------------------------------------------------------------
// Sets
// ----------------------------------------------------------------------------

/// One axis of a hyper-rectangle. Unbounded sides are +-infinity.
struct AxisInterval {
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    bool lower_closed = true;
    bool upper_closed = true;

    static AxisInterval closed(double lo, double hi) { return {lo, hi, true, true}; }
    static AxisInterval open(double lo, double hi) { return {lo, hi, false, false}; }
    static AxisInterval unbounded() { return {}; }

    [[nodiscard]] bool contains(double v) const noexcept {
        const bool above = lower_closed ? v >= lower : v > lower;
        const bool below = upper_closed ? v <= upper : v < upper;
        return above && below;
    }
    [[nodiscard]] bool is_bounded() const noexcept {
        return std::isfinite(lower) && std::isfinite(upper);
    }
    /// Exact interval inclusion, honouring open/closed ends.
    [[nodiscard]] bool subset_of(const AxisInterval& other) const noexcept;
};

class HyperRectangle {
public:
    HyperRectangle() = default;
    explicit HyperRectangle(std::vector<AxisInterval> axes);

    /// Closed box [lower, upper].
    static HyperRectangle box(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);
    /// Closed cube [lo, hi]^dim.
    static HyperRectangle cube(int dim, double lo, double hi);

    [[nodiscard]] int dimension() const noexcept { return static_cast<int>(axes_.size()); }
    [[nodiscard]] const AxisInterval& axis(int i) const { return axes_.at(static_cast<std::size_t>(i)); }
    [[nodiscard]] const std::vector<AxisInterval>& axes() const noexcept { return axes_; }

    [[nodiscard]] bool contains(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    [[nodiscard]] bool subset_of(const HyperRectangle& other) const;

    /// Same rectangle shifted along one axis.
    [[nodiscard]] HyperRectangle translated(int axis, double offset) const;

private:
    std::vector<AxisInterval> axes_;
};

/// Cartesian product of rectangles over consecutive coordinate blocks.
class ProductSet {
public:
    explicit ProductSet(std::vector<HyperRectangle> blocks);

    [[nodiscard]] int dimension() const noexcept { return dimension_; }
    [[nodiscard]] const std::vector<HyperRectangle>& blocks() const noexcept { return blocks_; }
    [[nodiscard]] bool contains(const Eigen::Ref<const Eigen::VectorXd>& x) const;

private:
    std::vector<HyperRectangle> blocks_;
    int dimension_ = 0;
};

/// Set membership predicate: a rectangle or a block product of rectangles.
class SetPredicate {
public:
    SetPredicate(HyperRectangle rect) : set_(std::move(rect)) {}  // NOLINT(implicit)
    SetPredicate(ProductSet product) : set_(std::move(product)) {}  // NOLINT(implicit)

    [[nodiscard]] int dimension() const;
    /// Throws DimensionError on size mismatch.
    [[nodiscard]] bool contains(const Eigen::Ref<const Eigen::VectorXd>& x) const;

    [[nodiscard]] const HyperRectangle* rectangle() const { return std::get_if<HyperRectangle>(&set_); }
    [[nodiscard]] const ProductSet* product() const { return std::get_if<ProductSet>(&set_); }

private:
    std::variant<HyperRectangle, ProductSet> set_;
};

/// 1 if x is in the set, else 0.
int indicator(const SetPredicate& set, const Eigen::Ref<const Eigen::VectorXd>& x);

// ----------------------------------------------------------------------------
// Policies
// ----------------------------------------------------------------------------

/// Deterministic Markov policy pi_k : X -> U.
class MarkovPolicy {
public:
    using Map = std::function<InputVector(const StateVector&)>;

    /// The same map at every time step.
    static MarkovPolicy stationary(std::string name, int input_dim, Map map);
    /// One map per step k in [0, maps.size()).
    static MarkovPolicy time_varying(std::string name, int input_dim, std::vector<Map> maps);
    /// pi(x) = 0.
    static MarkovPolicy zero(int input_dim);

    [[nodiscard]] InputVector operator()(int step, const StateVector& x) const;
    /// Rows of the result are pi_step applied to the rows of states.
    [[nodiscard]] Eigen::MatrixXd apply(int step, const PointMatrix& states) const;

    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] int input_dimension() const noexcept { return input_dim_; }
    [[nodiscard]] bool is_stationary() const noexcept { return maps_.size() == 1; }
    /// Number of steps covered by a time-varying policy (1 for stationary).
    [[nodiscard]] int defined_steps() const noexcept { return static_cast<int>(maps_.size()); }

private:
    MarkovPolicy(std::string name, int input_dim, std::vector<Map> maps);

    std::string name_;
    int input_dim_ = 0;
    std::vector<Map> maps_;
};

// ----------------------------------------------------------------------------
// Samples
// ----------------------------------------------------------------------------

struct SampleMetadata {
    std::string system;
    std::uint64_t seed = 0;
    std::string disturbance;
    std::string policy;
};

/// M observed transitions (x_i, u_i, y_i) with y_i ~ Q(. | x_i, u_i).
class TransitionSample {
public:
    TransitionSample(PointMatrix states, PointMatrix inputs, PointMatrix successors,
                     SampleMetadata meta = {});

    [[nodiscard]] Eigen::Index size() const noexcept { return states_.rows(); }
    [[nodiscard]] int state_dimension() const noexcept { return static_cast<int>(states_.cols()); }
    [[nodiscard]] int input_dimension() const noexcept { return static_cast<int>(inputs_.cols()); }

    [[nodiscard]] const PointMatrix& states() const noexcept { return states_; }
    [[nodiscard]] const PointMatrix& inputs() const noexcept { return inputs_; }
    [[nodiscard]] const PointMatrix& successors() const noexcept { return successors_; }
    [[nodiscard]] const SampleMetadata& metadata() const noexcept { return meta_; }

private:
    PointMatrix states_;
    PointMatrix inputs_;
    PointMatrix successors_;
    SampleMetadata meta_;
};

/// CSV container: one `# kernel-reach sample v1; ...` header line, then rows
/// x_1..x_n,u_1..u_m,y_1..y_n printed with 17 significant digits.
void write_sample_csv(std::ostream& out, const TransitionSample& sample);
void write_sample_csv(const std::string& path, const TransitionSample& sample);
TransitionSample read_sample_csv(std::istream& in);
TransitionSample read_sample_csv(const std::string& path);

// ----------------------------------------------------------------------------
// First-hitting problem
// ----------------------------------------------------------------------------

enum class HitLabel { Target, SafeNotTarget, Unsafe };

/// Horizon N, safe set K, target set T (T inside K), policy pi.
class SafetyProblem {
public:
    /// Rectangle pairs (and block products with matching blocks) are checked
    /// for T inside K exactly; other combinations are the caller's job.
    SafetyProblem(int horizon, SetPredicate safe, SetPredicate target, MarkovPolicy policy);

    [[nodiscard]] int horizon() const noexcept { return horizon_; }
    [[nodiscard]] const SetPredicate& safe_set() const noexcept { return safe_; }
    [[nodiscard]] const SetPredicate& target_set() const noexcept { return target_; }
    [[nodiscard]] const MarkovPolicy& policy() const noexcept { return policy_; }
    [[nodiscard]] int state_dimension() const { return safe_.dimension(); }

    [[nodiscard]] HitLabel label(const Eigen::Ref<const Eigen::VectorXd>& x) const;

    /// Draws `count` points uniformly from `box` and throws ConfigError if any
    /// lands in T but not in K.
    void spot_check_subset(const HyperRectangle& box, int count, std::uint64_t seed) const;

private:
    int horizon_;
    SetPredicate safe_;
    SetPredicate target_;
    MarkovPolicy policy_;
};

HitLabel first_hit_label(const SafetyProblem& problem, const Eigen::Ref<const Eigen::VectorXd>& x);

const char* to_string(HitLabel label);

}  // namespace kreach
