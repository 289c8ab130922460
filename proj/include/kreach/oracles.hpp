// Ground-truth generators: gridded dynamic programming for affine systems
// with diagonal Gaussian noise, and Monte Carlo first-hitting estimates.

#pragma once

#include "kreach/core.hpp"
#include "kreach/reachability.hpp"
#include "kreach/systems.hpp"

#include <cstdint>
#include <vector>

namespace kreach {

/// Uniform cells tiling a bounded box; centers are cell midpoints.
class DpGrid {
public:
    DpGrid(HyperRectangle box, std::vector<int> resolution);

    /// 100 cells per axis over the bounding box of `safe` (must be a bounded rectangle).
    static DpGrid over(const SetPredicate& safe, int cells_per_axis = 100);

    [[nodiscard]] int dimension() const noexcept { return static_cast<int>(resolution_.size()); }
    [[nodiscard]] const HyperRectangle& box() const noexcept { return box_; }
    [[nodiscard]] const std::vector<int>& resolution() const noexcept { return resolution_; }
    [[nodiscard]] const std::vector<double>& edges(int axis) const { return edges_.at(static_cast<std::size_t>(axis)); }
    [[nodiscard]] const std::vector<double>& centers(int axis) const {
        return centers_.at(static_cast<std::size_t>(axis));
    }
    [[nodiscard]] Eigen::Index cell_count() const noexcept { return count_; }
    /// All cell centers, last axis varying fastest.
    [[nodiscard]] PointMatrix center_points() const;

private:
    HyperRectangle box_;
    std::vector<int> resolution_;
    std::vector<std::vector<double>> edges_;
    std::vector<std::vector<double>> centers_;
    Eigen::Index count_ = 1;
};

struct DpSolution {
    DpGrid grid;
    SafetyField field;  // points = grid.center_points()

    /// V_layer at an arbitrary point: 1 in T, 0 outside K, otherwise
    /// multilinear interpolation between cell centers (clamped at the border).
    [[nodiscard]] double value(const SafetyProblem& problem, const Eigen::Ref<const Eigen::VectorXd>& x,
                               int layer = 0) const;
};

/// Backward recursion on the grid with per-axis Gaussian CDF transition
/// masses. Requires an affine system with diagonal Gaussian noise and
/// dimension <= 3; throws ConfigError otherwise.
DpSolution dp_solve(const SafetyProblem& problem, const SystemModel& system, const DpGrid& grid);

// ----------------------------------------------------------------------------

/// Two-sided Hoeffding radius sqrt(ln(2 / (1 - level)) / (2 R)).
double hoeffding_radius(std::int64_t trials, double level = 0.99);

struct McEstimate {
    double probability = 0.0;
    std::int64_t trials = 0;
    double radius = 0.0;  // 99% Hoeffding
};

/// Fraction of simulated trajectories that reach T within N steps while
/// staying in K beforehand.
McEstimate mc_estimate(const SafetyProblem& problem, const SystemModel& system, const StateVector& x0,
                       std::int64_t trials, std::uint64_t seed);

/// MC values for every layer k at every point (V_k uses horizon N - k).
/// Point i uses a stream derived from (seed, i).
SafetyField mc_field(const SafetyProblem& problem, const SystemModel& system, const PointMatrix& points,
                     std::int64_t trials, std::uint64_t seed);

}  // namespace kreach
