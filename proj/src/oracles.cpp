#include "kreach/oracles.hpp"

#include "kreach/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace kreach {

// ----------------------------------------------------------------------------
// Grid

DpGrid::DpGrid(HyperRectangle box, std::vector<int> resolution)
    : box_(std::move(box)), resolution_(std::move(resolution)) {
    const auto d = static_cast<std::size_t>(box_.dimension());
    if (resolution_.size() != d) throw DimensionError("DpGrid: resolution must list every axis");
    edges_.resize(d);
    centers_.resize(d);
    for (std::size_t a = 0; a < d; ++a) {
        const auto& axis = box_.axis(static_cast<int>(a));
        if (!axis.is_bounded()) throw ConfigError("DpGrid: axis " + std::to_string(a) + " is unbounded");
        const int n = resolution_[a];
        if (n < 1) throw ConfigError("DpGrid: resolution must be >= 1");
        const double h = (axis.upper - axis.lower) / n;
        edges_[a].resize(static_cast<std::size_t>(n) + 1);
        centers_[a].resize(static_cast<std::size_t>(n));
        for (int j = 0; j <= n; ++j) edges_[a][static_cast<std::size_t>(j)] = axis.lower + h * j;
        edges_[a].back() = axis.upper;
        for (int j = 0; j < n; ++j) centers_[a][static_cast<std::size_t>(j)] = axis.lower + h * (j + 0.5);
        count_ *= n;
    }
}

DpGrid DpGrid::over(const SetPredicate& safe, int cells_per_axis) {
    const HyperRectangle* rect = safe.rectangle();
    if (rect == nullptr) throw ConfigError("DpGrid: the safe set must be a single rectangle");
    return DpGrid(*rect, std::vector<int>(static_cast<std::size_t>(rect->dimension()), cells_per_axis));
}

PointMatrix DpGrid::center_points() const {
    const auto d = static_cast<std::size_t>(dimension());
    PointMatrix out(count_, static_cast<Eigen::Index>(d));
    std::vector<std::size_t> idx(d, 0);
    for (Eigen::Index r = 0; r < count_; ++r) {
        for (std::size_t a = 0; a < d; ++a) out(r, static_cast<Eigen::Index>(a)) = centers_[a][idx[a]];
        for (std::size_t a = d; a-- > 0;) {
            if (++idx[a] < centers_[a].size()) break;
            idx[a] = 0;
        }
    }
    return out;
}

// ----------------------------------------------------------------------------
// DP

namespace {

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

// Transition mass into each cell along one axis, with the nonzero index range.
struct AxisMass {
    std::vector<double> p;
    int lo = 0;
    int hi = 0;  // exclusive
};

void axis_mass(AxisMass& out, const std::vector<double>& edges, double mean, double sd, bool upper_closed) {
    const int n = static_cast<int>(edges.size()) - 1;
    out.p.assign(static_cast<std::size_t>(n), 0.0);
    out.lo = n;
    out.hi = 0;
    if (sd == 0.0) {
        for (int j = 0; j < n; ++j) {
            const double a = edges[static_cast<std::size_t>(j)];
            const double b = edges[static_cast<std::size_t>(j) + 1];
            const bool inside = mean >= a && (mean < b || (j == n - 1 && upper_closed && mean == b));
            if (inside) {
                out.p[static_cast<std::size_t>(j)] = 1.0;
                out.lo = j;
                out.hi = j + 1;
                return;
            }
        }
        return;
    }
    double prev = normal_cdf((edges.front() - mean) / sd);
    for (int j = 0; j < n; ++j) {
        const double next = normal_cdf((edges[static_cast<std::size_t>(j) + 1] - mean) / sd);
        const double mass = std::max(0.0, next - prev);
        out.p[static_cast<std::size_t>(j)] = mass;
        if (mass > 0.0) {
            out.lo = std::min(out.lo, j);
            out.hi = j + 1;
        }
        prev = next;
    }
}

// sum over cells of prod_a p_a[i_a] * values[flat(i)], flat index row-major.
double contract(const std::vector<AxisMass>& mass, const std::vector<int>& dims, const ValueVector& values,
                std::size_t axis, Eigen::Index prefix) {
    const AxisMass& m = mass[axis];
    double total = 0.0;
    for (int i = m.lo; i < m.hi; ++i) {
        const Eigen::Index idx = prefix * dims[axis] + i;
        const double v = axis + 1 == mass.size() ? values[idx] : contract(mass, dims, values, axis + 1, idx);
        total += m.p[static_cast<std::size_t>(i)] * v;
    }
    return total;
}

}  // namespace

DpSolution dp_solve(const SafetyProblem& problem, const SystemModel& system, const DpGrid& grid) {
    const int d = grid.dimension();
    require_dimension(system.state_dimension(), d, "dp_solve system");
    require_dimension(problem.state_dimension(), d, "dp_solve problem");
    if (d > 3) throw ConfigError("dp_solve: dimension " + std::to_string(d) + " > 3 is unsupported; use mc instead");
    if (!system.affine()) {
        throw ConfigError("dp_solve: system '" + system.name() + "' is not affine; use the mc oracle instead");
    }
    const auto variances = system.disturbance().diagonal_gaussian_variances();
    if (!variances) {
        throw ConfigError("dp_solve: disturbance '" + system.disturbance().name() +
                          "' is not a diagonal Gaussian; use the mc oracle instead");
    }
    const Eigen::VectorXd sd = variances->cwiseSqrt();
    const auto& A = system.affine()->A;
    const auto& B = system.affine()->B;

    DpSolution sol{grid, {}};
    SafetyField& field = sol.field;
    field.points = grid.center_points();
    const Eigen::Index cells = grid.cell_count();

    ValueVector fixed = ValueVector::Zero(cells);
    std::vector<Eigen::Index> active;
    for (Eigen::Index i = 0; i < cells; ++i) {
        switch (problem.label(field.points.row(i).transpose())) {
            case HitLabel::Target: fixed[i] = 1.0; break;
            case HitLabel::SafeNotTarget: active.push_back(i); break;
            case HitLabel::Unsafe: break;
        }
    }

    const int horizon = problem.horizon();
    field.layers.assign(static_cast<std::size_t>(horizon) + 1, fixed);
    const auto n_active = static_cast<Eigen::Index>(active.size());
    for (int k = horizon - 1; k >= 0; --k) {
        const ValueVector& next = field.layers[static_cast<std::size_t>(k) + 1];
        ValueVector& layer = field.layers[static_cast<std::size_t>(k)];
#pragma omp parallel
        {
            std::vector<AxisMass> mass(static_cast<std::size_t>(d));
#pragma omp for schedule(static)
            for (Eigen::Index r = 0; r < n_active; ++r) {
                const Eigen::Index i = active[static_cast<std::size_t>(r)];
                const StateVector c = field.points.row(i).transpose();
                const Eigen::VectorXd mean = A * c + B * problem.policy()(k, c);
                for (int a = 0; a < d; ++a) {
                    axis_mass(mass[static_cast<std::size_t>(a)], grid.edges(a), mean[a], sd[a],
                              grid.box().axis(a).upper_closed);
                }
                layer[i] = contract(mass, grid.resolution(), next, 0, 0);
            }
        }
    }

    field.meta["method"] = "DP";
    field.meta["horizon"] = horizon;
    field.meta["resolution"] = grid.resolution();
    field.meta["system"] = system.name();
    field.meta["disturbance"] = system.disturbance().name();
    field.meta["policy"] = problem.policy().name();
    field.meta["dt"] = system.dt();
    return sol;
}

double DpSolution::value(const SafetyProblem& problem, const Eigen::Ref<const Eigen::VectorXd>& x, int layer) const {
    const int d = grid.dimension();
    require_dimension(x.size(), d, "DpSolution::value");
    if (layer < 0 || layer > field.horizon()) throw ConfigError("DpSolution::value: layer out of range");
    switch (problem.label(x)) {
        case HitLabel::Target: return 1.0;
        case HitLabel::Unsafe: return 0.0;
        case HitLabel::SafeNotTarget: break;
    }
    std::vector<int> base(static_cast<std::size_t>(d));
    std::vector<double> frac(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a) {
        const auto& c = grid.centers(a);
        const int n = static_cast<int>(c.size());
        if (n == 1) {
            base[static_cast<std::size_t>(a)] = 0;
            frac[static_cast<std::size_t>(a)] = 0.0;
            continue;
        }
        const double h = c[1] - c[0];
        const double t = std::clamp((x[a] - c[0]) / h, 0.0, static_cast<double>(n - 1));
        const int i0 = std::min(static_cast<int>(t), n - 2);
        base[static_cast<std::size_t>(a)] = i0;
        frac[static_cast<std::size_t>(a)] = t - i0;
    }
    const ValueVector& values = field.layers[static_cast<std::size_t>(layer)];
    double total = 0.0;
    for (int corner = 0; corner < (1 << d); ++corner) {
        double w = 1.0;
        Eigen::Index flat = 0;
        for (int a = 0; a < d; ++a) {
            const int n = grid.resolution()[static_cast<std::size_t>(a)];
            const bool up = ((corner >> a) & 1) != 0;
            const double f = frac[static_cast<std::size_t>(a)];
            w *= up ? f : 1.0 - f;
            flat = flat * n + std::min(base[static_cast<std::size_t>(a)] + (up ? 1 : 0), n - 1);
        }
        if (w != 0.0) total += w * values[flat];
    }
    return total;
}

// ----------------------------------------------------------------------------
// Monte Carlo

double hoeffding_radius(std::int64_t trials, double level) {
    if (trials < 1) throw ConfigError("hoeffding_radius: trials must be >= 1");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("hoeffding_radius: level must be in (0, 1)");
    return std::sqrt(std::log(2.0 / (1.0 - level)) / (2.0 * static_cast<double>(trials)));
}

namespace {

constexpr std::int64_t kBlock = 4096;

// counts[j] = number of trajectories whose first hit of T happens at step j.
std::vector<std::int64_t> hit_histogram(const SafetyProblem& problem, const SystemModel& system,
                                        const StateVector& x0, int horizon, int step_offset, std::int64_t trials,
                                        std::uint64_t seed) {
    std::vector<std::int64_t> counts(static_cast<std::size_t>(horizon) + 1, 0);
    switch (problem.label(x0)) {
        case HitLabel::Target: counts[0] = trials; return counts;
        case HitLabel::Unsafe: return counts;
        case HitLabel::SafeNotTarget: break;
    }
    const std::uint64_t base = derive_seed(seed, stream::kMonteCarlo);
    const std::int64_t blocks = (trials + kBlock - 1) / kBlock;
#pragma omp parallel
    {
        std::vector<std::int64_t> local(counts.size(), 0);
#pragma omp for schedule(dynamic, 1)
        for (std::int64_t b = 0; b < blocks; ++b) {
            Rng rng(derive_seed(base, static_cast<std::uint64_t>(b)));
            const std::int64_t end = std::min(trials, (b + 1) * kBlock);
            for (std::int64_t r = b * kBlock; r < end; ++r) {
                StateVector x = x0;
                for (int j = 1; j <= horizon; ++j) {
                    x = system.sample_step(x, problem.policy()(step_offset + j - 1, x), rng);
                    const HitLabel label = problem.label(x);
                    if (label == HitLabel::Target) {
                        ++local[static_cast<std::size_t>(j)];
                        break;
                    }
                    if (label == HitLabel::Unsafe) break;
                }
            }
        }
#pragma omp critical
        for (std::size_t j = 0; j < counts.size(); ++j) counts[j] += local[j];
    }
    return counts;
}

void check_mc_args(const SafetyProblem& problem, const SystemModel& system, std::int64_t trials) {
    if (trials < 1) throw ConfigError("mc: trials must be >= 1");
    require_dimension(system.state_dimension(), problem.state_dimension(), "mc system");
    require_dimension(system.input_dimension(), problem.policy().input_dimension(), "mc policy");
}

}  // namespace

McEstimate mc_estimate(const SafetyProblem& problem, const SystemModel& system, const StateVector& x0,
                       std::int64_t trials, std::uint64_t seed) {
    check_mc_args(problem, system, trials);
    require_dimension(x0.size(), problem.state_dimension(), "mc_estimate x0");
    const auto counts = hit_histogram(problem, system, x0, problem.horizon(), 0, trials, seed);
    std::int64_t hits = 0;
    for (const auto c : counts) hits += c;
    return {static_cast<double>(hits) / static_cast<double>(trials), trials, hoeffding_radius(trials)};
}

SafetyField mc_field(const SafetyProblem& problem, const SystemModel& system, const PointMatrix& points,
                     std::int64_t trials, std::uint64_t seed) {
    check_mc_args(problem, system, trials);
    require_dimension(points.cols(), problem.state_dimension(), "mc_field points");
    const int horizon = problem.horizon();
    SafetyField field;
    field.points = points;
    field.layers.assign(static_cast<std::size_t>(horizon) + 1, ValueVector::Zero(points.rows()));
    const bool stationary = problem.policy().is_stationary();
    const auto total = static_cast<double>(trials);

    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const StateVector x0 = points.row(i).transpose();
        const std::uint64_t point_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
        if (stationary) {
            // With a stationary policy V_k(x) = P(first hit at j <= N - k).
            const auto counts = hit_histogram(problem, system, x0, horizon, 0, trials, point_seed);
            std::int64_t cumulative = 0;
            for (int j = 0; j <= horizon; ++j) {
                cumulative += counts[static_cast<std::size_t>(j)];
                field.layers[static_cast<std::size_t>(horizon - j)][i] = static_cast<double>(cumulative) / total;
            }
        } else {
            for (int k = 0; k <= horizon; ++k) {
                const auto counts = hit_histogram(problem, system, x0, horizon - k, k, trials, point_seed);
                std::int64_t hits = 0;
                for (const auto c : counts) hits += c;
                field.layers[static_cast<std::size_t>(k)][i] = static_cast<double>(hits) / total;
            }
        }
    }

    field.meta["method"] = "MC";
    field.meta["horizon"] = horizon;
    field.meta["trials"] = trials;
    field.meta["radius99"] = hoeffding_radius(trials);
    field.meta["seed"] = seed;
    field.meta["system"] = system.name();
    field.meta["disturbance"] = system.disturbance().name();
    field.meta["policy"] = problem.policy().name();
    return field;
}

}  // namespace kreach
