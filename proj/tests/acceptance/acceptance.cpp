// Acceptance suite: one PASS/FAIL line per criterion.
//
// Every run uses master seed 2026. Hyperparameters that the criteria do not
// pin (lambda and bandwidths for criteria 4 and 5, probe points) are declared
// in the configuration strings below.

#include "kreach/config.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace kreach;

namespace {

constexpr std::uint64_t kSeed = 2026;

struct Result {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s.precision(precision);
    s << v;
    return s.str();
}

RunConfig config(const std::string& text) {
    RunConfig cfg = run_config_from_json(parse_config_text("seed = " + std::to_string(kSeed) + "\n" + text));
    cfg.validate();
    return cfg;
}

PointMatrix rows(std::initializer_list<std::vector<double>> pts) {
    PointMatrix p(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(pts.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& r : pts) {
        for (std::size_t j = 0; j < r.size(); ++j) p(i, static_cast<Eigen::Index>(j)) = r[j];
        ++i;
    }
    return p;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Fields produced by every run, checked for layer-N exactness and fixed
// Target/Unsafe values under criterion 7.
struct FieldRecord {
    std::string label;
    SafetyProblem problem;
    SafetyField field;
};
std::vector<FieldRecord> g_fields;

void record(const std::string& label, const RunConfig& cfg, const SafetyField& field) {
    g_fields.push_back({label, build_problem(cfg), field});
}

// ----------------------------------------------------------------------------
// Criteria 1-3: integrator validation against the DP oracle.

const char* kIntegrator = R"(
[sampling]
size = 2500
[kernel]
sigma = 0.1
lambda = 1.0
[rff]
D = 15000
mode = "concatenated"
[problem]
horizon = 5
[dp]
resolution = 100
)";

struct IntegratorErrors {
    double exact = 0.0;
    double rff = 0.0;
    double exact_time = 0.0;
    double rff_time = 0.0;
};

IntegratorErrors integrator_validation() {
    const RunConfig cfg = config(kIntegrator);
    const PointMatrix pts = build_eval_points(cfg);
    const MethodRun dp = run_method(cfg, Method::Dp, pts);
    record("dp", cfg, dp.field);

    const auto t0 = std::chrono::steady_clock::now();
    const auto sample = obtain_sample(cfg);
    const double sample_time = seconds_since(t0);

    IntegratorErrors e;
    const MethodRun exact = run_method(cfg, Method::Exact, pts, sample);
    record("exact", cfg, exact.field);
    e.exact = compare_fields(exact.field, dp.field).max_abs;
    e.exact_time = sample_time + exact.times.total();

    const MethodRun rff = run_method(cfg, Method::Rff, pts, sample);
    record("rff", cfg, rff.field);
    e.rff = compare_fields(rff.field, dp.field).max_abs;
    e.rff_time = sample_time + rff.times.total();
    return e;
}

// ----------------------------------------------------------------------------
// Criterion 4: beta and exponential integrator runs, N = 50, vs MC.

PointMatrix integrator_probes() {
    const std::vector<double> axis{-0.9, -0.7, 0.0, 0.7, 0.9};
    PointMatrix p(25, 2);
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) p.row(5 * i + j) << axis[static_cast<std::size_t>(i)], axis[static_cast<std::size_t>(j)];
    }
    return p;
}

Result criterion4() {
    const PointMatrix probes = integrator_probes();
    double worst = 0.0;
    std::string detail;
    for (const char* kind : {"beta", "exponential"}) {
        const RunConfig cfg = config(std::string("[disturbance]\nkind = \"") + kind + R"("
[sampling]
size = 2500
[kernel]
sigma = 0.1
lambda = 1e-5
[problem]
horizon = 50
[mc]
trials = 100000
)");
        const MethodRun est = run_method(cfg, Method::Exact, probes);
        const MethodRun mc = run_method(cfg, Method::Mc, probes);
        record(std::string("exact/") + kind, cfg, est.field);
        record(std::string("mc/") + kind, cfg, mc.field);
        const double err = compare_fields(est.field, mc.field).max_abs;
        worst = std::max(worst, err);
        detail += std::string(kind) + " max abs " + fmt(err) + " (" + fmt(est.times.total() + mc.times.total(), 3) + " s); ";
    }
    return {worst <= 0.10, detail + "limit 0.10"};
}

// ----------------------------------------------------------------------------
// Criterion 5: single quadrotor, Gaussian and beta noise, RFF path vs MC.

Result criterion5() {
    const PointMatrix probes = rows({{-0.5, 0, 0.2, 0, 0, 0}, {0, 0, 0.2, 0, 0, 0}, {0.5, 0, 0.2, 0, 0, 0},
                                     {-0.5, 0, 0.5, 0, 0, 0}, {0, 0, 0.5, 0, 0, 0}, {0.5, 0, 0.5, 0, 0, 0},
                                     {-0.5, 0, 0.7, 0, 0, 0}, {0, 0, 0.7, 0, 0, 0}, {0.5, 0, 0.7, 0, 0, 0},
                                     {0.8, 0, 0.4, 0, 0, 0}});
    double worst = 0.0;
    std::string detail;
    for (const char* kind : {"gaussian", "beta"}) {
        const RunConfig cfg = config(std::string("[system]\nname = \"quadrotor\"\n[disturbance]\nkind = \"") + kind + R"("
[sampling]
size = 1000
[kernel]
sigma_x = 0.3
sigma_u = 10.0
lambda = 1e-3
[rff]
D = 15000
[problem]
horizon = 5
[mc]
trials = 100000
)");
        const MethodRun est = run_method(cfg, Method::Rff, probes);
        const MethodRun mc = run_method(cfg, Method::Mc, probes);
        record(std::string("rff/quadrotor/") + kind, cfg, est.field);
        record(std::string("mc/quadrotor/") + kind, cfg, mc.field);
        const double err = compare_fields(est.field, mc.field).max_abs;
        worst = std::max(worst, err);
        detail += std::string(kind) + " max abs " + fmt(err) + " (" + fmt(est.times.total() + mc.times.total(), 3) + " s); ";
    }
    return {worst <= 0.15, detail + "limit 0.15"};
}

// ----------------------------------------------------------------------------
// Criterion 6: repeated-quadrotor timing trend.

Result criterion6() {
    std::vector<double> ratio;
    std::string detail;
    bool rff_faster_at_top = false;
    for (int copies : {10, 100, 1000}) {
        const RunConfig cfg = config("[system]\nname = \"repeated_quadrotor\"\ncopies = " + std::to_string(copies) + R"(
[sampling]
size = 1000
[rff]
D = 2000
[problem]
horizon = 1
)");
        const PointMatrix pts = build_eval_points(cfg);
        double t[2];
        int slot = 0;
        for (Method m : {Method::Exact, Method::Rff}) {
            (void)run_method(cfg, m, pts);  // warm-up
            std::vector<double> totals;
            for (int it = 0; it < 3; ++it) {
                const MethodRun r = run_method(cfg, m, pts);
                totals.push_back(r.times.total());
                if (it == 0) record(std::string(to_string(m)) + "/repeated", cfg, r.field);
            }
            t[slot++] = median(totals);
        }
        ratio.push_back(t[0] / t[1]);
        if (copies == 1000) rff_faster_at_top = t[1] < t[0];
        detail += "dim " + std::to_string(6 * copies) + ": exact " + fmt(t[0], 3) + " s, rff " + fmt(t[1], 3) +
                  " s; ";
    }
    const bool increasing = ratio[0] < ratio[1] && ratio[1] < ratio[2];
    detail += "exact/rff ratio " + fmt(ratio[0], 3) + " -> " + fmt(ratio[1], 3) + " -> " + fmt(ratio[2], 3);
    return {increasing && rff_faster_at_top, detail};
}

// ----------------------------------------------------------------------------
// Criterion 7: algebraic properties.

PointMatrix normal_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double scale) {
    Rng rng(seed);
    std::normal_distribution<double> n(0.0, scale);
    PointMatrix p(r, c);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = n(rng);
    return p;
}

Result criterion7() {
    std::vector<std::string> failures;

    // Push-through identity.
    double push = 0.0;
    for (int m = 1; m <= 20; m += 3) {
        for (int d = 1; d <= 10; d += 3) {
            const auto s = std::make_shared<const TransitionSample>(
                normal_matrix(m, 2, derive_seed(kSeed, 10 * m + d), 0.5), normal_matrix(m, 1, derive_seed(kSeed, 500 + m), 0.5),
                normal_matrix(m, 2, derive_seed(kSeed, 900 + m), 0.5));
            const auto map = JointFeatureMap::sample(JointMode::Concatenated, d, 2, 1, 0.5, 0.5, kSeed);
            for (SolveRoute route : {SolveRoute::Primal, SolveRoute::Dual}) {
                const auto e = fit_rff(s, map, 0.05, route);
                for (int q = 0; q < 3; ++q) {
                    const Eigen::VectorXd x = normal_matrix(2, 1, derive_seed(kSeed, 2000 + q), 0.5);
                    const Eigen::VectorXd u = normal_matrix(1, 1, derive_seed(kSeed, 3000 + q), 0.5);
                    push = std::max(push, (gamma(*e, x, u) - e->dual_coefficients(x, u)).cwiseAbs().maxCoeff());
                }
            }
        }
    }
    if (push > 1e-8) failures.push_back("push-through " + fmt(push));

    // Gram PSD floor.
    double worst_ratio = -1e300;
    for (std::uint64_t r = 0; r < 5; ++r) {
        const Eigen::Index m = 400;
        const PointMatrix x = normal_matrix(m, 2, derive_seed(kSeed, 4000 + r), 0.3);
        const PointMatrix u = normal_matrix(m, 1, derive_seed(kSeed, 5000 + r), 0.3);
        const JointKernel k{GaussianKernel(0.1), GaussianKernel(0.1)};
        const double lo = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram(k, x, u, x, u)).eigenvalues().minCoeff();
        worst_ratio = std::max(worst_ratio, -lo / (1e-8 * static_cast<double>(m)));
    }
    if (worst_ratio > 1.0) failures.push_back("Gram eigenvalue below floor");

    // RFF kernel-estimate concentration.
    {
        const GaussianKernel k(0.5);
        const RffBasis basis = sample_basis(10000, 3, 0.5, kSeed);
        const PointMatrix a = normal_matrix(100, 3, derive_seed(kSeed, 6000), 0.4);
        const PointMatrix b = normal_matrix(100, 3, derive_seed(kSeed, 6001), 0.4);
        int outliers = 0;
        for (Eigen::Index i = 0; i < 100; ++i) {
            const Eigen::VectorXd x = a.row(i).transpose(), y = b.row(i).transpose();
            if (std::abs(kernel_estimate(basis, x, y) - eval(k, x, y)) > 0.05) ++outliers;
        }
        if (outliers > 2) failures.push_back("kernel estimate outliers " + std::to_string(outliers));
    }

    // Layer-N exactness and fixed values on every recorded run.
    int violations = 0;
    for (const FieldRecord& r : g_fields) {
        const auto& f = r.field;
        for (Eigen::Index i = 0; i < f.size(); ++i) {
            const auto x = f.points.row(i).transpose();
            const bool in_t = r.problem.target_set().contains(x);
            const bool in_k = r.problem.safe_set().contains(x);
            if (f.layers.back()[i] != (in_t ? 1.0 : 0.0)) ++violations;
            for (const auto& layer : f.layers) {
                if ((in_t && layer[i] != 1.0) || (!in_k && layer[i] != 0.0) || !std::isfinite(layer[i])) ++violations;
            }
        }
    }
    if (violations > 0) failures.push_back(std::to_string(violations) + " fixed-value violations");

    // Determinism: bit-identical fields on repeated runs of every method.
    const RunConfig cfg = config(R"(
[sampling]
size = 600
[kernel]
sigma = 0.1
lambda = 1e-3
[rff]
D = 1500
[grid]
lower = [-1, -1]
upper = [1, 1]
resolution = [21, 21]
[dp]
resolution = 50
[mc]
trials = 4000
)");
    const PointMatrix pts = build_eval_points(cfg);
    for (Method m : {Method::Exact, Method::Rff, Method::Dp, Method::Mc}) {
        const MethodRun a = run_method(cfg, m, pts), b = run_method(cfg, m, pts);
        bool same = a.field.points == b.field.points && a.field.layers.size() == b.field.layers.size();
        for (std::size_t k = 0; same && k < a.field.layers.size(); ++k) same = a.field.layers[k] == b.field.layers[k];
        if (!same) failures.push_back(std::string("nondeterministic ") + to_string(m));
    }

    std::string detail = "push-through max " + fmt(push, 3) + ", " + std::to_string(g_fields.size()) +
                         " fields checked, determinism over 4 methods";
    for (const auto& f : failures) detail += "; " + f;
    return {failures.empty(), detail};
}

// ----------------------------------------------------------------------------
// Criterion 8: convergence trends.

Result criterion8() {
    const SystemModel sys = make_integrator(0.25, Disturbance::gaussian_diagonal(Eigen::Vector2d(0.01, 0.01)));
    const AffineDynamics& lin = *sys.affine();
    const JointKernel k{GaussianKernel(0.2), GaussianKernel(0.2)};
    // Queries in the interior, f(y) = (y1, y2, y1^2) with analytic expectations.
    const PointMatrix q = normal_matrix(50, 2, derive_seed(kSeed, 7000), 0.3).cwiseMax(-0.8).cwiseMin(0.8);
    const PointMatrix qu = PointMatrix::Zero(q.rows(), 1);
    Eigen::MatrixXd truth(q.rows(), 3);
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        const Eigen::Vector2d mean = lin.A * q.row(i).transpose();
        truth.row(i) << mean[0], mean[1], mean[0] * mean[0] + 0.01;
    }
    const auto f_values = [](const TransitionSample& s) {
        Eigen::MatrixXd f(s.size(), 3);
        f.col(0) = s.successors().col(0);
        f.col(1) = s.successors().col(1);
        f.col(2) = s.successors().col(0).array().square();
        return f;
    };
    const auto sample_for = [&](Eigen::Index m, std::uint64_t rep) {
        const SamplingPlan plan{UniformOverBox{HyperRectangle::cube(2, -1, 1)}, m, derive_seed(kSeed, 100 + rep),
                                MarkovPolicy::zero(1)};
        return std::make_shared<const TransitionSample>(generate_sample(sys, plan));
    };

    std::vector<double> mse_medians;
    for (Eigen::Index m : {250, 500, 1000, 2000}) {
        std::vector<double> mses;
        for (std::uint64_t rep = 0; rep < 10; ++rep) {
            const auto s = sample_for(m, rep);
            const auto e = fit_exact(s, k, lambda_schedule(m));
            const Eigen::MatrixXd f = f_values(*s);
            double sq = 0.0;
            for (int c = 0; c < 3; ++c) sq += (e->expectations(f.col(c), q, qu) - truth.col(c)).squaredNorm();
            mses.push_back(sq / static_cast<double>(3 * q.rows()));
        }
        mse_medians.push_back(median(mses));
    }

    std::vector<double> gap_medians;
    const Eigen::Index m = 1000;
    for (Eigen::Index d : {100, 1000, 10000}) {
        std::vector<double> gaps;
        for (std::uint64_t rep = 0; rep < 10; ++rep) {
            const auto s = sample_for(m, rep);
            const double lambda = lambda_schedule(m);
            const auto exact = fit_exact(s, k, lambda);
            const auto rff = fit_rff(s, JointFeatureMap::sample(JointMode::Concatenated, d, 2, 1, 0.2, 0.2,
                                                                derive_seed(kSeed, 200 + rep)),
                                     lambda);
            const Eigen::VectorXd f = s->successors().col(0);
            gaps.push_back((rff->expectations(f, q, qu) - exact->expectations(f, q, qu)).cwiseAbs().mean());
        }
        gap_medians.push_back(median(gaps));
    }

    bool mse_ok = true, gap_ok = true;
    for (std::size_t i = 1; i < mse_medians.size(); ++i) mse_ok = mse_ok && mse_medians[i] < mse_medians[i - 1];
    for (std::size_t i = 1; i < gap_medians.size(); ++i) gap_ok = gap_ok && gap_medians[i] < gap_medians[i - 1];
    std::string detail = "median MSE over M=250..2000:";
    for (double v : mse_medians) detail += " " + fmt(v, 3);
    detail += "; median |f^T gamma - f^T beta| over D=1e2..1e4:";
    for (double v : gap_medians) detail += " " + fmt(v, 3);
    return {mse_ok && gap_ok, detail};
}

// ----------------------------------------------------------------------------
// Criterion 9: DP vs MC on the integrator.

Result criterion9() {
    const RunConfig cfg = config(R"(
[problem]
horizon = 5
[dp]
resolution = 100
[mc]
trials = 100000
)");
    const PointMatrix probes = rows({{0.6, 0.6}, {-0.6, 0.6}, {0.6, -0.6}, {-0.6, -0.6}, {0.75, 0.0},
                                     {0.0, -0.75}, {-0.9, 0.3}, {0.3, 0.9}, {0.55, -0.2}, {-0.45, 0.57}});
    const MethodRun dp = run_method(cfg, Method::Dp, probes);
    const MethodRun mc = run_method(cfg, Method::Mc, probes);
    record("dp/probes", cfg, dp.field);
    record("mc/probes", cfg, mc.field);
    const double allowance = 0.02 + hoeffding_radius(cfg.mc_trials);
    const double err = compare_fields(dp.field, mc.field).max_abs;
    return {err <= allowance, "max |DP - MC| " + fmt(err) + " (allowance " + fmt(allowance) + ")"};
}

}  // namespace

int main() {
    // Criterion 7 inspects the fields of every other run, so it goes last;
    // lines are printed in criterion order at the end.
    std::vector<std::pair<Result, double>> results(10);
    const auto timed = [&](int id, const std::function<Result()>& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        Result r;
        try {
            r = fn();
        } catch (const std::exception& e) {
            r = {false, std::string("error: ") + e.what()};
        }
        const double t = seconds_since(t0);
        std::cerr << "criterion " << id << " finished in " << fmt(t, 3) << " s" << std::endl;
        results[static_cast<std::size_t>(id)] = {r, t};
    };

    IntegratorErrors ie;
    std::string integrator_error;
    timed(1, [&] {
        try {
            ie = integrator_validation();
        } catch (const std::exception& e) {
            integrator_error = std::string("error: ") + e.what();
            return Result{false, integrator_error};
        }
        return Result{ie.exact <= 0.12, "exact vs DP max abs " + fmt(ie.exact) + " (limit 0.12, exact path " +
                                            fmt(ie.exact_time, 3) + " s)"};
    });
    timed(2, [&] {
        if (!integrator_error.empty()) return Result{false, integrator_error};
        return Result{ie.rff <= 0.15, "rff vs DP max abs " + fmt(ie.rff) + " (limit 0.15, rff path " +
                                          fmt(ie.rff_time, 3) + " s)"};
    });
    timed(3, [&] {
        if (!integrator_error.empty()) return Result{false, integrator_error};
        return Result{ie.rff >= ie.exact, "rff error " + fmt(ie.rff) + " >= exact error " + fmt(ie.exact) +
                                              " on a shared sample"};
    });
    timed(4, criterion4);
    timed(5, criterion5);
    timed(6, criterion6);
    timed(8, criterion8);
    timed(9, criterion9);
    timed(7, criterion7);

    int failed = 0;
    for (int id = 1; id <= 9; ++id) {
        const auto& [r, t] = results[static_cast<std::size_t>(id)];
        std::cout << (r.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << r.detail << " [" << fmt(t, 3) << " s]"
                  << std::endl;
        if (!r.pass) ++failed;
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " of 9 criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
