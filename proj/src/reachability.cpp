#include "kreach/reachability.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace kreach {

namespace {

// Indices of rows labelled SafeNotTarget, plus the fixed layer value of every
// other row (1 in T, 0 outside K).
struct Partition {
    std::vector<Eigen::Index> active;
    ValueVector fixed;
};

Partition partition(const SafetyProblem& problem, const PointMatrix& points) {
    Partition p;
    p.fixed = ValueVector::Zero(points.rows());
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        switch (problem.label(points.row(i).transpose())) {
            case HitLabel::Target: p.fixed[i] = 1.0; break;
            case HitLabel::SafeNotTarget: p.active.push_back(i); break;
            case HitLabel::Unsafe: break;
        }
    }
    return p;
}

PointMatrix select_rows(const PointMatrix& points, const std::vector<Eigen::Index>& rows) {
    PointMatrix out(static_cast<Eigen::Index>(rows.size()), points.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = points.row(rows[i]);
    return out;
}

// Lazily prepared queries for one set of points at one policy step.
class StepQueries {
public:
    StepQueries(const ConditionalEmbedding& embedding, const SafetyProblem& problem, PointMatrix states,
                std::size_t cache_bytes)
        : embedding_(embedding), problem_(problem), states_(std::move(states)), cache_bytes_(cache_bytes) {}

    Eigen::VectorXd expectations(const ValueVector& y, int step) {
        if (states_.rows() == 0) return {};
        const bool stationary = problem_.policy().is_stationary();
        if (!batch_ || (!stationary && step != prepared_step_)) {
            batch_ = embedding_.prepare_queries(states_, problem_.policy().apply(step, states_),
                                                stationary ? cache_bytes_ : 0);
            prepared_step_ = step;
        }
        return batch_->expectations(y);
    }

private:
    const ConditionalEmbedding& embedding_;
    const SafetyProblem& problem_;
    PointMatrix states_;
    std::size_t cache_bytes_;
    std::unique_ptr<QueryBatch> batch_;
    int prepared_step_ = -1;
};

void finish_layer(ValueVector& layer, const Partition& part, const Eigen::VectorXd& raw, bool clamp) {
    layer = part.fixed;
    for (std::size_t i = 0; i < part.active.size(); ++i) {
        double v = raw[static_cast<Eigen::Index>(i)];
        if (clamp) v = std::clamp(v, 0.0, 1.0);
        layer[part.active[i]] = v;
    }
}

}  // namespace

SafetyField backward_recursion(const SafetyProblem& problem, const ConditionalEmbedding& embedding,
                               const PointMatrix& eval_points, const RecursionOptions& options) {
    const TransitionSample& sample = embedding.sample();
    require_dimension(sample.state_dimension(), problem.state_dimension(), "backward_recursion sample");
    require_dimension(sample.input_dimension(), problem.policy().input_dimension(), "backward_recursion policy");
    require_dimension(eval_points.cols(), problem.state_dimension(), "backward_recursion evaluation points");

    const int horizon = problem.horizon();
    const Partition succ = partition(problem, sample.successors());
    const Partition eval = partition(problem, eval_points);

    SafetyField field;
    field.points = eval_points;
    field.layers.assign(static_cast<std::size_t>(horizon) + 1, ValueVector{});
    field.layers.back() = eval.fixed;

    // Split the cache budget between the two query sets.
    const std::size_t half_budget = options.cache_bytes / 2;
    StepQueries succ_queries(embedding, problem, select_rows(sample.successors(), succ.active), half_budget);
    StepQueries eval_queries(embedding, problem, select_rows(eval_points, eval.active), half_budget);

    ValueVector y = succ.fixed;  // V_N at the successors
    for (int k = horizon - 1; k >= 0; --k) {
        finish_layer(field.layers[static_cast<std::size_t>(k)], eval, eval_queries.expectations(y, k), options.clamp);
        // V_k at the successors only feeds step k - 1.
        if (k > 0) {
            ValueVector next;
            finish_layer(next, succ, succ_queries.expectations(y, k), options.clamp);
            y = std::move(next);
        }
    }

    auto& meta = field.meta;
    meta["method"] = embedding.method();
    meta["horizon"] = horizon;
    meta["M"] = sample.size();
    meta["lambda"] = embedding.lambda();
    meta["clamp"] = options.clamp;
    meta["policy"] = problem.policy().name();
    if (const auto* exact = dynamic_cast<const ExactEmbedding*>(&embedding)) {
        meta["sigma_x"] = exact->kernel().state.sigma();
        meta["sigma_u"] = exact->kernel().input.sigma();
    } else if (const auto* rff = dynamic_cast<const RffEmbedding*>(&embedding)) {
        meta["D"] = rff->feature_dimension();
        meta["rff_mode"] = to_string(rff->feature_map().mode());
        meta["solve_route"] = to_string(rff->route());
        meta["rff_seed"] = rff->feature_map().primary_basis().seed();
    }
    meta["sample_seed"] = sample.metadata().seed;
    meta["system"] = sample.metadata().system;
    return field;
}

double safety_probability(const SafetyField& field, Eigen::Index index) {
    if (field.layers.empty()) throw ConfigError("safety_probability: empty field");
    if (index < 0 || index >= field.layers.front().size()) {
        throw std::out_of_range("safety_probability: index " + std::to_string(index) + " out of range");
    }
    return field.layers.front()[index];
}

PointMatrix grid_points(const HyperRectangle& region, const std::vector<int>& resolution,
                        const std::vector<std::optional<double>>& fixed) {
    const auto dim = static_cast<std::size_t>(region.dimension());
    if (resolution.size() != dim) throw DimensionError("grid_points: resolution must list every axis");
    if (!fixed.empty() && fixed.size() != dim) throw DimensionError("grid_points: fixed must list every axis");

    std::vector<std::vector<double>> ticks(dim);
    Eigen::Index count = 1;
    for (std::size_t a = 0; a < dim; ++a) {
        if (!fixed.empty() && fixed[a].has_value()) {
            ticks[a] = {*fixed[a]};
            continue;
        }
        const auto& axis = region.axis(static_cast<int>(a));
        if (!axis.is_bounded()) {
            throw ConfigError("grid_points: axis " + std::to_string(a) + " is unbounded and has no fixed slice value");
        }
        if (resolution[a] < 2) throw ConfigError("grid_points: resolution must be >= 2 on every free axis");
        ticks[a].resize(static_cast<std::size_t>(resolution[a]));
        for (int i = 0; i < resolution[a]; ++i) {
            ticks[a][static_cast<std::size_t>(i)] =
                axis.lower + (axis.upper - axis.lower) * static_cast<double>(i) / (resolution[a] - 1);
        }
        count *= resolution[a];
    }

    PointMatrix out(count, static_cast<Eigen::Index>(dim));
    std::vector<std::size_t> idx(dim, 0);
    for (Eigen::Index r = 0; r < count; ++r) {
        for (std::size_t a = 0; a < dim; ++a) out(r, static_cast<Eigen::Index>(a)) = ticks[a][idx[a]];
        for (std::size_t a = dim; a-- > 0;) {
            if (++idx[a] < ticks[a].size()) break;
            idx[a] = 0;
        }
    }
    return out;
}

// ----------------------------------------------------------------------------

nlohmann::ordered_json to_json(const SafetyField& field) {
    nlohmann::ordered_json j;
    j["meta"] = field.meta;
    auto& pts = j["points"] = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < field.points.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(field.points.cols()));
        for (Eigen::Index c = 0; c < field.points.cols(); ++c) row[static_cast<std::size_t>(c)] = field.points(i, c);
        pts.push_back(row);
    }
    auto& layers = j["layers"] = nlohmann::ordered_json::array();
    for (const auto& layer : field.layers) {
        layers.push_back(std::vector<double>(layer.data(), layer.data() + layer.size()));
    }
    return j;
}

SafetyField safety_field_from_json(const nlohmann::ordered_json& j) {
    SafetyField field;
    field.meta = j.at("meta");
    const auto& pts = j.at("points");
    const auto n = pts.empty() ? 0 : pts.front().size();
    field.points.resize(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].size() != n) throw ConfigError("field json: ragged points array");
        for (std::size_t c = 0; c < n; ++c) {
            field.points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = pts[i][c].get<double>();
        }
    }
    for (const auto& layer : j.at("layers")) {
        const auto values = layer.get<std::vector<double>>();
        if (values.size() != pts.size()) throw ConfigError("field json: layer length does not match point count");
        field.layers.emplace_back(Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
    }
    return field;
}

void write_field_json(const std::string& path, const SafetyField& field) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    out << to_json(field).dump() << '\n';
}

void write_field_csv(std::ostream& out, const SafetyField& field) {
    for (Eigen::Index c = 0; c < field.points.cols(); ++c) out << 'x' << (c + 1) << ',';
    out << "V0\n";
    const auto old_precision = out.precision(17);
    for (Eigen::Index i = 0; i < field.points.rows(); ++i) {
        for (Eigen::Index c = 0; c < field.points.cols(); ++c) out << field.points(i, c) << ',';
        out << field.layers.front()[i] << '\n';
    }
    out.precision(old_precision);
}

void write_field_csv(const std::string& path, const SafetyField& field) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    write_field_csv(out, field);
}

FieldError compare_fields(const SafetyField& estimate, const SafetyField& reference) {
    if (estimate.layers.empty() || reference.layers.empty()) throw ConfigError("compare_fields: empty field");
    require_dimension(reference.size(), estimate.size(), "compare_fields point count");
    require_dimension(reference.points.cols(), estimate.points.cols(), "compare_fields point dimension");
    if (estimate.size() > 0 && (estimate.points - reference.points).cwiseAbs().maxCoeff() > 1e-12) {
        throw ConfigError("compare_fields: fields are evaluated on different points");
    }
    FieldError err;
    err.per_point = (estimate.layers.front() - reference.layers.front()).cwiseAbs();
    if (err.per_point.size() > 0) {
        err.max_abs = err.per_point.maxCoeff();
        err.mean_abs = err.per_point.mean();
    }
    return err;
}

void write_error_csv(const std::string& path, const SafetyField& estimate, const FieldError& error) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    for (Eigen::Index c = 0; c < estimate.points.cols(); ++c) out << 'x' << (c + 1) << ',';
    out << "abs_error\n";
    out.precision(17);
    for (Eigen::Index i = 0; i < estimate.points.rows(); ++i) {
        for (Eigen::Index c = 0; c < estimate.points.cols(); ++c) out << estimate.points(i, c) << ',';
        out << error.per_point[i] << '\n';
    }
}

}  // namespace kreach
