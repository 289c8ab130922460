#include "kreach/core.hpp"

#include "kreach/random.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace kreach {

void require_dimension(Eigen::Index actual, Eigen::Index expected, const char* what) {
    if (actual != expected) {
        std::ostringstream msg;
        msg << what << ": dimension " << actual << " does not match expected " << expected;
        throw DimensionError(msg.str());
    }
}

void require_finite(const Eigen::Ref<const Eigen::VectorXd>& v, const char* what) {
    if (!v.allFinite()) {
        throw ConfigError(std::string(what) + ": non-finite entry");
    }
}

// ----------------------------------------------------------------------------

bool AxisInterval::subset_of(const AxisInterval& other) const noexcept {
    bool lower_ok = false;
    if (lower > other.lower) {
        lower_ok = true;
    } else if (lower == other.lower) {
        lower_ok = other.lower_closed || !lower_closed || std::isinf(lower);
    }
    bool upper_ok = false;
    if (upper < other.upper) {
        upper_ok = true;
    } else if (upper == other.upper) {
        upper_ok = other.upper_closed || !upper_closed || std::isinf(upper);
    }
    return lower_ok && upper_ok;
}

HyperRectangle::HyperRectangle(std::vector<AxisInterval> axes) : axes_(std::move(axes)) {
    for (const auto& a : axes_) {
        if (std::isnan(a.lower) || std::isnan(a.upper) || a.lower > a.upper) {
            throw ConfigError("HyperRectangle: lower bound exceeds upper bound");
        }
    }
}

HyperRectangle HyperRectangle::box(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
    require_dimension(upper.size(), lower.size(), "HyperRectangle::box");
    std::vector<AxisInterval> axes;
    axes.reserve(static_cast<std::size_t>(lower.size()));
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
        axes.push_back(AxisInterval::closed(lower[i], upper[i]));
    }
    return HyperRectangle(std::move(axes));
}

HyperRectangle HyperRectangle::cube(int dim, double lo, double hi) {
    return HyperRectangle(std::vector<AxisInterval>(static_cast<std::size_t>(dim), AxisInterval::closed(lo, hi)));
}

bool HyperRectangle::contains(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    require_dimension(x.size(), dimension(), "HyperRectangle::contains");
    for (std::size_t i = 0; i < axes_.size(); ++i) {
        if (!axes_[i].contains(x[static_cast<Eigen::Index>(i)])) return false;
    }
    return true;
}

bool HyperRectangle::subset_of(const HyperRectangle& other) const {
    require_dimension(other.dimension(), dimension(), "HyperRectangle::subset_of");
    for (std::size_t i = 0; i < axes_.size(); ++i) {
        if (!axes_[i].subset_of(other.axes_[i])) return false;
    }
    return true;
}

HyperRectangle HyperRectangle::translated(int axis, double offset) const {
    auto axes = axes_;
    auto& a = axes.at(static_cast<std::size_t>(axis));
    a.lower += offset;
    a.upper += offset;
    return HyperRectangle(std::move(axes));
}

ProductSet::ProductSet(std::vector<HyperRectangle> blocks) : blocks_(std::move(blocks)) {
    if (blocks_.empty()) throw ConfigError("ProductSet: no blocks");
    for (const auto& b : blocks_) dimension_ += b.dimension();
}

bool ProductSet::contains(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    require_dimension(x.size(), dimension_, "ProductSet::contains");
    Eigen::Index offset = 0;
    for (const auto& b : blocks_) {
        if (!b.contains(x.segment(offset, b.dimension()))) return false;
        offset += b.dimension();
    }
    return true;
}

int SetPredicate::dimension() const {
    return std::visit([](const auto& s) { return s.dimension(); }, set_);
}

bool SetPredicate::contains(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return std::visit([&](const auto& s) { return s.contains(x); }, set_);
}

int indicator(const SetPredicate& set, const Eigen::Ref<const Eigen::VectorXd>& x) {
    return set.contains(x) ? 1 : 0;
}

// ----------------------------------------------------------------------------

MarkovPolicy::MarkovPolicy(std::string name, int input_dim, std::vector<Map> maps)
    : name_(std::move(name)), input_dim_(input_dim), maps_(std::move(maps)) {
    if (maps_.empty()) throw ConfigError("MarkovPolicy: no maps");
    if (input_dim_ < 1) throw ConfigError("MarkovPolicy: input dimension must be >= 1");
}

MarkovPolicy MarkovPolicy::stationary(std::string name, int input_dim, Map map) {
    return MarkovPolicy(std::move(name), input_dim, std::vector<Map>{std::move(map)});
}

MarkovPolicy MarkovPolicy::time_varying(std::string name, int input_dim, std::vector<Map> maps) {
    return MarkovPolicy(std::move(name), input_dim, std::move(maps));
}

MarkovPolicy MarkovPolicy::zero(int input_dim) {
    return stationary("zero", input_dim,
                      [input_dim](const StateVector&) { return InputVector::Zero(input_dim); });
}

InputVector MarkovPolicy::operator()(int step, const StateVector& x) const {
    const auto& map = maps_.size() == 1 ? maps_.front()
                                        : maps_.at(static_cast<std::size_t>(step));
    InputVector u = map(x);
    require_dimension(u.size(), input_dim_, "MarkovPolicy output");
    return u;
}

Eigen::MatrixXd MarkovPolicy::apply(int step, const PointMatrix& states) const {
    Eigen::MatrixXd inputs(states.rows(), input_dim_);
    for (Eigen::Index i = 0; i < states.rows(); ++i) {
        inputs.row(i) = (*this)(step, states.row(i).transpose()).transpose();
    }
    return inputs;
}

// ----------------------------------------------------------------------------

TransitionSample::TransitionSample(PointMatrix states, PointMatrix inputs, PointMatrix successors,
                                   SampleMetadata meta)
    : states_(std::move(states)),
      inputs_(std::move(inputs)),
      successors_(std::move(successors)),
      meta_(std::move(meta)) {
    if (states_.rows() < 1) throw ConfigError("TransitionSample: need at least one transition");
    require_dimension(inputs_.rows(), states_.rows(), "TransitionSample inputs rows");
    require_dimension(successors_.rows(), states_.rows(), "TransitionSample successors rows");
    require_dimension(successors_.cols(), states_.cols(), "TransitionSample successor dimension");
    if (!states_.allFinite() || !inputs_.allFinite() || !successors_.allFinite()) {
        throw ConfigError("TransitionSample: non-finite entry");
    }
}

namespace {

void write_row(std::ostream& out, const Eigen::Ref<const Eigen::RowVectorXd>& x, bool& first) {
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        if (!first) out << ',';
        out << x[j];
        first = false;
    }
}

// Parses "; key=value" pairs following the leading tag.
std::vector<std::pair<std::string, std::string>> parse_header_fields(const std::string& line) {
    std::vector<std::pair<std::string, std::string>> fields;
    std::istringstream ss(line);
    std::string part;
    bool first = true;
    while (std::getline(ss, part, ';')) {
        if (first) {
            first = false;
            continue;
        }
        const auto eq = part.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        fields.emplace_back(trim(part.substr(0, eq)), trim(part.substr(eq + 1)));
    }
    return fields;
}

}  // namespace

void write_sample_csv(std::ostream& out, const TransitionSample& sample) {
    const auto& meta = sample.metadata();
    out << "# kernel-reach sample v1; n=" << sample.state_dimension()
        << "; m=" << sample.input_dimension() << "; M=" << sample.size()
        << "; seed=" << meta.seed << "; system=" << (meta.system.empty() ? "unknown" : meta.system);
    if (!meta.disturbance.empty()) out << "; disturbance=" << meta.disturbance;
    if (!meta.policy.empty()) out << "; policy=" << meta.policy;
    out << '\n';
    const auto old_precision = out.precision(17);
    for (Eigen::Index i = 0; i < sample.size(); ++i) {
        bool first = true;
        write_row(out, sample.states().row(i), first);
        write_row(out, sample.inputs().row(i), first);
        write_row(out, sample.successors().row(i), first);
        out << '\n';
    }
    out.precision(old_precision);
}

void write_sample_csv(const std::string& path, const TransitionSample& sample) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    write_sample_csv(out, sample);
    if (!out) throw ConfigError("failed writing '" + path + "'");
}

TransitionSample read_sample_csv(std::istream& in) {
    std::string header;
    if (!std::getline(in, header) || header.rfind("# kernel-reach sample v1", 0) != 0) {
        throw ConfigError("sample file: missing '# kernel-reach sample v1' header");
    }
    long n = -1, m = -1, count = -1;
    SampleMetadata meta;
    for (const auto& [key, value] : parse_header_fields(header)) {
        try {
            if (key == "n") n = std::stol(value);
            else if (key == "m") m = std::stol(value);
            else if (key == "M") count = std::stol(value);
            else if (key == "seed") meta.seed = std::stoull(value);
            else if (key == "system") meta.system = value;
            else if (key == "disturbance") meta.disturbance = value;
            else if (key == "policy") meta.policy = value;
        } catch (const std::exception&) {
            throw ConfigError("sample file: bad header value for '" + key + "'");
        }
    }
    if (n < 1 || m < 1 || count < 1) throw ConfigError("sample file: header must declare n, m, M >= 1");

    const long width = 2 * n + m;
    PointMatrix xs(count, n), us(count, m), ys(count, n);
    std::string line;
    long row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (row >= count) throw ConfigError("sample file: more rows than declared M");
        std::istringstream ss(line);
        std::string cell;
        long col = 0;
        while (std::getline(ss, cell, ',')) {
            if (col >= width) throw ConfigError("sample file: too many columns at row " + std::to_string(row));
            double v = 0.0;
            try {
                v = std::stod(cell);
            } catch (const std::exception&) {
                throw ConfigError("sample file: bad number '" + cell + "' at row " + std::to_string(row));
            }
            if (col < n) xs(row, col) = v;
            else if (col < n + m) us(row, col - n) = v;
            else ys(row, col - n - m) = v;
            ++col;
        }
        if (col != width) {
            throw ConfigError("sample file: row " + std::to_string(row) + " has " + std::to_string(col) +
                              " columns, expected " + std::to_string(width));
        }
        ++row;
    }
    if (row != count) {
        throw ConfigError("sample file: header declares M=" + std::to_string(count) + " but found " +
                          std::to_string(row) + " rows");
    }
    return TransitionSample(std::move(xs), std::move(us), std::move(ys), std::move(meta));
}

TransitionSample read_sample_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open sample file '" + path + "'");
    return read_sample_csv(in);
}

// ----------------------------------------------------------------------------

namespace {

// Exact T-inside-K check where the structure allows it. Returns false when
// the pair is not decidable here.
bool exact_subset_check(const SetPredicate& target, const SetPredicate& safe, bool& is_subset) {
    if (const auto* t = target.rectangle()) {
        if (const auto* k = safe.rectangle()) {
            is_subset = t->subset_of(*k);
            return true;
        }
    }
    const auto* tp = target.product();
    const auto* kp = safe.product();
    if (tp != nullptr && kp != nullptr && tp->blocks().size() == kp->blocks().size()) {
        for (std::size_t i = 0; i < tp->blocks().size(); ++i) {
            if (tp->blocks()[i].dimension() != kp->blocks()[i].dimension()) return false;
        }
        is_subset = true;
        for (std::size_t i = 0; i < tp->blocks().size(); ++i) {
            if (!tp->blocks()[i].subset_of(kp->blocks()[i])) {
                is_subset = false;
                break;
            }
        }
        return true;
    }
    return false;
}

}  // namespace

SafetyProblem::SafetyProblem(int horizon, SetPredicate safe, SetPredicate target, MarkovPolicy policy)
    : horizon_(horizon), safe_(std::move(safe)), target_(std::move(target)), policy_(std::move(policy)) {
    if (horizon_ < 0) throw ConfigError("SafetyProblem: horizon must be >= 0");
    require_dimension(target_.dimension(), safe_.dimension(), "SafetyProblem target set");
    if (!policy_.is_stationary() && policy_.defined_steps() < horizon_) {
        throw ConfigError("SafetyProblem: time-varying policy shorter than horizon");
    }
    bool is_subset = true;
    if (exact_subset_check(target_, safe_, is_subset) && !is_subset) {
        throw ConfigError("SafetyProblem: target set is not contained in the safe set");
    }
}

HitLabel SafetyProblem::label(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (target_.contains(x)) return HitLabel::Target;
    if (safe_.contains(x)) return HitLabel::SafeNotTarget;
    return HitLabel::Unsafe;
}

void SafetyProblem::spot_check_subset(const HyperRectangle& box, int count, std::uint64_t seed) const {
    require_dimension(box.dimension(), state_dimension(), "spot_check_subset box");
    Rng rng = derive_stream(seed, stream::kSubsetCheck);
    StateVector x(box.dimension());
    for (int trial = 0; trial < count; ++trial) {
        for (int i = 0; i < box.dimension(); ++i) {
            const auto& a = box.axis(i);
            if (!a.is_bounded()) throw ConfigError("spot_check_subset: box must be bounded");
            x[i] = std::uniform_real_distribution<double>(a.lower, a.upper)(rng);
        }
        if (target_.contains(x) && !safe_.contains(x)) {
            throw ConfigError("SafetyProblem: sampled point lies in the target set but not the safe set");
        }
    }
}

HitLabel first_hit_label(const SafetyProblem& problem, const Eigen::Ref<const Eigen::VectorXd>& x) {
    return problem.label(x);
}

const char* to_string(HitLabel label) {
    switch (label) {
        case HitLabel::Target: return "Target";
        case HitLabel::SafeNotTarget: return "SafeNotTarget";
        case HitLabel::Unsafe: return "Unsafe";
    }
    return "?";
}

}  // namespace kreach
