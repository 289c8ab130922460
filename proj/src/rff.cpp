#include "kreach/rff.hpp"

#include "kreach/random.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <vector>

namespace kreach {

RffBasis::RffBasis(Eigen::MatrixXd frequencies, Eigen::VectorXd phases, Eigen::VectorXd sigmas,
                   std::uint64_t seed)
    : frequencies_(std::move(frequencies)), phases_(std::move(phases)), sigmas_(std::move(sigmas)), seed_(seed) {
    if (frequencies_.rows() < 1) throw ConfigError("RffBasis: need at least one frequency");
    require_dimension(phases_.size(), frequencies_.rows(), "RffBasis phases");
    require_dimension(sigmas_.size(), frequencies_.cols(), "RffBasis sigmas");
}

bool RffBasis::is_isotropic() const {
    return (sigmas_.array() == sigmas_[0]).all();
}

RffBasis sample_basis(Eigen::Index D, int dim, double sigma, std::uint64_t seed) {
    if (dim < 1) throw ConfigError("sample_basis: dimension must be >= 1");
    return sample_basis(D, Eigen::VectorXd::Constant(dim, sigma), seed);
}

RffBasis sample_basis(Eigen::Index D, const Eigen::VectorXd& sigmas, std::uint64_t seed) {
    if (D < 1) throw ConfigError("sample_basis: D must be >= 1");
    if (sigmas.size() < 1) throw ConfigError("sample_basis: dimension must be >= 1");
    if (!(sigmas.array() > 0.0).all() || !sigmas.allFinite()) throw ConfigError("sample_basis: sigma must be > 0");

    Rng rng = derive_stream(seed, stream::kRffBasis);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

    const Eigen::Index dim = sigmas.size();
    Eigen::MatrixXd freq(D, dim);
    Eigen::VectorXd phases(D);
    for (Eigen::Index i = 0; i < D; ++i) {
        for (Eigen::Index j = 0; j < dim; ++j) freq(i, j) = normal(rng) / sigmas[j];
        phases[i] = phase(rng);
    }
    return RffBasis(std::move(freq), std::move(phases), sigmas, seed);
}

Eigen::VectorXd feature_map(const RffBasis& basis, const Eigen::Ref<const Eigen::VectorXd>& x) {
    require_dimension(x.size(), basis.dimension(), "feature_map");
    Eigen::VectorXd arg = basis.frequencies() * x + basis.phases();
    return std::numbers::sqrt2 * arg.array().cos();
}

Eigen::MatrixXd feature_matrix(const RffBasis& basis, const PointMatrix& points) {
    require_dimension(points.cols(), basis.dimension(), "feature_matrix");
    Eigen::MatrixXd z = points * basis.frequencies().transpose();
    const Eigen::Index D = basis.size();
#pragma omp parallel for schedule(static)
    for (Eigen::Index j = 0; j < D; ++j) {
        const double b = basis.phases()[j];
        z.col(j) = std::numbers::sqrt2 * (z.col(j).array() + b).cos();
    }
    return z;
}

double kernel_estimate(const RffBasis& basis, const Eigen::Ref<const Eigen::VectorXd>& x,
                       const Eigen::Ref<const Eigen::VectorXd>& y) {
    require_dimension(y.size(), x.size(), "kernel_estimate");
    return feature_map(basis, x).dot(feature_map(basis, y)) / static_cast<double>(basis.size());
}

const char* to_string(JointMode mode) {
    return mode == JointMode::Tensor ? "tensor" : "concatenated";
}

JointMode parse_joint_mode(const std::string& text) {
    if (text == "tensor") return JointMode::Tensor;
    if (text == "concatenated" || text == "concat") return JointMode::Concatenated;
    throw ConfigError("unknown RFF joint mode '" + text + "' (expected tensor or concatenated)");
}

// ----------------------------------------------------------------------------

JointFeatureMap::JointFeatureMap(JointMode mode, RffBasis first, RffBasis second, int state_dim, int input_dim)
    : mode_(mode), first_(std::move(first)), second_(std::move(second)), state_dim_(state_dim), input_dim_(input_dim) {}

JointFeatureMap JointFeatureMap::tensor(RffBasis state_basis, RffBasis input_basis) {
    const int n = state_basis.dimension();
    const int m = input_basis.dimension();
    return JointFeatureMap(JointMode::Tensor, std::move(state_basis), std::move(input_basis), n, m);
}

JointFeatureMap JointFeatureMap::concatenated(RffBasis joint_basis, int state_dim) {
    const int m = joint_basis.dimension() - state_dim;
    if (state_dim < 1 || m < 1) {
        throw DimensionError("JointFeatureMap: concatenated basis dimension " +
                             std::to_string(joint_basis.dimension()) + " cannot split into state dim " +
                             std::to_string(state_dim) + " plus a positive input dim");
    }
    RffBasis copy = joint_basis;
    return JointFeatureMap(JointMode::Concatenated, std::move(joint_basis), std::move(copy), state_dim, m);
}

JointFeatureMap JointFeatureMap::sample(JointMode mode, Eigen::Index D, int state_dim, int input_dim,
                                        double sigma_x, double sigma_u, std::uint64_t seed) {
    if (mode == JointMode::Concatenated) {
        Eigen::VectorXd sigmas(state_dim + input_dim);
        sigmas.head(state_dim).setConstant(sigma_x);
        sigmas.tail(input_dim).setConstant(sigma_u);
        return concatenated(sample_basis(D, sigmas, seed), state_dim);
    }
    // Tensor: D is split as D_x = D_u = ceil(sqrt(D)) unless D is a product the
    // caller built directly through tensor().
    const auto side = static_cast<Eigen::Index>(std::ceil(std::sqrt(static_cast<double>(D))));
    return tensor(sample_basis(side, state_dim, sigma_x, derive_seed(seed, 1)),
                  sample_basis(side, input_dim, sigma_u, derive_seed(seed, 2)));
}

Eigen::Index JointFeatureMap::dimension() const noexcept {
    return mode_ == JointMode::Tensor ? first_.size() * second_.size() : first_.size();
}

const RffBasis& JointFeatureMap::input_basis() const {
    if (mode_ != JointMode::Tensor) throw ConfigError("JointFeatureMap: no separate input basis in concatenated mode");
    return second_;
}

Eigen::VectorXd JointFeatureMap::operator()(const Eigen::Ref<const Eigen::VectorXd>& x,
                                            const Eigen::Ref<const Eigen::VectorXd>& u) const {
    require_dimension(x.size(), state_dim_, "joint_feature state");
    require_dimension(u.size(), input_dim_, "joint_feature input");
    if (mode_ == JointMode::Concatenated) {
        Eigen::VectorXd xu(state_dim_ + input_dim_);
        xu << x, u;
        return feature_map(first_, xu);
    }
    const Eigen::VectorXd zx = feature_map(first_, x);
    const Eigen::VectorXd zu = feature_map(second_, u);
    Eigen::VectorXd out(zx.size() * zu.size());
    for (Eigen::Index i = 0; i < zx.size(); ++i) out.segment(i * zu.size(), zu.size()) = zx[i] * zu;
    return out;
}

Eigen::MatrixXd JointFeatureMap::features(const PointMatrix& states, const PointMatrix& inputs) const {
    require_dimension(states.cols(), state_dim_, "joint features state");
    require_dimension(inputs.cols(), input_dim_, "joint features input");
    require_dimension(inputs.rows(), states.rows(), "joint features rows");
    if (mode_ == JointMode::Concatenated) {
        PointMatrix xu(states.rows(), state_dim_ + input_dim_);
        xu << states, inputs;
        return feature_matrix(first_, xu);
    }
    const Eigen::MatrixXd zx = feature_matrix(first_, states);
    const Eigen::MatrixXd zu = feature_matrix(second_, inputs);
    const Eigen::Index du = zu.cols();
    Eigen::MatrixXd out(states.rows(), zx.cols() * du);
    for (Eigen::Index i = 0; i < zx.cols(); ++i) {
        out.middleCols(i * du, du) = zu.array().colwise() * zx.col(i).array();
    }
    return out;
}

Eigen::VectorXd joint_feature(const JointFeatureMap& map, const Eigen::Ref<const Eigen::VectorXd>& x,
                              const Eigen::Ref<const Eigen::VectorXd>& u) {
    return map(x, u);
}

// ----------------------------------------------------------------------------

void write_basis_csv(std::ostream& out, const RffBasis& basis) {
    const auto old_precision = out.precision(17);
    out << "# kernel-reach rff-basis v1; D=" << basis.size() << "; dim=" << basis.dimension()
        << "; sigma=" << basis.sigmas()[0] << "; seed=" << basis.seed();
    if (!basis.is_isotropic()) {
        out << "; sigmas=";
        for (Eigen::Index j = 0; j < basis.sigmas().size(); ++j) out << (j ? " " : "") << basis.sigmas()[j];
    }
    out << '\n';
    for (Eigen::Index i = 0; i < basis.size(); ++i) {
        for (Eigen::Index j = 0; j < basis.dimension(); ++j) out << basis.frequencies()(i, j) << ',';
        out << basis.phases()[i] << '\n';
    }
    out.precision(old_precision);
}

RffBasis read_basis_csv(std::istream& in) {
    std::string header;
    if (!std::getline(in, header) || header.rfind("# kernel-reach rff-basis v1", 0) != 0) {
        throw ConfigError("basis file: missing '# kernel-reach rff-basis v1' header");
    }
    long D = -1, dim = -1;
    double sigma = -1.0;
    std::uint64_t seed = 0;
    std::vector<double> sigmas;
    std::istringstream hs(header);
    std::string part;
    while (std::getline(hs, part, ';')) {
        const auto eq = part.find('=');
        if (eq == std::string::npos) continue;
        std::string key = part.substr(0, eq);
        key.erase(0, key.find_first_not_of(' '));
        const std::string value = part.substr(eq + 1);
        try {
            if (key == "D") D = std::stol(value);
            else if (key == "dim") dim = std::stol(value);
            else if (key == "sigma") sigma = std::stod(value);
            else if (key == "seed") seed = std::stoull(value);
            else if (key == "sigmas") {
                std::istringstream vs(value);
                double s = 0.0;
                while (vs >> s) sigmas.push_back(s);
            }
        } catch (const std::exception&) {
            throw ConfigError("basis file: bad header value for '" + key + "'");
        }
    }
    if (D < 1 || dim < 1 || !(sigma > 0.0)) throw ConfigError("basis file: header must declare D, dim, sigma");
    Eigen::VectorXd sig = Eigen::VectorXd::Constant(dim, sigma);
    if (!sigmas.empty()) {
        require_dimension(static_cast<Eigen::Index>(sigmas.size()), dim, "basis file sigmas");
        sig = Eigen::Map<Eigen::VectorXd>(sigmas.data(), dim);
    }
    Eigen::MatrixXd freq(D, dim);
    Eigen::VectorXd phases(D);
    std::string line;
    long row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (row >= D) throw ConfigError("basis file: more rows than declared D");
        std::istringstream ss(line);
        std::string cell;
        long col = 0;
        while (std::getline(ss, cell, ',')) {
            if (col > dim) throw ConfigError("basis file: too many columns");
            const double v = std::stod(cell);
            if (col < dim) freq(row, col) = v;
            else phases[row] = v;
            ++col;
        }
        if (col != dim + 1) throw ConfigError("basis file: wrong column count at row " + std::to_string(row));
        ++row;
    }
    if (row != D) throw ConfigError("basis file: row count does not match D");
    return RffBasis(std::move(freq), std::move(phases), std::move(sig), seed);
}

}  // namespace kreach
