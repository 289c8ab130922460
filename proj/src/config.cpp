#include "kreach/config.hpp"

#include "kreach/random.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace kreach {

// ----------------------------------------------------------------------------
// Text format

namespace {

class ValueParser {
public:
    ValueParser(const std::string& text, int line) : text_(text), line_(line) {}

    nlohmann::json parse() {
        nlohmann::json v = value();
        skip_space();
        if (pos_ != text_.size()) fail("trailing characters after value");
        return v;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("config line " + std::to_string(line_) + ": " + what);
    }

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])) != 0) ++pos_;
    }

    nlohmann::json value() {
        skip_space();
        if (pos_ >= text_.size()) fail("missing value");
        const char c = text_[pos_];
        if (c == '"') return string();
        if (c == '[') return array();
        if (text_.compare(pos_, 4, "true") == 0) {
            pos_ += 4;
            return true;
        }
        if (text_.compare(pos_, 5, "false") == 0) {
            pos_ += 5;
            return false;
        }
        return number();
    }

    nlohmann::json string() {
        ++pos_;
        std::string out;
        while (pos_ < text_.size() && text_[pos_] != '"') {
            char c = text_[pos_++];
            if (c == '\\') {
                if (pos_ >= text_.size()) fail("unterminated escape");
                const char e = text_[pos_++];
                switch (e) {
                    case 'n': c = '\n'; break;
                    case 't': c = '\t'; break;
                    case '"': c = '"'; break;
                    case '\\': c = '\\'; break;
                    default: fail(std::string("unknown escape \\") + e);
                }
            }
            out.push_back(c);
        }
        if (pos_ >= text_.size()) fail("unterminated string");
        ++pos_;
        return out;
    }

    nlohmann::json array() {
        ++pos_;
        nlohmann::json out = nlohmann::json::array();
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == ']') {
            ++pos_;
            return out;
        }
        while (true) {
            out.push_back(value());
            skip_space();
            if (pos_ >= text_.size()) fail("unterminated array");
            if (text_[pos_] == ',') {
                ++pos_;
                skip_space();
                if (pos_ < text_.size() && text_[pos_] == ']') {
                    ++pos_;
                    return out;
                }
                continue;
            }
            if (text_[pos_] == ']') {
                ++pos_;
                return out;
            }
            fail("expected ',' or ']' in array");
        }
    }

    nlohmann::json number() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != ']' &&
               std::isspace(static_cast<unsigned char>(text_[pos_])) == 0) {
            ++pos_;
        }
        std::string token = text_.substr(start, pos_ - start);
        std::erase(token, '_');
        if (token.empty()) fail("missing value");
        const bool integral = token.find_first_of(".eEinfa") == std::string::npos;
        try {
            std::size_t used = 0;
            if (integral) {
                if (token.front() == '-') {
                    const long long v = std::stoll(token, &used);
                    if (used == token.size()) return v;
                } else {
                    const unsigned long long v = std::stoull(token, &used);
                    if (used == token.size()) return v;
                }
            } else {
                const double v = std::stod(token, &used);
                if (used == token.size()) return v;
            }
        } catch (const std::exception&) {
        }
        fail("cannot parse value '" + token + "' (strings need double quotes)");
    }

    const std::string& text_;
    std::size_t pos_ = 0;
    int line_;
};

std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

int bracket_balance(const std::string& s) {
    int depth = 0;
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) quoted = !quoted;
        if (quoted) continue;
        if (s[i] == '[') ++depth;
        if (s[i] == ']') --depth;
    }
    return depth;
}

}  // namespace

nlohmann::json parse_config_text(std::istream& in) {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* section = &root;
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("config line " + std::to_string(line_no) + ": bad section header");
            const std::string name = trim(line.substr(1, line.size() - 2));
            if (name.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty section name");
            section = &root;
            std::stringstream parts(name);
            std::string part;
            while (std::getline(parts, part, '.')) {
                part = trim(part);
                auto& next = (*section)[part];
                if (next.is_null()) next = nlohmann::json::object();
                if (!next.is_object()) {
                    throw ConfigError("config line " + std::to_string(line_no) + ": '" + part + "' is not a section");
                }
                section = &next;
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        const int start_line = line_no;
        while (bracket_balance(value) > 0 && std::getline(in, raw)) {
            ++line_no;
            value += ' ' + trim(strip_comment(raw));
        }
        if (key.empty()) throw ConfigError("config line " + std::to_string(start_line) + ": empty key");
        if (section->contains(key)) {
            throw ConfigError("config line " + std::to_string(start_line) + ": duplicate key '" + key + "'");
        }
        (*section)[key] = ValueParser(value, start_line).parse();
    }
    return root;
}

nlohmann::json parse_config_text(const std::string& text) {
    std::istringstream in(text);
    return parse_config_text(in);
}

nlohmann::json parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config_text(in);
}

// ----------------------------------------------------------------------------
// RunConfig

const char* to_string(Method method) {
    switch (method) {
        case Method::Exact: return "exact";
        case Method::Rff: return "rff";
        case Method::Dp: return "dp";
        case Method::Mc: return "mc";
    }
    return "?";
}

Method parse_method(const std::string& text) {
    if (text == "exact") return Method::Exact;
    if (text == "rff") return Method::Rff;
    if (text == "dp") return Method::Dp;
    if (text == "mc") return Method::Mc;
    throw ConfigError("unknown method '" + text + "' (expected exact, rff, dp or mc)");
}

namespace {

// Typed reads from one section, rejecting unknown keys.
class Section {
public:
    Section(const nlohmann::json& root, std::string name) : name_(std::move(name)) {
        if (name_.empty()) {
            node_ = &root;
        } else if (root.contains(name_)) {
            node_ = &root.at(name_);
            if (!node_->is_object()) throw ConfigError("'" + name_ + "' must be a section");
        }
    }

    template <typename T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        if (node_ == nullptr || !node_->contains(key)) return;
        const auto& v = node_->at(key);
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw ConfigError("");
                out = v.get<double>();
            } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
                if (!v.is_number_integer()) throw ConfigError("");
                out = v.get<T>();
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError("");
                out = v.get<bool>();
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ConfigError("");
                out = v.get<std::string>();
            } else {
                out = v.get<T>();
            }
        } catch (const std::exception&) {
            throw ConfigError("config key '" + where(key) + "' has the wrong type: " + v.dump());
        }
    }

    [[nodiscard]] bool has(const char* key) const { return node_ != nullptr && node_->contains(key); }
    void mark(const char* key) { seen_.insert(key); }

    void finish() const {
        if (node_ == nullptr) return;
        for (const auto& [key, value] : node_->items()) {
            if (seen_.count(key) != 0) continue;
            if (name_.empty() && value.is_object()) continue;
            throw ConfigError("unknown config key '" + where(key.c_str()) + "'");
        }
    }

private:
    [[nodiscard]] std::string where(const char* key) const { return name_.empty() ? key : name_ + "." + key; }

    std::string name_;
    const nlohmann::json* node_ = nullptr;
    std::set<std::string> seen_;
};

bool is_quadrotor(const SystemConfig& s) {
    return s.name == "quadrotor" || s.name == "repeated_quadrotor";
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

PointMatrix to_points(const std::vector<std::vector<double>>& rows, int dim, const char* what) {
    PointMatrix out(static_cast<Eigen::Index>(rows.size()), dim);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require_dimension(static_cast<Eigen::Index>(rows[i].size()), dim, what);
        for (int c = 0; c < dim; ++c) out(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
    }
    return out;
}

// Repeats a per-copy vector across all copies, shifting axis 0 by spacing.
std::vector<double> tile(const std::vector<double>& base, int copies, double spacing, bool shift) {
    std::vector<double> out;
    out.reserve(base.size() * static_cast<std::size_t>(copies));
    for (int c = 0; c < copies; ++c) {
        for (std::size_t i = 0; i < base.size(); ++i) out.push_back(base[i] + (shift && i == 0 ? spacing * c : 0.0));
    }
    return out;
}

void fill_defaults(RunConfig& cfg, bool scale_given) {
    const bool quad = is_quadrotor(cfg.system);
    const int copies = cfg.system.name == "repeated_quadrotor" ? cfg.system.copies : 1;
    auto& d = cfg.disturbance;
    if (!scale_given) {
        if (quad) d.scale = 1.0;
        else d.scale = d.kind == "exponential" ? 0.01 : 0.1;
    }
    if (d.kind == "gaussian" && d.variance.empty()) {
        d.variance = quad ? std::vector<double>{1e-3, 1e-5, 1e-3, 1e-5, 1e-3, 1e-5} : std::vector<double>{0.01, 0.01};
    }
    if (d.kind == "gaussian" && copies > 1 && d.variance.size() == 6) d.variance = tile(d.variance, copies, 0, false);

    if (cfg.policy.empty()) cfg.policy = quad ? "hover_lqr" : "zero";

    auto& s = cfg.sampling;
    if (s.initial.empty()) s.initial = quad ? "gaussian" : "uniform";
    if (s.initial == "uniform" && s.lower.empty() && s.upper.empty() && !quad) {
        s.lower = {-1.0, -1.0};
        s.upper = {1.0, 1.0};
    }
    if (s.initial == "gaussian") {
        if (s.center.empty() && quad) s.center = {0, 0, 1, 0, 0, 0};
        if (s.variance.empty()) s.variance = std::vector<double>(s.center.size(), 0.25);
        if (copies > 1 && s.center.size() == 6) s.center = tile(s.center, copies, cfg.system.spacing, true);
        if (copies > 1 && s.variance.size() == 6) s.variance = tile(s.variance, copies, 0, false);
    }

    auto& g = cfg.grid;
    if (g.points.empty() && g.lower.empty() && g.upper.empty() && g.resolution.empty()) {
        if (cfg.system.name == "integrator") {
            g.lower = {-1.0, -1.0};
            g.upper = {1.0, 1.0};
            g.resolution = {100, 100};
        } else if (cfg.system.name == "quadrotor") {
            g.lower = {-1, 0, 0, 0, 0, 0};
            g.upper = {1, 0, 1, 0, 0, 0};
            g.resolution = {41, 1, 41, 1, 1, 1};
        } else {
            g.points = {tile({0, 0, 0.5, 0, 0, 0}, copies, cfg.system.spacing, true)};
        }
    }
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config root must be a table");
    RunConfig cfg;
    cfg.source = j;

    Section top(j, "");
    top.read("seed", cfg.seed);
    top.mark("method");
    if (top.has("method")) {
        const auto& m = j.at("method");
        cfg.methods.clear();
        if (m.is_string()) {
            cfg.methods.push_back(parse_method(m.get<std::string>()));
        } else if (m.is_array() && !m.empty()) {
            for (const auto& e : m) {
                if (!e.is_string()) throw ConfigError("'method' entries must be strings");
                cfg.methods.push_back(parse_method(e.get<std::string>()));
            }
        } else {
            throw ConfigError("'method' must be a string or a non-empty array of strings");
        }
    }
    top.finish();

    Section sys(j, "system");
    sys.read("name", cfg.system.name);
    sys.read("dt", cfg.system.dt);
    sys.read("copies", cfg.system.copies);
    sys.read("spacing", cfg.system.spacing);
    sys.read("inertia", cfg.system.quad.inertia);
    sys.read("arm_length", cfg.system.quad.arm_length);
    sys.read("mass", cfg.system.quad.mass);
    sys.read("gravity", cfg.system.quad.gravity);
    sys.finish();
    if (is_quadrotor(cfg.system) && !sys.has("dt")) cfg.system.dt = cfg.system.quad.dt;
    cfg.system.quad.dt = cfg.system.dt;

    Section dist(j, "disturbance");
    dist.read("kind", cfg.disturbance.kind);
    dist.read("variance", cfg.disturbance.variance);
    dist.read("alpha", cfg.disturbance.alpha);
    dist.read("beta", cfg.disturbance.beta);
    dist.read("rate", cfg.disturbance.rate);
    dist.read("scale", cfg.disturbance.scale);
    const bool scale_given = dist.has("scale");
    dist.finish();

    Section smp(j, "sampling");
    smp.read("size", cfg.sampling.size);
    smp.read("initial", cfg.sampling.initial);
    smp.read("lower", cfg.sampling.lower);
    smp.read("upper", cfg.sampling.upper);
    smp.read("center", cfg.sampling.center);
    smp.read("variance", cfg.sampling.variance);
    smp.read("points", cfg.sampling.points);
    smp.read("file", cfg.sampling.file);
    smp.finish();

    Section ker(j, "kernel");
    // `sigma` sets both bandwidths; sigma_x / sigma_u override it.
    double sigma = cfg.kernel.sigma_x;
    ker.read("sigma", sigma);
    cfg.kernel.sigma_x = cfg.kernel.sigma_u = sigma;
    ker.read("sigma_x", cfg.kernel.sigma_x);
    ker.read("sigma_u", cfg.kernel.sigma_u);
    ker.read("lambda", cfg.kernel.lambda);
    ker.finish();

    Section rff(j, "rff");
    rff.read("D", cfg.rff.D);
    std::string mode = to_string(cfg.rff.mode), route = to_string(cfg.rff.route);
    rff.read("mode", mode);
    rff.read("route", route);
    cfg.rff.mode = parse_joint_mode(mode);
    cfg.rff.route = parse_solve_route(route);
    std::uint64_t rff_seed = 0;
    rff.read("seed", rff_seed);
    if (rff.has("seed")) cfg.rff.seed = rff_seed;
    rff.finish();

    Section prob(j, "problem");
    prob.read("horizon", cfg.horizon);
    prob.read("policy", cfg.policy);
    prob.read("clamp", cfg.clamp);
    prob.finish();

    Section grid(j, "grid");
    grid.read("lower", cfg.grid.lower);
    grid.read("upper", cfg.grid.upper);
    grid.read("resolution", cfg.grid.resolution);
    grid.read("points", cfg.grid.points);
    grid.finish();

    Section dp(j, "dp");
    dp.read("resolution", cfg.dp_resolution);
    dp.finish();

    Section mc(j, "mc");
    mc.read("trials", cfg.mc_trials);
    mc.finish();

    Section bench(j, "bench");
    bench.read("warmup", cfg.bench.warmup);
    bench.read("iterations", cfg.bench.iterations);
    bench.read("copies", cfg.bench.copies);
    bench.read("M", cfg.bench.sweep_size);
    bench.read("D", cfg.bench.sweep_features);
    bench.read("N", cfg.bench.sweep_horizon);
    bench.finish();

    Section out(j, "output");
    out.read("dir", cfg.out_dir);
    out.finish();

    fill_defaults(cfg, scale_given);
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    return run_config_from_json(parse_config_file(path));
}

int RunConfig::state_dimension() const {
    if (system.name == "integrator") return 2;
    if (system.name == "quadrotor") return 6;
    return 6 * system.copies;
}

int RunConfig::input_dimension() const {
    if (system.name == "integrator") return 1;
    if (system.name == "quadrotor") return 2;
    return 2 * system.copies;
}

void RunConfig::validate() const {
    if (system.name != "integrator" && system.name != "quadrotor" && system.name != "repeated_quadrotor") {
        throw ConfigError("system.name '" + system.name + "' is unknown (integrator, quadrotor, repeated_quadrotor)");
    }
    if (!(system.dt > 0.0)) throw ConfigError("system.dt must be > 0");
    if (system.copies < 1) throw ConfigError("system.copies must be >= 1");
    if (system.name != "repeated_quadrotor" && system.copies != 1) {
        throw ConfigError("system.copies only applies to repeated_quadrotor");
    }
    if (!(system.spacing >= 2.0)) throw ConfigError("system.spacing must be >= 2 so adjacent tubes do not overlap");
    system.quad.validate();
    const int n = state_dimension();

    const auto& d = disturbance;
    if (d.kind == "gaussian") {
        require_dimension(static_cast<Eigen::Index>(d.variance.size()), n, "disturbance.variance");
        for (double v : d.variance) {
            if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("disturbance.variance entries must be >= 0");
        }
    } else if (d.kind == "beta") {
        if (!(d.alpha > 0.0 && d.beta > 0.0)) throw ConfigError("disturbance.alpha and .beta must be > 0");
        if (!(d.scale > 0.0)) throw ConfigError("disturbance.scale must be > 0");
    } else if (d.kind == "exponential") {
        if (!(d.rate > 0.0)) throw ConfigError("disturbance.rate must be > 0");
        if (!(d.scale > 0.0)) throw ConfigError("disturbance.scale must be > 0");
    } else if (d.kind != "none") {
        throw ConfigError("disturbance.kind '" + d.kind + "' is unknown (gaussian, beta, exponential, none)");
    }

    if (policy != "zero" && policy != "hover_lqr") {
        throw ConfigError("problem.policy '" + policy + "' is unknown (zero, hover_lqr)");
    }
    if (policy == "hover_lqr" && system.name == "integrator") {
        throw ConfigError("problem.policy hover_lqr needs a quadrotor system");
    }
    if (horizon < 0) throw ConfigError("problem.horizon must be >= 0");

    const auto& s = sampling;
    if (s.file.empty()) {
        if (s.size < 1) throw ConfigError("sampling.size must be >= 1");
        if (s.initial == "uniform") {
            require_dimension(static_cast<Eigen::Index>(s.lower.size()), n, "sampling.lower");
            require_dimension(static_cast<Eigen::Index>(s.upper.size()), n, "sampling.upper");
            for (int i = 0; i < n; ++i) {
                const auto a = static_cast<std::size_t>(i);
                if (!(s.lower[a] <= s.upper[a]) || !std::isfinite(s.lower[a]) || !std::isfinite(s.upper[a])) {
                    throw ConfigError("sampling.lower/upper must be finite with lower <= upper");
                }
            }
        } else if (s.initial == "gaussian") {
            require_dimension(static_cast<Eigen::Index>(s.center.size()), n, "sampling.center");
            require_dimension(static_cast<Eigen::Index>(s.variance.size()), n, "sampling.variance");
        } else if (s.initial == "list") {
            if (s.points.empty()) throw ConfigError("sampling.points must not be empty for initial = \"list\"");
            for (const auto& p : s.points) require_dimension(static_cast<Eigen::Index>(p.size()), n, "sampling.points");
        } else {
            throw ConfigError("sampling.initial '" + s.initial + "' is unknown (uniform, gaussian, list)");
        }
    }

    if (!(kernel.sigma_x > 0.0 && kernel.sigma_u > 0.0)) throw ConfigError("kernel sigmas must be > 0");
    if (!(kernel.lambda > 0.0)) throw ConfigError("kernel.lambda must be > 0");
    if (rff.D < 1) throw ConfigError("rff.D must be >= 1");

    if (grid.points.empty()) {
        require_dimension(static_cast<Eigen::Index>(grid.lower.size()), n, "grid.lower");
        require_dimension(static_cast<Eigen::Index>(grid.upper.size()), n, "grid.upper");
        require_dimension(static_cast<Eigen::Index>(grid.resolution.size()), n, "grid.resolution");
        for (int r : grid.resolution) {
            if (r < 1) throw ConfigError("grid.resolution entries must be >= 1");
        }
    } else {
        for (const auto& p : grid.points) require_dimension(static_cast<Eigen::Index>(p.size()), n, "grid.points");
    }

    for (Method m : methods) {
        if (m == Method::Dp) {
            if (system.name != "integrator" || (d.kind != "gaussian" && d.kind != "none")) {
                throw ConfigError("method dp supports only the integrator with a gaussian (or no) disturbance; "
                                  "use method mc for '" + system.name + "' with " + d.kind + " noise");
            }
            if (dp_resolution < 1) throw ConfigError("dp.resolution must be >= 1");
        }
        if (m == Method::Mc && mc_trials < 1) throw ConfigError("mc.trials must be >= 1");
    }
    if (bench.warmup < 1) throw ConfigError("bench.warmup must be >= 1");
    if (bench.iterations < 3) throw ConfigError("bench.iterations must be >= 3");
    for (int c : bench.copies) {
        if (c < 1) throw ConfigError("bench.copies entries must be >= 1");
    }
    if (bench.sweep_size < 1 || bench.sweep_features < 1 || bench.sweep_horizon < 0) {
        throw ConfigError("bench.M and bench.D must be >= 1 and bench.N >= 0");
    }
}

// ----------------------------------------------------------------------------
// Builders

Disturbance build_disturbance(const RunConfig& cfg) {
    const auto& d = cfg.disturbance;
    const int n = cfg.state_dimension();
    if (d.kind == "gaussian") return Disturbance::gaussian_diagonal(to_vector(d.variance));
    if (d.kind == "beta") return Disturbance::scaled_beta(n, d.alpha, d.beta, d.scale);
    if (d.kind == "exponential") return Disturbance::scaled_exponential(n, d.rate, d.scale);
    return Disturbance::none(n);
}

SystemModel build_system(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.system.name == "integrator") return make_integrator(cfg.system.dt, build_disturbance(cfg));
    if (cfg.system.name == "quadrotor") return make_quadrotor(cfg.system.quad, build_disturbance(cfg));
    // Per-copy disturbance, drawn independently per block.
    RunConfig base = cfg;
    base.system.name = "quadrotor";
    base.system.copies = 1;
    if (base.disturbance.variance.size() > 6) base.disturbance.variance.resize(6);
    return repeated_system(make_quadrotor(cfg.system.quad, build_disturbance(base)), cfg.system.copies);
}

MarkovPolicy build_policy(const RunConfig& cfg) {
    if (cfg.policy == "zero") return MarkovPolicy::zero(cfg.input_dimension());
    return repeated_hover_lqr_policy(cfg.system.quad, LqrWeights::quadrotor_default(), quadrotor_default_reference(),
                                     cfg.system.copies, cfg.system.spacing);
}

SafetyProblem build_problem(const RunConfig& cfg) {
    SafeTargetSets sets = cfg.system.name == "integrator" ? integrator_sets()
                                                          : repeated_quadrotor_sets(cfg.system.copies, cfg.system.spacing);
    return SafetyProblem(cfg.horizon, std::move(sets.safe), std::move(sets.target), build_policy(cfg));
}

SamplingPlan build_sampling_plan(const RunConfig& cfg) {
    cfg.validate();
    const int n = cfg.state_dimension();
    SamplingPlan plan;
    plan.size = cfg.sampling.size;
    plan.seed = cfg.seed;
    plan.policy = build_policy(cfg);
    const auto& s = cfg.sampling;
    if (s.initial == "uniform") {
        std::vector<AxisInterval> axes;
        for (int i = 0; i < n; ++i) {
            axes.push_back(AxisInterval::closed(s.lower[static_cast<std::size_t>(i)], s.upper[static_cast<std::size_t>(i)]));
        }
        plan.initial = UniformOverBox{HyperRectangle(std::move(axes))};
    } else if (s.initial == "gaussian") {
        plan.initial = GaussianAround{to_vector(s.center), to_vector(s.variance).asDiagonal()};
    } else {
        plan.initial = FixedList{to_points(s.points, n, "sampling.points")};
    }
    return plan;
}

PointMatrix build_eval_points(const RunConfig& cfg) {
    const int n = cfg.state_dimension();
    const auto& g = cfg.grid;
    if (!g.points.empty()) return to_points(g.points, n, "grid.points");
    std::vector<AxisInterval> axes;
    std::vector<std::optional<double>> fixed(static_cast<std::size_t>(n));
    std::vector<int> resolution = g.resolution;
    for (int i = 0; i < n; ++i) {
        const auto a = static_cast<std::size_t>(i);
        if (g.resolution[a] == 1) {
            fixed[a] = g.lower[a];
            axes.push_back(AxisInterval::unbounded());
        } else {
            if (!(g.lower[a] < g.upper[a])) throw ConfigError("grid.lower must be < grid.upper on free axes");
            axes.push_back(AxisInterval::closed(g.lower[a], g.upper[a]));
        }
    }
    return grid_points(HyperRectangle(std::move(axes)), resolution, fixed);
}

std::shared_ptr<const TransitionSample> obtain_sample(const RunConfig& cfg) {
    if (!cfg.sampling.file.empty()) {
        auto sample = std::make_shared<const TransitionSample>(read_sample_csv(cfg.sampling.file));
        require_dimension(sample->state_dimension(), cfg.state_dimension(), "sample file state columns");
        require_dimension(sample->input_dimension(), cfg.input_dimension(), "sample file input columns");
        return sample;
    }
    return std::make_shared<const TransitionSample>(generate_sample(build_system(cfg), build_sampling_plan(cfg)));
}

std::unique_ptr<ConditionalEmbedding> build_embedding(const RunConfig& cfg, Method method,
                                                      std::shared_ptr<const TransitionSample> sample) {
    if (method == Method::Exact) {
        return fit_exact(std::move(sample), JointKernel{GaussianKernel(cfg.kernel.sigma_x), GaussianKernel(cfg.kernel.sigma_u)},
                         cfg.kernel.lambda);
    }
    if (method == Method::Rff) {
        auto map = JointFeatureMap::sample(cfg.rff.mode, cfg.rff.D, sample->state_dimension(), sample->input_dimension(),
                                           cfg.kernel.sigma_x, cfg.kernel.sigma_u, cfg.rff.seed.value_or(cfg.seed));
        return fit_rff(std::move(sample), std::move(map), cfg.kernel.lambda, cfg.rff.route);
    }
    throw ConfigError(std::string("method ") + to_string(method) + " is an oracle, not an embedding");
}

double estimated_memory_bytes(const RunConfig& cfg, Method method) {
    const double m = static_cast<double>(cfg.sampling.size);
    const double n = cfg.state_dimension();
    const double u = cfg.input_dimension();
    const double base = 8.0 * m * (2.0 * n + u);
    if (method == Method::Exact) return base + 2.0 * 8.0 * m * m;
    if (method == Method::Rff) {
        const double d = static_cast<double>(cfg.rff.D);
        const double solve = std::min(d, m);
        return base + 8.0 * (2.0 * m * d + solve * solve + d * (n + u));
    }
    return base;
}

// ----------------------------------------------------------------------------
// Timed runs

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SafetyField resample_dp(const DpSolution& dp, const SafetyProblem& problem, const PointMatrix& points) {
    if (points.rows() == dp.field.points.rows() && points.cols() == dp.field.points.cols() &&
        points == dp.field.points) {
        return dp.field;
    }
    SafetyField out;
    out.points = points;
    out.meta = dp.field.meta;
    for (int k = 0; k <= dp.field.horizon(); ++k) {
        ValueVector layer(points.rows());
        for (Eigen::Index i = 0; i < points.rows(); ++i) layer[i] = dp.value(problem, points.row(i).transpose(), k);
        out.layers.push_back(std::move(layer));
    }
    out.meta["interpolated"] = true;
    return out;
}

}  // namespace

MethodRun run_method(const RunConfig& cfg, Method method, const PointMatrix& eval_points,
                     std::shared_ptr<const TransitionSample> sample) {
    cfg.validate();
    MethodRun run;
    const SafetyProblem problem = build_problem(cfg);
    if (is_estimator(method)) {
        if (!sample) {
            const auto t0 = std::chrono::steady_clock::now();
            sample = obtain_sample(cfg);
            run.times.sample = seconds_since(t0);
        }
        auto t0 = std::chrono::steady_clock::now();
        const auto embedding = build_embedding(cfg, method, sample);
        run.times.fit = seconds_since(t0);
        t0 = std::chrono::steady_clock::now();
        RecursionOptions options;
        options.clamp = cfg.clamp;
        run.field = backward_recursion(problem, *embedding, eval_points, options);
        run.times.recursion = seconds_since(t0);
    } else if (method == Method::Dp) {
        const SystemModel system = build_system(cfg);
        const auto t0 = std::chrono::steady_clock::now();
        const DpSolution dp = dp_solve(problem, system, DpGrid::over(problem.safe_set(), cfg.dp_resolution));
        run.field = resample_dp(dp, problem, eval_points);
        run.times.recursion = seconds_since(t0);
    } else {
        const SystemModel system = build_system(cfg);
        const auto t0 = std::chrono::steady_clock::now();
        run.field = mc_field(problem, system, eval_points, cfg.mc_trials, cfg.seed);
        run.times.recursion = seconds_since(t0);
    }
    run.field.meta["seed"] = cfg.seed;
    run.field.meta["dt"] = cfg.system.dt;
    run.field.meta["config"] = cfg.source;
    return run;
}

}  // namespace kreach
