#include "nparc/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "nparc/errors.hpp"

namespace nparc {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    const std::string v = trim(text);
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
        throw InvalidConfig("key '" + key + "': cannot parse '" + v + "'");
    return out;
}

std::string format(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

template <class T>
std::string format_value(const T& v) {
    if constexpr (std::is_same_v<T, double>) {
        return format(v);
    } else if constexpr (std::is_same_v<T, std::string>) {
        return v;
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
        std::string out;
        for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format(v[i]);
        return out;
    } else {
        return std::to_string(v);
    }
}

template <class T>
T parse_value(const std::string& key, const std::string& text) {
    if constexpr (std::is_same_v<T, std::string>) {
        return trim(text);
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
        std::vector<double> out;
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(parse_number<double>(key, item));
        if (out.empty()) throw InvalidConfig("key '" + key + "': empty list");
        return out;
    } else {
        return parse_number<T>(key, text);
    }
}

struct Field {
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

template <class T>
Field field(const char* key, T RunConfig::*member) {
    return {key, [member](const RunConfig& c) { return format_value(c.*member); },
            [member, key](RunConfig& c, const std::string& v) { c.*member = parse_value<T>(key, v); }};
}

template <class T>
Field sgda_field(const char* key, T SgdaConfig::*member) {
    return {key, [member](const RunConfig& c) { return format_value(c.sgda.*member); },
            [member, key](RunConfig& c, const std::string& v) {
                c.sgda.*member = parse_value<T>(key, v);
            }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> all = {
        field("seed", &RunConfig::seed),
        field("t0", &RunConfig::t0),
        field("horizon", &RunConfig::horizon),
        field("periods_per_year", &RunConfig::periods_per_year),
        field("rate_annual", &RunConfig::rate_annual),
        field("mean_annual", &RunConfig::mean_annual),
        field("vol_annual", &RunConfig::vol_annual),
        field("correlation", &RunConfig::correlation),
        field("risk_aversion", &RunConfig::risk_aversion),
        field("initial_wealth", &RunConfig::initial_wealth),
        field("control_lower", &RunConfig::control_lower),
        field("control_upper", &RunConfig::control_upper),
        field("alpha", &RunConfig::alpha),
        field("order", &RunConfig::order),
        field("moments", &RunConfig::moments),
        field("bernstein_degree", &RunConfig::bernstein_degree),
        field("radius_scale", &RunConfig::radius_scale),
        field("radius_exponent", &RunConfig::radius_exponent),
        field("design_points", &RunConfig::design_points),
        field("paths", &RunConfig::paths),
        sgda_field("sgda_descent_step", &SgdaConfig::descent_step),
        sgda_field("sgda_ascent_step", &SgdaConfig::ascent_step),
        sgda_field("sgda_decay_iters", &SgdaConfig::decay_iters),
        sgda_field("sgda_averaging_power", &SgdaConfig::averaging_power),
        sgda_field("sgda_max_iters", &SgdaConfig::max_iters),
        sgda_field("sgda_stall_window", &SgdaConfig::stall_window),
        sgda_field("sgda_stall_tol", &SgdaConfig::stall_tol),
        sgda_field("sgda_ascent_steps", &SgdaConfig::ascent_steps),
        sgda_field("sgda_u_margin", &SgdaConfig::u_margin),
        sgda_field("sgda_refine_iters", &SgdaConfig::refine_iters),
        sgda_field("sgda_refine_tol", &SgdaConfig::refine_tol),
        field("design_corr_low", &RunConfig::design_corr_low),
        field("design_corr_high", &RunConfig::design_corr_high),
        field("design_wealth_paths", &RunConfig::design_wealth_paths),
        field("design_wealth_quantile", &RunConfig::design_wealth_quantile),
        field("design_wealth_margin", &RunConfig::design_wealth_margin),
        field("warm_start_chunk", &RunConfig::warm_start_chunk),
        field("gp_jitter", &RunConfig::gp_jitter),
        field("gp_restarts", &RunConfig::gp_restarts),
        field("gp_min_length_scale", &RunConfig::gp_min_length_scale),
        field("gp_max_length_scale", &RunConfig::gp_max_length_scale),
        field("gp_max_iterations", &RunConfig::gp_max_iterations),
        field("qmc_points", &RunConfig::qmc_points),
        field("abort_fraction", &RunConfig::abort_fraction),
        field("workers", &RunConfig::workers),
        field("data_path", &RunConfig::data_path),
        field("checkpoint_dir", &RunConfig::checkpoint_dir),
        field("output_dir", &RunConfig::output_dir),
    };
    return all;
}

Matrix correlation_matrix(int n, const std::vector<double>& upper) {
    Matrix c = Matrix::Identity(n, n);
    std::size_t k = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j, ++k) c(i, j) = c(j, i) = upper[k];
    return c;
}

Vector to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void RunConfig::validate() const {
    const auto n = mean_annual.size();
    if (n < 1) throw InvalidConfig("mean_annual must list at least one asset");
    if (vol_annual.size() != n) throw InvalidConfig("vol_annual must have one entry per asset");
    if (correlation.size() != n * (n - 1) / 2 && !(n == 1 && correlation.size() == 1))
        throw InvalidConfig("correlation must list the n(n-1)/2 upper-triangular entries");
    for (double v : vol_annual)
        if (!(v > 0.0)) throw InvalidConfig("vol_annual entries must be > 0");
    for (double r : correlation)
        if (!(r > -1.0 && r < 1.0)) throw InvalidConfig("correlations must lie in (-1,1)");
    if (control_lower.size() != n || control_upper.size() != n)
        throw InvalidConfig("control bounds must have one entry per asset");
    if (horizon < 1) throw InvalidConfig("horizon must be >= 1");
    if (paths < 1) throw InvalidConfig("paths must be >= 1");
    if (bernstein_degree < 0) throw InvalidConfig("bernstein_degree must be >= 0");
    if (!(order >= 1.0)) throw InvalidConfig("order must be >= 1");
    if (workers < 1) throw InvalidConfig("workers must be >= 1");
    problem();  // model, market and box invariants
    solver().validate();
}

Problem RunConfig::problem() const {
    const int n = static_cast<int>(mean_annual.size());
    Problem p{TrueModel::from_annual(to_vector(mean_annual), to_vector(vol_annual),
                                     correlation_matrix(n, correlation), periods_per_year),
              MarketParams{}, ControlBox{to_vector(control_lower), to_vector(control_upper)}};
    p.market.rate_per_period = rate_annual / periods_per_year;
    p.market.horizon = horizon;
    p.market.risk_aversion = risk_aversion;
    p.market.initial_wealth = initial_wealth;
    p.market.validate();
    p.box.validate();
    return p;
}

SolverConfig RunConfig::solver() const {
    SolverConfig s;
    s.t0 = t0;
    s.alpha = alpha;
    s.moments = moments;
    s.radius.c_scale = radius_scale;
    s.radius.exponent = radius_exponent;
    s.radius.dim = static_cast<int>(mean_annual.size());
    s.radius.order = order;
    s.sgda = sgda;
    s.sgda.bernstein_degree = bernstein_degree;
    s.sgda.order = order;
    s.design.count = design_points;
    s.design.corr_low = design_corr_low;
    s.design.corr_high = design_corr_high;
    s.design.wealth_paths = design_wealth_paths;
    s.design.wealth_quantile = design_wealth_quantile;
    s.design.wealth_margin = design_wealth_margin;
    s.gp.relative_jitter = gp_jitter;
    s.gp.restarts = gp_restarts;
    s.gp.min_length_scale = gp_min_length_scale;
    s.gp.max_length_scale = gp_max_length_scale;
    s.gp.max_optimizer_iterations = gp_max_iterations;
    s.qmc_points = qmc_points;
    s.warm_start_chunk = warm_start_chunk;
    s.workers = workers;
    s.abort_fraction = abort_fraction;
    s.checkpoint_dir = checkpoint_dir;
    return s;
}

RunConfig RunConfig::load(std::istream& in) {
    std::map<std::string, const Field*> by_key;
    for (const auto& f : fields()) by_key[f.key] = &f;
    RunConfig cfg;
    std::set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidConfig("line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const auto it = by_key.find(key);
        if (it == by_key.end()) throw InvalidConfig("unknown key '" + key + "'");
        if (!seen.insert(key).second) throw InvalidConfig("duplicate key '" + key + "'");
        it->second->set(cfg, line.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("cannot open config file '" + path + "'");
    return load(in);
}

void RunConfig::save(std::ostream& out) const {
    for (const auto& f : fields()) out << f.key << " = " << f.get(*this) << '\n';
}

void write_data_csv(std::ostream& out, const Matrix& data) {
    out << std::setprecision(17);
    for (Eigen::Index i = 0; i < data.cols(); ++i) out << (i ? "," : "") << 'z' << (i + 1);
    out << '\n';
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
        for (Eigen::Index i = 0; i < data.cols(); ++i) out << (i ? "," : "") << data(r, i);
        out << '\n';
    }
}

Matrix read_data_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("data CSV is empty");
    const auto cols = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',') + 1);
    std::vector<double> values;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::stringstream ss(line);
        std::string item;
        Eigen::Index got = 0;
        while (std::getline(ss, item, ',')) {
            try {
                values.push_back(parse_number<double>("data", item));
            } catch (const InvalidConfig&) {
                throw DataError("data line " + std::to_string(lineno) + ": bad number '" +
                                trim(item) + "'");
            }
            ++got;
        }
        if (got != cols)
            throw DataError("data line " + std::to_string(lineno) + ": expected " +
                            std::to_string(cols) + " columns");
    }
    const auto rows = static_cast<Eigen::Index>(values.size()) / cols;
    Matrix data(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) data(r, c) = values[static_cast<std::size_t>(r * cols + c)];
    return data;
}

}  // namespace nparc
