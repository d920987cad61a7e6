#include "fmrexec/config.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace fmrexec {

using nlohmann::json;

namespace {

const json& require(const json& obj, const std::string& section, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError(section + "." + key, "missing required key");
    return *it;
}

double get_number(const json& obj, const std::string& section, const char* key) {
    const json& v = require(obj, section, key);
    if (!v.is_number()) throw ConfigError(section + "." + key, "expected a number");
    return v.get<double>();
}

double get_number_or(const json& obj, const std::string& section, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    return get_number(obj, section, key);
}

std::size_t get_count_or(const json& obj, const std::string& section, const char* key,
                         std::size_t fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError(section + "." + key, "expected a non-negative integer");
    return v.get<std::size_t>();
}

std::vector<double> get_list(const json& v, const std::string& key) {
    if (!v.is_array()) throw ConfigError(key, "expected an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& x : v) {
        if (!x.is_number()) throw ConfigError(key, "expected an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

Vector get_vector(const json& obj, const std::string& section, const char* key) {
    const auto list = get_list(require(obj, section, key), section + "." + key);
    return Eigen::Map<const Vector>(list.data(), static_cast<Eigen::Index>(list.size()));
}

Matrix get_matrix(const json& obj, const std::string& section, const char* key) {
    const std::string name = section + "." + key;
    const json& v = require(obj, section, key);
    // a bare number is accepted as a 1x1 matrix
    if (v.is_number()) return Matrix::Constant(1, 1, v.get<double>());
    if (!v.is_array() || v.empty()) throw ConfigError(name, "expected a non-empty array of rows");
    const auto rows = static_cast<Eigen::Index>(v.size());
    Matrix m;
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto row = get_list(v[static_cast<std::size_t>(r)], name);
        if (r == 0) m.resize(rows, static_cast<Eigen::Index>(row.size()));
        if (static_cast<Eigen::Index>(row.size()) != m.cols())
            throw ConfigError(name, "rows have inconsistent lengths");
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = row[static_cast<std::size_t>(c)];
    }
    return m;
}

const json& section(const json& root, const char* name) {
    auto it = root.find(name);
    if (it == root.end()) throw ConfigError(name, "missing required section");
    if (!it->is_object()) throw ConfigError(name, "section must be an object");
    return *it;
}

json to_json_vec(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json to_json_mat(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
        rows.push_back(row);
    }
    return rows;
}

template <class Fn>
void rethrow_as(const std::string& key, Fn&& fn) {
    try {
        fn();
    } catch (const InvalidParameter& e) {
        throw ConfigError(key, e.what());
    }
}

}  // namespace

RunConfig parse_config(std::string_view json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError("<document>", std::string("JSON parse error: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("<document>", "top level must be an object");

    RunConfig cfg;

    const json& p = section(root, "problem");
    auto& pr = cfg.problem;
    pr.gamma = get_vector(p, "problem", "gamma");
    pr.b = get_number(p, "problem", "b");
    pr.sigma = get_number(p, "problem", "sigma");
    pr.phi = get_number(p, "problem", "phi");
    pr.varphi = get_number(p, "problem", "varphi");
    pr.T = get_number_or(p, "problem", "T", 1.0);
    pr.S0 = get_number(p, "problem", "S0");
    pr.X0 = get_number_or(p, "problem", "X0", 0.0);
    pr.Q0 = get_number(p, "problem", "Q0");
    pr.mu0 = get_vector(p, "problem", "mu0");
    rethrow_as("problem", [&] { pr.validate(); });

    const json& im = section(root, "impact");
    auto& ip = cfg.impact;
    ip.kappa = get_list(require(im, "impact", "kappa"), "impact.kappa");
    if (im.contains("eta_kind")) {
        const auto kind = im.at("eta_kind");
        if (!kind.is_string()) throw ConfigError("impact.eta_kind", "expected a string");
        const auto s = kind.get<std::string>();
        if (s == "identity")
            ip.eta_kind = EtaKind::Identity;
        else if (s == "scaled_tanh")
            ip.eta_kind = EtaKind::ScaledTanh;
        else
            throw ConfigError("impact.eta_kind", "unknown kind '" + s + "' (identity | scaled_tanh)");
    }
    ip.eta_scale = get_number_or(im, "impact", "eta_scale", ip.eta_scale);
    ip.eps = get_number(im, "impact", "eps");
    ip.beta_param = get_number(im, "impact", "beta_param");
    ip.eta_clamp = get_number_or(im, "impact", "eta_clamp", ip.eta_clamp);
    ip.horizon = pr.T;
    rethrow_as("impact", [&] { ImpactModel check(ip); });

    const json& sg = section(root, "signal");
    cfg.signal.A = get_matrix(sg, "signal", "A");
    cfg.signal.B = get_matrix(sg, "signal", "B");
    cfg.signal.mu_bar = get_vector(sg, "signal", "mu_bar");
    cfg.signal.rho = get_vector(sg, "signal", "rho");
    rethrow_as("signal", [&] { cfg.signal.validate(); });
    if (cfg.signal.dim() != pr.dim())
        throw ConfigError("signal.A", "signal dimension does not match problem.gamma");

    if (root.contains("grid")) {
        const json& g = section(root, "grid");
        cfg.grid_steps = get_count_or(g, "grid", "n_steps", cfg.grid_steps);
        if (cfg.grid_steps < 2) throw ConfigError("grid.n_steps", "must be >= 2");
    }
    if (root.contains("sim")) {
        const json& s = section(root, "sim");
        cfg.sim.n_paths = get_count_or(s, "sim", "n_paths", cfg.sim.n_paths);
        cfg.sim.n_steps = get_count_or(s, "sim", "n_steps", cfg.sim.n_steps);
        cfg.sim.seed = get_count_or(s, "sim", "seed", cfg.sim.seed);
        cfg.sim.store_stride = get_count_or(s, "sim", "store_stride", cfg.sim.store_stride);
        cfg.sim.workers = get_count_or(s, "sim", "workers", cfg.sim.workers);
        if (cfg.sim.n_paths < 1) throw ConfigError("sim.n_paths", "must be >= 1");
        if (cfg.sim.n_steps < 2) throw ConfigError("sim.n_steps", "must be >= 2");
    }
    if (root.contains("sweep")) {
        const json& s = section(root, "sweep");
        if (s.contains("phi_multiples"))
            cfg.phi_multiples = get_list(s.at("phi_multiples"), "sweep.phi_multiples");
        for (double m : cfg.phi_multiples)
            if (!(m >= 0.0)) throw ConfigError("sweep.phi_multiples", "multiples must be >= 0");
    }
    if (root.contains("pde")) {
        const json& s = section(root, "pde");
        cfg.pde.M = get_count_or(s, "pde", "M", cfg.pde.M);
        cfg.pde.L_over_beta = get_number_or(s, "pde", "L_over_beta", cfg.pde.L_over_beta);
        cfg.pde.dt_over_eps = get_number_or(s, "pde", "dt_over_eps", cfg.pde.dt_over_eps);
        if (s.contains("eps_list")) cfg.pde.eps_list = get_list(s.at("eps_list"), "pde.eps_list");
        if (cfg.pde.M < 4) throw ConfigError("pde.M", "must be >= 4");
        if (!(cfg.pde.L_over_beta >= 6.0)) throw ConfigError("pde.L_over_beta", "must be >= 6");
        if (!(cfg.pde.dt_over_eps > 0.0)) throw ConfigError("pde.dt_over_eps", "must be > 0");
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("<document>", "cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string RunConfig::to_json() const {
    json root;
    root["problem"] = {{"gamma", to_json_vec(problem.gamma)}, {"b", problem.b},
                       {"sigma", problem.sigma},              {"phi", problem.phi},
                       {"varphi", problem.varphi},            {"T", problem.T},
                       {"S0", problem.S0},                    {"X0", problem.X0},
                       {"Q0", problem.Q0},                    {"mu0", to_json_vec(problem.mu0)}};
    root["impact"] = {{"kappa", impact.kappa},
                      {"eta_kind", impact.eta_kind == EtaKind::Identity ? "identity" : "scaled_tanh"},
                      {"eta_scale", impact.eta_scale},
                      {"eps", impact.eps},
                      {"beta_param", impact.beta_param},
                      {"eta_clamp", impact.eta_clamp}};
    root["signal"] = {{"A", to_json_mat(signal.A)},
                      {"B", to_json_mat(signal.B)},
                      {"mu_bar", to_json_vec(signal.mu_bar)},
                      {"rho", to_json_vec(signal.rho)}};
    root["grid"] = {{"n_steps", grid_steps}};
    root["sim"] = {{"n_paths", sim.n_paths},
                   {"n_steps", sim.n_steps},
                   {"seed", sim.seed},
                   {"store_stride", sim.store_stride},
                   {"workers", sim.workers}};
    root["sweep"] = {{"phi_multiples", phi_multiples}};
    root["pde"] = {{"M", pde.M},
                   {"L_over_beta", pde.L_over_beta},
                   {"dt_over_eps", pde.dt_over_eps},
                   {"eps_list", pde.eps_list}};
    return root.dump(2);
}

}  // namespace fmrexec
