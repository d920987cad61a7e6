#pragma once

// JSON run configuration with sections problem / impact / signal (required)
// and grid / sim / sweep / pde (optional). Key names match the struct fields
// in model.hpp.

#include "fmrexec/model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fmrexec {

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& what)
        : std::runtime_error(key + ": " + what), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

struct SimSection {
    std::size_t n_paths = 1000;
    std::size_t n_steps = 23400;
    std::uint64_t seed = 20140528;
    std::size_t store_stride = 0;
    std::size_t workers = 0;  ///< 0 = hardware concurrency
};

struct PdeSection {
    std::size_t M = 400;
    double L_over_beta = 8.0;
    double dt_over_eps = 2e-3;
    std::vector<double> eps_list{0.2, 0.1, 0.05, 0.025};
};

struct RunConfig {
    ExecutionProblem problem;
    ImpactModel::Params impact;
    SignalModel signal;
    std::size_t grid_steps = 10000;
    SimSection sim;
    std::vector<double> phi_multiples;  ///< phi = m * b; empty means use problem.phi
    PdeSection pde;

    /// The resolved configuration as pretty JSON (manifest snapshot).
    std::string to_json() const;
};

/// Parses and validates. Throws ConfigError naming the offending key.
RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace fmrexec
