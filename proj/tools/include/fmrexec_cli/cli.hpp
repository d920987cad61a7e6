#pragma once

// Command implementations behind the fmrexec executable. Each command writes
// manifest.json into the output directory before any other file, then
// rewrites it with checksums once the outputs are complete.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fmrexec::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericalFailure = 3 };

struct Options {
    std::filesystem::path config;
    std::filesystem::path out = ".";
    std::filesystem::path input;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    std::optional<std::size_t> workers;
    std::size_t order = 8;
    std::size_t series_length = 23400;
    std::vector<double> eps;
    std::vector<std::string> policies;
    std::vector<double> phi_multiples;
    bool dump_field = false;
};

int cmd_calibrate(const Options& opts, std::ostream& log);
int cmd_solve(const Options& opts, std::ostream& log);
int cmd_simulate(const Options& opts, std::ostream& log);
int cmd_compare(const Options& opts, std::ostream& log);
int cmd_verify_accuracy(const Options& opts, std::ostream& log);
/// Synthetic per-second impact series from the config's impact model.
int cmd_synth_series(const Options& opts, std::ostream& log);

/// Dispatch by name; maps library exceptions onto exit codes.
int run(const std::string& command, const Options& opts, std::ostream& log);

std::string sha256_hex(const std::filesystem::path& file);

}  // namespace fmrexec::cli
