#pragma once

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fmrexec::cli {

class Manifest {
public:
    Manifest(std::string command, std::filesystem::path out_dir, nlohmann::json config, std::uint64_t seed);

    /// Registers an output (relative to the output directory).
    void add(const std::string& file);
    /// Writes the manifest in its current state.
    void write(const std::string& status);

private:
    std::string command_;
    std::filesystem::path out_;
    nlohmann::json config_;
    std::uint64_t seed_;
    std::vector<std::string> files_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace fmrexec::cli
