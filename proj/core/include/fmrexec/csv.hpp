#pragma once

// CSV output with round-trip number formatting, and the impact-series reader.

#include "fmrexec/calibrate.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fmrexec {

/// 17 significant digits; exact round trip for IEEE doubles.
std::string format_number(double v);
std::string format_number(std::size_t v);

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
    void row(const std::vector<std::string>& cells);
    void row(const std::vector<double>& values);
    void close();

private:
    std::ofstream out_;
    std::size_t columns_;
    std::filesystem::path path_;
};

class CsvParseError : public std::runtime_error {
public:
    CsvParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Parses a kappa series: one value per row (t_i = i/N) or rows of (t, value).
/// An optional non-numeric header line is skipped; blank lines are ignored.
ImpactSeries parse_series_csv(const std::string& text);
ImpactSeries read_series_csv(const std::filesystem::path& path);

}  // namespace fmrexec
