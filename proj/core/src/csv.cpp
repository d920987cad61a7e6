#include "fmrexec/csv.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

namespace fmrexec {

std::string format_number(double v) {
    char buf[32];
    const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf, static_cast<std::size_t>(len));
}

std::string format_number(std::size_t v) { return std::to_string(v); }

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary | std::ios::trunc), columns_(header.size()), path_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
    row(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_)
        throw std::logic_error(path_.string() + ": row has " + std::to_string(cells.size()) + " cells, header has " +
                               std::to_string(columns_));
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ << ',';
        out_ << cells[i];
    }
    out_ << '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_number(v));
    row(cells);
}

void CsvWriter::close() {
    out_.close();
    if (!out_) throw std::runtime_error("error writing " + path_.string());
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            cells.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return cells;
}

}  // namespace

ImpactSeries parse_series_csv(const std::string& text) {
    std::vector<double> t, value;
    std::size_t columns = 0;
    std::size_t line_no = 0;
    bool seen_data = false;
    std::istringstream in(text);
    for (std::string raw; std::getline(in, raw);) {
        ++line_no;
        const std::string_view line = trim(raw);
        if (line.empty()) continue;
        const auto cells = split(line);
        std::vector<double> nums(cells.size());
        bool numeric = true;
        for (std::size_t c = 0; c < cells.size(); ++c) numeric = numeric && parse_double(cells[c], nums[c]);
        if (!seen_data && !numeric) {
            seen_data = true;  // header
            columns = cells.size();
            continue;
        }
        seen_data = true;
        if (!numeric) throw CsvParseError(line_no, "non-numeric cell in '" + std::string(line) + "'");
        if (columns == 0) columns = cells.size();
        if (cells.size() != columns)
            throw CsvParseError(line_no, "expected " + std::to_string(columns) + " columns, found " +
                                             std::to_string(cells.size()));
        if (columns == 1) {
            value.push_back(nums[0]);
        } else if (columns == 2) {
            if (!t.empty() && !(nums[0] > t.back()))
                throw CsvParseError(line_no, "timestamps must increase");
            t.push_back(nums[0]);
            value.push_back(nums[1]);
        } else {
            throw CsvParseError(line_no, "expected 1 or 2 columns (value | t,value)");
        }
        if (!(value.back() > 0.0)) throw CsvParseError(line_no, "impact value must be positive");
    }
    if (value.empty()) throw CsvParseError(line_no, "no data rows");
    if (columns == 1) return ImpactSeries::from_values(std::move(value));
    ImpactSeries s;
    s.t = std::move(t);
    s.value = std::move(value);
    s.validate();
    return s;
}

ImpactSeries read_series_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_series_csv(buf.str());
}

}  // namespace fmrexec
