#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mordred::csv {

/// Shortest decimal text that parses back to the same double ("%.17g").
std::string format(double value);

/// Reads a univariate series: the last field of each row. Lines starting with
/// '#' and a non-numeric header row are skipped.
std::vector<double> read_series(std::istream& in);
std::vector<double> read_series(const std::filesystem::path& path);

/// Writes "index,value" rows under that header.
void write_series(std::ostream& out, std::span<const double> values);
void write_series(const std::filesystem::path& path, std::span<const double> values);

/// Splits a CSV line on commas (no quoting).
std::vector<std::string> split_line(const std::string& line);

}  // namespace mordred::csv
