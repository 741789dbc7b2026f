#include "mordred/csv_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace mordred::csv {

namespace {

bool parse_double(std::string field, double& out) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    std::size_t start = field.find_first_not_of(' ');
    if (start == std::string::npos) return false;
    const char* begin = field.data() + start;
    const char* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

}  // namespace

std::string format(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        fields.push_back(line.substr(start, comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return fields;
}

std::vector<double> read_series(std::istream& in) {
    std::vector<double> values;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line[0] == '#' || line == "\r") continue;
        const auto fields = split_line(line);
        double v = 0.0;
        if (!parse_double(fields.back(), v)) {
            if (values.empty()) continue;  // header
            throw std::runtime_error("row " + std::to_string(row) + ": cannot parse '" + fields.back() + "'");
        }
        values.push_back(v);
    }
    return values;
}

std::vector<double> read_series(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_series(in);
}

void write_series(std::ostream& out, std::span<const double> values) {
    out << "index,value\n";
    for (std::size_t i = 0; i < values.size(); ++i) out << i << ',' << format(values[i]) << '\n';
}

void write_series(const std::filesystem::path& path, std::span<const double> values) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_series(out, values);
}

}  // namespace mordred::csv
