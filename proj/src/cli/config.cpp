#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "internal.hpp"
#include "mordred/cli.hpp"
#include "mordred/csv_io.hpp"

namespace mordred::cli {

namespace {

std::string flag_name(std::string key) {
    for (char& c : key)
        if (c == '_') c = '-';
    return "--" + key;
}

std::string scalar_text(const nlohmann::ordered_json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number()) return v.dump();  // shortest round-trip text
    throw std::invalid_argument("config values must be strings, numbers, booleans or arrays of those");
}

}  // namespace

nlohmann::json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

void save_json(const std::filesystem::path& path, const nlohmann::json& value) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << value.dump(2) << '\n';
}

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::vector<std::string> explicit_args;
    std::vector<std::filesystem::path> configs;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw std::invalid_argument("--config needs a file");
            configs.emplace_back(args[++i]);
        } else if (args[i].rfind("--config=", 0) == 0) {
            configs.emplace_back(args[i].substr(9));
        } else {
            explicit_args.push_back(args[i]);
        }
    }
    if (configs.empty()) return args;

    // the subcommand stays first; later config files override earlier ones
    std::vector<std::string> out;
    std::size_t rest = 0;
    while (rest < explicit_args.size() && !is_command(explicit_args[rest])) out.push_back(explicit_args[rest++]);
    if (rest < explicit_args.size()) out.push_back(explicit_args[rest++]);
    for (const auto& path : configs) {
        std::ifstream in(path);
        if (!in) throw std::invalid_argument("cannot open " + path.string());
        const auto doc = nlohmann::ordered_json::parse(in, nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) throw std::invalid_argument(path.string() + ": config must be a JSON object");
        for (const auto& [key, value] : doc.items()) {
            if (key == "schema_version" || key == "comment") continue;
            const std::string flag = flag_name(key);
            if (value.is_boolean()) {
                if (value.get<bool>()) out.push_back(flag);
            } else if (value.is_array()) {
                std::string joined;
                for (const auto& item : value) joined += (joined.empty() ? "" : ",") + scalar_text(item);
                out.push_back(flag);
                out.push_back(joined);
            } else {
                out.push_back(flag);
                out.push_back(scalar_text(value));
            }
        }
    }
    out.insert(out.end(), explicit_args.begin() + static_cast<std::ptrdiff_t>(rest), explicit_args.end());
    return out;
}

std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> out;
    for (const std::string& field : csv::split_line(text)) {
        if (field.empty()) continue;
        char* end = nullptr;
        const double v = std::strtod(field.c_str(), &end);
        if (end == field.c_str() || *end != '\0') throw std::invalid_argument("not a number: '" + field + "'");
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument("empty list: '" + text + "'");
    return out;
}

std::optional<nlohmann::json> tuned_row(const std::filesystem::path& table, const std::string& label) {
    const nlohmann::json doc = load_json(table);
    const auto& rows = doc.at("rows");
    if (rows.contains(label)) return rows.at(label);
    if (doc.contains("aliases") && doc["aliases"].contains(label)) {
        const std::string key = doc["aliases"][label].get<std::string>();
        if (rows.contains(key)) return rows.at(key);
    }
    return std::nullopt;
}

}  // namespace mordred::cli
