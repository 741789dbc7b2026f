#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

namespace mordred::cli {

inline constexpr std::array<const char*, 6> kCommands{"generate", "train", "forecast", "evaluate", "events", "plot"};

inline bool is_command(const std::string& word) {
    return std::any_of(kCommands.begin(), kCommands.end(), [&](const char* c) { return word == c; });
}

nlohmann::json load_json(const std::filesystem::path& path);
void save_json(const std::filesystem::path& path, const nlohmann::json& value);

/// Row `label` of a tuned hyperparameter table, looked up directly or through
/// the table's alias map.
std::optional<nlohmann::json> tuned_row(const std::filesystem::path& table, const std::string& label);

}  // namespace mordred::cli
