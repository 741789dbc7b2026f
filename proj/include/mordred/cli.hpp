#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mordred/distribution.hpp"
#include "mordred/ensemble.hpp"
#include "mordred/preprocess.hpp"

namespace mordred::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;

inline constexpr int kArtifactSchema = 1;

/// Runs one command line (without the program name) and returns the exit code.
/// Errors are reported on stderr.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

/// Expands `--config FILE` into flags placed before the explicit ones, so
/// flags given on the command line win. JSON arrays become comma lists and
/// booleans become bare flags.
std::vector<std::string> expand_config(const std::vector<std::string>& args);

/// "64,128" -> {64, 128}
std::vector<double> parse_number_list(const std::string& text);

// ---- datasets -------------------------------------------------------------

struct PrepOptions {
    bool detrend = false;
    std::size_t period = 0;
};

/// A CSV series run through the common pipeline: optional detrending, then the
/// 70/15/15 split standardized with training statistics.
struct PreparedData {
    std::string name;  // file stem
    std::vector<double> raw;
    preprocess::DatasetSplit split;
    std::vector<double> series;  // standardized train + validation + test

    /// Observations available when forecasting the test segment.
    std::vector<double> context() const;
    /// First `horizon` test values; throws if the test split is shorter.
    std::vector<double> truth(std::size_t horizon) const;
};

PreparedData prepare_dataset(const std::filesystem::path& csv, const PrepOptions& options);

// ---- forecast artifacts ---------------------------------------------------

struct ForecastArtifact {
    std::string model;
    std::string dataset;
    std::uint64_t seed = 0;
    std::size_t origin = 0;  // index in the series of the first forecast step
    PrepOptions prep;
    ForecastDistribution distribution = ForecastDistribution::gaussian({});
    TrajectoryEnsemble trajectories;
};

inline const std::vector<double> kQuantileLevels{0.025, 0.25, 0.5, 0.75, 0.975};

/// Writes forecast.json, densities.csv, quantiles.csv and trajectories.csv.
void write_forecast(const std::filesystem::path& dir, const ForecastArtifact& artifact);
ForecastArtifact read_forecast(const std::filesystem::path& dir);

// ---- figures --------------------------------------------------------------

struct TimingPanel {
    std::vector<double> density;             // p(t) at t = 0 .. horizon-1
    std::vector<std::size_t> true_timings;  // marked on the panel
};

/// Fan chart: 2.5-97.5% band, median line and optional truth overlay, with an
/// optional event-timing density panel underneath.
std::string fan_chart_svg(const ForecastDistribution& dist, const std::vector<double>& truth,
                          const std::string& title, const std::optional<TimingPanel>& timing = std::nullopt);

}  // namespace mordred::cli
