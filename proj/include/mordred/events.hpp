#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mordred/emd.hpp"
#include "mordred/ensemble.hpp"

// Event-timing analysis: peak extraction, kernel density over timings and
// timing likelihoods.
namespace mordred::events {

struct PeakParams {
    double threshold = 0.0;
    std::size_t min_distance = 5;
};

/// Strict local maxima (plateaus report their first index) at or above the
/// threshold. Peaks closer than min_distance are suppressed greedily, highest
/// first, earlier index first on equal height. Result is sorted.
std::vector<std::size_t> detect_peaks(std::span<const double> series, const PeakParams& params = {});

/// Peaks of every trajectory, pooled in trajectory order. Throws
/// std::runtime_error when no trajectory has a peak.
std::vector<double> trajectory_timings(const TrajectoryEnsemble& ensemble, const PeakParams& params = {});
std::vector<double> trajectory_timings_serial(const TrajectoryEnsemble& ensemble, const PeakParams& params = {});

class KdeDensity {
public:
    KdeDensity(std::vector<double> samples, double bandwidth);

    double operator()(double t) const;
    double bandwidth() const { return bandwidth_; }
    const std::vector<double>& samples() const { return samples_; }

private:
    std::vector<double> samples_;
    double bandwidth_;
};

/// 0.9 min(std, IQR / 1.34) n^(-1/5), floored at 1.
double silverman_bandwidth(std::span<const double> samples);

/// Gaussian KDE; Silverman's rule when no bandwidth is given.
KdeDensity kde_fit(std::vector<double> samples, std::optional<double> bandwidth = std::nullopt);

/// -sum log p(t_i), densities floored at 1e-300.
double timing_nll(std::span<const std::size_t> true_timings, const KdeDensity& density);

/// NLL of L' timings under a uniform density over a horizon of P_h steps.
double uniform_timing_nll(std::size_t timings, std::size_t horizon);

/// Which IMF carries the events: an explicit index, or the one whose dominant
/// DFT period is closest to the dominant period of the whole signal.
struct ImfSelector {
    std::optional<std::size_t> index;
    static ImfSelector dominant_period() { return {}; }
    static ImfSelector explicit_index(std::size_t i) { return {i}; }
};

/// Period (in samples) of the largest non-constant DFT bin of the de-meaned series.
double dominant_period(std::span<const double> series);

struct TrueTimings {
    std::vector<std::size_t> peaks;
    std::size_t imf = 0;
    emd::Decomposition decomposition;
};

TrueTimings true_timings(std::span<const double> ground_truth, const ImfSelector& selector,
                         const PeakParams& params = {}, const emd::SiftOptions& sift = {});

}  // namespace mordred::events
