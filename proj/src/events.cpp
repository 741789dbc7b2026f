#include "mordred/events.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <unsupported/Eigen/FFT>

#include "mordred/parallel.hpp"

namespace mordred::events {

namespace {

double interpolated_quantile(std::vector<double> sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<double> timings(const TrajectoryEnsemble& ensemble, const PeakParams& params, bool parallel) {
    const auto count = static_cast<std::size_t>(ensemble.size());
    require(count > 0, "trajectory ensemble is empty");
    std::vector<std::vector<std::size_t>> per(count);
    parallel_for(count, parallel, [&](std::size_t s) {
        const Eigen::VectorXd row = ensemble.paths.row(static_cast<Eigen::Index>(s)).transpose();
        per[s] = detect_peaks(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), params);
    });
    std::vector<double> pooled;
    for (const auto& p : per)
        for (std::size_t t : p) pooled.push_back(static_cast<double>(t));
    if (pooled.empty()) throw std::runtime_error("no events found in any trajectory");
    return pooled;
}

}  // namespace

std::vector<std::size_t> detect_peaks(std::span<const double> x, const PeakParams& params) {
    require(params.min_distance >= 1, "min_distance must be at least 1");
    std::vector<std::size_t> candidates;
    const std::size_t n = x.size();
    std::size_t i = 1;
    while (i + 1 < n) {
        if (x[i] > x[i - 1]) {
            std::size_t j = i;
            while (j + 1 < n && x[j + 1] == x[i]) ++j;
            if (j + 1 < n && x[j + 1] < x[i] && x[i] >= params.threshold) candidates.push_back(i);
            i = j + 1;
        } else {
            ++i;
        }
    }

    std::vector<std::size_t> order = candidates;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });
    std::vector<std::size_t> kept;
    for (std::size_t c : order) {
        const bool clash = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
            return (c > k ? c - k : k - c) < params.min_distance;
        });
        if (!clash) kept.push_back(c);
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

std::vector<double> trajectory_timings(const TrajectoryEnsemble& ensemble, const PeakParams& params) {
    return timings(ensemble, params, true);
}

std::vector<double> trajectory_timings_serial(const TrajectoryEnsemble& ensemble, const PeakParams& params) {
    return timings(ensemble, params, false);
}

KdeDensity::KdeDensity(std::vector<double> samples, double bandwidth)
    : samples_(std::move(samples)), bandwidth_(bandwidth) {
    require(!samples_.empty(), "KDE needs at least one sample");
    require(bandwidth_ > 0.0 && std::isfinite(bandwidth_), "KDE bandwidth must be positive");
}

double KdeDensity::operator()(double t) const {
    const double norm = 1.0 / (bandwidth_ * std::sqrt(2.0 * std::numbers::pi) * static_cast<double>(samples_.size()));
    double acc = 0.0;
    for (double s : samples_) {
        const double u = (t - s) / bandwidth_;
        acc += std::exp(-0.5 * u * u);
    }
    return norm * acc;
}

double silverman_bandwidth(std::span<const double> samples) {
    require(!samples.empty(), "bandwidth needs samples");
    const double n = static_cast<double>(samples.size());
    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
    double ss = 0.0;
    for (double s : samples) ss += (s - mean) * (s - mean);
    const double sd = samples.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double iqr = interpolated_quantile(sorted, 0.75) - interpolated_quantile(sorted, 0.25);
    const double h = 0.9 * std::min(sd, iqr / 1.34) * std::pow(n, -0.2);
    return std::max(h, 1.0);
}

KdeDensity kde_fit(std::vector<double> samples, std::optional<double> bandwidth) {
    const double h = bandwidth ? *bandwidth : silverman_bandwidth(samples);
    return KdeDensity(std::move(samples), h);
}

double timing_nll(std::span<const std::size_t> true_timings, const KdeDensity& density) {
    require(!true_timings.empty(), "timing NLL needs at least one true timing");
    double acc = 0.0;
    for (std::size_t t : true_timings) acc -= std::log(std::max(density(static_cast<double>(t)), 1e-300));
    return acc;
}

double uniform_timing_nll(std::size_t timings, std::size_t horizon) {
    require(horizon >= 1, "horizon must be positive");
    return static_cast<double>(timings) * std::log(static_cast<double>(horizon));
}

double dominant_period(std::span<const double> series) {
    require(series.size() >= 4, "series too short for a period estimate");
    const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(series.size());
    std::vector<double> centred(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) centred[i] = series[i] - mean;
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spectrum;
    fft.fwd(spectrum, centred);
    std::size_t best = 1;
    for (std::size_t k = 2; k <= series.size() / 2; ++k)
        if (std::abs(spectrum[k]) > std::abs(spectrum[best])) best = k;
    return static_cast<double>(series.size()) / static_cast<double>(best);
}

TrueTimings true_timings(std::span<const double> ground_truth, const ImfSelector& selector, const PeakParams& params,
                         const emd::SiftOptions& sift) {
    TrueTimings out;
    out.decomposition = emd::emd_sift(ground_truth, sift);
    const auto& imfs = out.decomposition.imfs;
    if (selector.index) {
        require(*selector.index < imfs.size(), "IMF index " + std::to_string(*selector.index) + " out of range (" +
                                                   std::to_string(imfs.size()) + " IMFs)");
        out.imf = *selector.index;
    } else {
        const double target = dominant_period(ground_truth);
        double best_gap = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < imfs.size(); ++k) {
            const double gap = std::abs(std::log(dominant_period(imfs[k]) / target));
            if (gap < best_gap) {
                best_gap = gap;
                out.imf = k;
            }
        }
    }
    out.peaks = detect_peaks(imfs[out.imf], params);
    return out;
}

}  // namespace mordred::events
