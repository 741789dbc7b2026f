#include "mordred/preprocess.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "mordred/common.hpp"

namespace mordred::preprocess {

namespace {

std::pair<double, double> mean_and_std(std::span<const double> v) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / n)};
}

}  // namespace

Detrended detrend(std::span<const double> series, std::size_t period) {
    require(series.size() >= 3, "detrending needs at least 3 samples");
    for (double x : series) require(std::isfinite(x), "series contains non-finite values");
    const std::size_t n = series.size();
    const double nd = static_cast<double>(n);
    const double t_mean = 0.5 * (nd - 1.0);
    const double y_mean = std::accumulate(series.begin(), series.end(), 0.0) / nd;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double dt = static_cast<double>(t) - t_mean;
        sxy += dt * (series[t] - y_mean);
        sxx += dt * dt;
    }
    Detrended out;
    out.record.slope = sxy / sxx;
    out.record.intercept = y_mean - out.record.slope * t_mean;
    out.values.resize(n);
    for (std::size_t t = 0; t < n; ++t)
        out.values[t] = series[t] - out.record.intercept - out.record.slope * static_cast<double>(t);

    if (period > 1) {
        require(period < n, "seasonal period must be shorter than the series");
        out.record.period = period;
        out.record.seasonal.assign(period, 0.0);
        std::vector<double> counts(period, 0.0);
        for (std::size_t t = 0; t < n; ++t) {
            out.record.seasonal[t % period] += out.values[t];
            counts[t % period] += 1.0;
        }
        for (std::size_t p = 0; p < period; ++p) out.record.seasonal[p] /= counts[p];
        for (std::size_t t = 0; t < n; ++t) out.values[t] -= out.record.seasonal[t % period];
    }
    return out;
}

Detrended detrend_standardize(std::span<const double> series, std::size_t period) {
    Detrended out = detrend(series, period);
    const auto [mean, sd] = mean_and_std(out.values);
    double range = 0.0;
    for (double x : series) range = std::max(range, std::abs(x));
    require(sd > 1e-12 * std::max(1.0, range), "series has zero variance after detrending");
    out.record.mean = mean;
    out.record.scale = sd;
    for (double& v : out.values) v = (v - mean) / sd;
    return out;
}

std::vector<double> invert(std::span<const double> values, const TransformRecord& r, std::size_t offset) {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::size_t t = offset + i;
        double v = values[i] * r.scale + r.mean;
        if (r.period > 1) v += r.seasonal[t % r.period];
        out[i] = v + r.intercept + r.slope * static_cast<double>(t);
    }
    return out;
}

DatasetSplit split_70_15_15(std::span<const double> series, bool standardize) {
    require(series.size() >= 20, "series too short to split (need at least 20 samples)");
    DatasetSplit s;
    const std::size_t n = series.size();
    s.train_end = n * 70 / 100;
    s.validation_end = n * 85 / 100;
    if (standardize) {
        const auto [mean, sd] = mean_and_std(series.first(s.train_end));
        require(sd > 0.0, "training split has zero variance");
        s.mean = mean;
        s.scale = sd;
    }
    auto take = [&](std::size_t from, std::size_t to) {
        std::vector<double> part(series.begin() + static_cast<std::ptrdiff_t>(from),
                                 series.begin() + static_cast<std::ptrdiff_t>(to));
        if (standardize)
            for (double& v : part) v = (v - s.mean) / s.scale;
        return part;
    };
    s.train = take(0, s.train_end);
    s.validation = take(s.train_end, s.validation_end);
    s.test = take(s.validation_end, n);
    return s;
}

std::vector<double> add_regularizing_noise(std::span<const double> series, double sigma, std::uint64_t seed) {
    require(sigma >= 0.0, "noise level must be nonnegative");
    std::vector<double> out(series.begin(), series.end());
    if (sigma == 0.0) return out;
    Rng rng = stream_rng(seed, 0);
    std::normal_distribution<double> normal(0.0, sigma);
    for (double& v : out) v += normal(rng);
    return out;
}

}  // namespace mordred::preprocess
