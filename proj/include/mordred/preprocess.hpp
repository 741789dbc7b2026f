#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mordred::preprocess {

/// Constants of detrend_standardize, enough to invert it.
struct TransformRecord {
    double intercept = 0.0;
    double slope = 0.0;
    std::size_t period = 0;           // 0 disables the seasonal profile
    std::vector<double> seasonal;     // mean residual per phase
    double mean = 0.0;
    double scale = 1.0;
};

struct Detrended {
    std::vector<double> values;
    TransformRecord record;
};

/// Removes the least-squares line and, for period > 1, the per-phase mean.
/// Leaves centering and scaling at identity.
Detrended detrend(std::span<const double> series, std::size_t period = 0);

/// detrend followed by centering and division by the standard deviation.
/// Throws std::invalid_argument when nothing but trend is left.
Detrended detrend_standardize(std::span<const double> series, std::size_t period = 0);

/// Inverts the transform for values whose first element sits at index `offset`
/// of the original series.
std::vector<double> invert(std::span<const double> values, const TransformRecord& record, std::size_t offset = 0);

struct DatasetSplit {
    std::vector<double> train;
    std::vector<double> validation;
    std::vector<double> test;
    std::size_t train_end = 0;       // floor(0.70 N)
    std::size_t validation_end = 0;  // floor(0.85 N)
    double mean = 0.0;               // fit on train only
    double scale = 1.0;
};

/// Contiguous 70/15/15 split. With `standardize`, every part is centred and
/// scaled by constants fit on the training part.
DatasetSplit split_70_15_15(std::span<const double> series, bool standardize = true);

/// Adds iid N(0, sigma^2) noise.
std::vector<double> add_regularizing_noise(std::span<const double> series, double sigma, std::uint64_t seed);

}  // namespace mordred::preprocess
