#pragma once

#include <span>
#include <vector>

namespace mordred::emd {

struct SiftOptions {
    std::size_t max_imfs = 10;
    std::size_t max_sifts = 100;  // per IMF
    double sd_threshold = 0.3;
};

struct Decomposition {
    std::vector<std::vector<double>> imfs;
    std::vector<double> residual;
    bool degenerate = false;  // fewer than 4 extrema: the input is returned as the only IMF
};

/// Empirical mode decomposition. Envelopes are natural cubic splines through
/// the extrema with two mirrored extrema beyond each end. A sift stops when
/// sum (h_prev - h)^2 / sum h_prev^2 < sd_threshold or when extrema and zero
/// crossings differ by at most one; extraction stops at a monotone residual.
Decomposition emd_sift(std::span<const double> series, const SiftOptions& options = {});

/// Natural cubic spline through (x, y), evaluated at 0, 1, ..., count - 1.
/// x must be strictly increasing with at least two points.
std::vector<double> natural_spline(std::span<const double> x, std::span<const double> y, std::size_t count);

}  // namespace mordred::emd
