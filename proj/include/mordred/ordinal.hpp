#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mordred::ordinal {

/// Floor applied to probabilities before taking logs.
inline constexpr double kProbFloor = 1e-12;

/// Equal-width partition of [lower, upper] into `bins` intervals. Bins are
/// half-open [lo + i*w, lo + (i+1)*w) except the last, which is closed.
class BinPartition {
public:
    BinPartition(double lower, double upper, std::size_t bins);

    double lower() const { return lower_; }
    double upper() const { return upper_; }
    std::size_t bins() const { return bins_; }
    double width() const { return (upper_ - lower_) / static_cast<double>(bins_); }
    double bin_lower(std::size_t i) const;
    double midpoint(std::size_t i) const;

    bool operator==(const BinPartition&) const = default;

private:
    double lower_;
    double upper_;
    std::size_t bins_;
};

/// Probability vector over the bins of a partition.
class CategoricalDensity {
public:
    CategoricalDensity() = default;
    /// Throws if any entry is negative/non-finite or the sum is not 1 within 1e-9.
    explicit CategoricalDensity(std::vector<double> probs);

    static CategoricalDensity uniform(std::size_t bins);
    static CategoricalDensity one_hot(std::size_t bins, std::size_t index);

    std::size_t size() const { return probs_.size(); }
    double operator[](std::size_t i) const { return probs_[i]; }
    const std::vector<double>& probs() const { return probs_; }

private:
    std::vector<double> probs_;
};

/// Bin indices of a quantized series together with the partition they index.
struct OrdinalSequence {
    std::vector<std::size_t> indices;
    BinPartition partition;
};

/// Bounds are the series min/max widened on each side by pad_fraction * range.
/// A constant series uses a unit reference range, so it needs pad_fraction > 0.
BinPartition fit_partition(std::span<const double> series, std::size_t bins, double pad_fraction = 0.05);

/// Values outside the partition clamp to the edge bins.
std::size_t encode(double x, const BinPartition& partition);
double decode(std::size_t index, const BinPartition& partition);
OrdinalSequence quantize(std::span<const double> series, const BinPartition& partition);

/// log(p_i / |C_i|) for the bin containing x, with p_i floored at kProbFloor.
double piecewise_uniform_logpdf(double x, const CategoricalDensity& density, const BinPartition& partition);

/// Negative log-likelihood of `truth` under per-step piecewise-uniform densities.
double sequence_nll(std::span<const double> truth, std::span<const CategoricalDensity> densities,
                    const BinPartition& partition);

}  // namespace mordred::ordinal
