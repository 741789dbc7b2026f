#include "mordred/ordinal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mordred/common.hpp"

namespace mordred::ordinal {

BinPartition::BinPartition(double lower, double upper, std::size_t bins)
    : lower_(lower), upper_(upper), bins_(bins) {
    require(std::isfinite(lower) && std::isfinite(upper), "partition bounds must be finite");
    require(lower < upper, "partition lower bound must be below upper bound");
    require(bins >= 2, "partition needs at least 2 bins");
}

double BinPartition::bin_lower(std::size_t i) const {
    return lower_ + static_cast<double>(i) * width();
}

double BinPartition::midpoint(std::size_t i) const {
    return lower_ + (static_cast<double>(i) + 0.5) * width();
}

CategoricalDensity::CategoricalDensity(std::vector<double> probs) : probs_(std::move(probs)) {
    require(!probs_.empty(), "categorical density must be non-empty");
    double total = 0.0;
    for (double p : probs_) {
        require(std::isfinite(p) && p >= 0.0, "categorical probabilities must be finite and nonnegative");
        total += p;
    }
    require(std::abs(total - 1.0) <= 1e-9, "categorical probabilities must sum to 1");
}

CategoricalDensity CategoricalDensity::uniform(std::size_t bins) {
    return CategoricalDensity(std::vector<double>(bins, 1.0 / static_cast<double>(bins)));
}

CategoricalDensity CategoricalDensity::one_hot(std::size_t bins, std::size_t index) {
    require(index < bins, "one-hot index out of range");
    std::vector<double> p(bins, 0.0);
    p[index] = 1.0;
    return CategoricalDensity(std::move(p));
}

BinPartition fit_partition(std::span<const double> series, std::size_t bins, double pad_fraction) {
    require(!series.empty(), "fit_partition: empty series");
    require(pad_fraction >= 0.0, "fit_partition: pad_fraction must be nonnegative");
    for (double x : series) require(std::isfinite(x), "fit_partition: non-finite value in series");
    const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
    double range = *hi - *lo;
    if (range == 0.0) {
        require(pad_fraction > 0.0, "fit_partition: constant series needs pad_fraction > 0");
        range = 1.0;
    }
    return BinPartition(*lo - pad_fraction * range, *hi + pad_fraction * range, bins);
}

std::size_t encode(double x, const BinPartition& partition) {
    require(std::isfinite(x), "encode: non-finite value");
    if (x <= partition.lower()) return 0;
    if (x >= partition.upper()) return partition.bins() - 1;
    auto i = static_cast<std::size_t>(std::floor((x - partition.lower()) / partition.width()));
    // floor() can land one bin off at boundaries; settle against the exact edges.
    i = std::min(i, partition.bins() - 1);
    while (i > 0 && x < partition.bin_lower(i)) --i;
    while (i + 1 < partition.bins() && x >= partition.bin_lower(i + 1)) ++i;
    return i;
}

double decode(std::size_t index, const BinPartition& partition) {
    require(index < partition.bins(), "decode: bin index out of range");
    return partition.midpoint(index);
}

OrdinalSequence quantize(std::span<const double> series, const BinPartition& partition) {
    OrdinalSequence out{{}, partition};
    out.indices.reserve(series.size());
    for (double x : series) out.indices.push_back(encode(x, partition));
    return out;
}

double piecewise_uniform_logpdf(double x, const CategoricalDensity& density, const BinPartition& partition) {
    require(density.size() == partition.bins(), "density size does not match partition");
    const double p = std::max(density[encode(x, partition)], kProbFloor);
    return std::log(p / partition.width());
}

double sequence_nll(std::span<const double> truth, std::span<const CategoricalDensity> densities,
                    const BinPartition& partition) {
    require(truth.size() == densities.size(), "sequence_nll: length mismatch");
    double nll = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) nll -= piecewise_uniform_logpdf(truth[k], densities[k], partition);
    return nll;
}

}  // namespace mordred::ordinal
