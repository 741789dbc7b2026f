#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include "mordred/common.hpp"
#include "mordred/ordinal.hpp"

namespace mordred {

struct GaussianStep {
    double mean = 0.0;
    double variance = 1.0;
};

/// One-dimensional Gaussian mixture: weights sum to 1, variances positive.
struct GmmDensity {
    std::vector<double> weights;
    std::vector<double> means;
    std::vector<double> variances;

    std::size_t components() const { return weights.size(); }
    /// Throws std::invalid_argument when the invariants do not hold.
    void validate() const;
};

double gaussian_logpdf(double x, double mean, double variance);
double gaussian_cdf(double x, double mean, double variance);

/// Log mixture density via log-sum-exp.
double gmm_logpdf(double x, const GmmDensity& density);
double gmm_cdf(double x, const GmmDensity& density);

/// Per-step predictive densities over a forecast horizon: categorical
/// (piecewise uniform over a bin partition), Gaussian, or Gaussian mixture.
class ForecastDistribution {
public:
    enum class Kind { categorical, gaussian, gmm };

    struct Categorical {
        ordinal::BinPartition partition;
        std::vector<ordinal::CategoricalDensity> steps;
    };

    static ForecastDistribution categorical(ordinal::BinPartition partition,
                                            std::vector<ordinal::CategoricalDensity> steps);
    static ForecastDistribution gaussian(std::vector<GaussianStep> steps);
    static ForecastDistribution gmm(std::vector<GmmDensity> steps);

    Kind kind() const;
    std::size_t horizon() const;

    double logpdf(std::size_t step, double x) const;
    double cdf(std::size_t step, double x) const;
    /// Inverse CDF. Categorical steps interpolate linearly inside the bin;
    /// Gaussian steps are exact; mixture steps bisect the CDF to 1e-9.
    double quantile(std::size_t step, double alpha) const;
    double mean(std::size_t step) const;
    double sample(std::size_t step, Rng& rng) const;

    const Categorical& as_categorical() const { return std::get<Categorical>(data_); }
    const std::vector<GaussianStep>& as_gaussian() const { return std::get<std::vector<GaussianStep>>(data_); }
    const std::vector<GmmDensity>& as_gmm() const { return std::get<std::vector<GmmDensity>>(data_); }

private:
    using Data = std::variant<Categorical, std::vector<GaussianStep>, std::vector<GmmDensity>>;
    explicit ForecastDistribution(Data data) : data_(std::move(data)) {}
    Data data_;
};

}  // namespace mordred
