#include "mordred/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/distributions/normal.hpp>

namespace mordred {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;  // log(2*pi)

template <class Cdf>
double bisect_quantile(Cdf cdf, double alpha, double lo, double hi) {
    while (cdf(lo) > alpha) lo -= (hi - lo);
    while (cdf(hi) < alpha) hi += (hi - lo);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (hi - lo <= 1e-12 * std::max(1.0, std::abs(mid))) break;
        if (cdf(mid) < alpha) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

void GmmDensity::validate() const {
    require(!weights.empty(), "GMM needs at least one component");
    require(weights.size() == means.size() && weights.size() == variances.size(), "GMM component arrays differ in length");
    double total = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        require(weights[k] >= 0.0 && std::isfinite(weights[k]), "GMM weights must be nonnegative");
        require(variances[k] > 0.0 && std::isfinite(variances[k]), "GMM variances must be positive");
        require(std::isfinite(means[k]), "GMM means must be finite");
        total += weights[k];
    }
    require(std::abs(total - 1.0) <= 1e-9, "GMM weights must sum to 1");
}

double gaussian_logpdf(double x, double mean, double variance) {
    const double d = x - mean;
    return -0.5 * (kLogTwoPi + std::log(variance) + d * d / variance);
}

double gaussian_cdf(double x, double mean, double variance) {
    return 0.5 * std::erfc(-(x - mean) / std::sqrt(2.0 * variance));
}

double gmm_logpdf(double x, const GmmDensity& density) {
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(density.components());
    for (std::size_t k = 0; k < density.components(); ++k) {
        terms[k] = density.weights[k] > 0.0
                       ? std::log(density.weights[k]) + gaussian_logpdf(x, density.means[k], density.variances[k])
                       : -std::numeric_limits<double>::infinity();
        best = std::max(best, terms[k]);
    }
    if (!std::isfinite(best)) return best;
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - best);
    return best + std::log(acc);
}

double gmm_cdf(double x, const GmmDensity& density) {
    double acc = 0.0;
    for (std::size_t k = 0; k < density.components(); ++k)
        acc += density.weights[k] * gaussian_cdf(x, density.means[k], density.variances[k]);
    return acc;
}

ForecastDistribution ForecastDistribution::categorical(ordinal::BinPartition partition,
                                                       std::vector<ordinal::CategoricalDensity> steps) {
    for (const auto& s : steps) require(s.size() == partition.bins(), "categorical step size does not match partition");
    return ForecastDistribution(Categorical{partition, std::move(steps)});
}

ForecastDistribution ForecastDistribution::gaussian(std::vector<GaussianStep> steps) {
    for (const auto& s : steps)
        require(std::isfinite(s.mean) && s.variance > 0.0 && std::isfinite(s.variance),
                "Gaussian steps need finite mean and positive variance");
    return ForecastDistribution(std::move(steps));
}

ForecastDistribution ForecastDistribution::gmm(std::vector<GmmDensity> steps) {
    for (const auto& s : steps) s.validate();
    return ForecastDistribution(std::move(steps));
}

ForecastDistribution::Kind ForecastDistribution::kind() const {
    switch (data_.index()) {
        case 0: return Kind::categorical;
        case 1: return Kind::gaussian;
        default: return Kind::gmm;
    }
}

std::size_t ForecastDistribution::horizon() const {
    return std::visit(
        [](const auto& d) -> std::size_t {
            if constexpr (std::is_same_v<std::decay_t<decltype(d)>, Categorical>) return d.steps.size();
            else return d.size();
        },
        data_);
}

double ForecastDistribution::logpdf(std::size_t step, double x) const {
    require(step < horizon(), "forecast step out of range");
    switch (kind()) {
        case Kind::categorical: {
            const auto& c = as_categorical();
            return ordinal::piecewise_uniform_logpdf(x, c.steps[step], c.partition);
        }
        case Kind::gaussian: {
            const auto& g = as_gaussian()[step];
            return gaussian_logpdf(x, g.mean, g.variance);
        }
        default: return gmm_logpdf(x, as_gmm()[step]);
    }
}

double ForecastDistribution::cdf(std::size_t step, double x) const {
    require(step < horizon(), "forecast step out of range");
    switch (kind()) {
        case Kind::categorical: {
            const auto& c = as_categorical();
            if (x <= c.partition.lower()) return 0.0;
            if (x >= c.partition.upper()) return 1.0;
            const std::size_t bin = ordinal::encode(x, c.partition);
            double acc = 0.0;
            for (std::size_t i = 0; i < bin; ++i) acc += c.steps[step][i];
            const double frac = (x - c.partition.bin_lower(bin)) / c.partition.width();
            return std::min(1.0, acc + c.steps[step][bin] * frac);
        }
        case Kind::gaussian: {
            const auto& g = as_gaussian()[step];
            return gaussian_cdf(x, g.mean, g.variance);
        }
        default: return gmm_cdf(x, as_gmm()[step]);
    }
}

double ForecastDistribution::quantile(std::size_t step, double alpha) const {
    require(step < horizon(), "forecast step out of range");
    require(alpha > 0.0 && alpha < 1.0, "quantile level must lie in (0, 1)");
    switch (kind()) {
        case Kind::categorical: {
            const auto& c = as_categorical();
            const auto& p = c.steps[step];
            double acc = 0.0;
            std::size_t last_nonzero = 0;
            for (std::size_t i = 0; i < p.size(); ++i) {
                if (p[i] <= 0.0) continue;
                last_nonzero = i;
                if (acc + p[i] >= alpha) {
                    const double frac = std::clamp((alpha - acc) / p[i], 0.0, 1.0);
                    return c.partition.bin_lower(i) + frac * c.partition.width();
                }
                acc += p[i];
            }
            return c.partition.bin_lower(last_nonzero) + c.partition.width();
        }
        case Kind::gaussian: {
            const auto& g = as_gaussian()[step];
            return boost::math::quantile(boost::math::normal(g.mean, std::sqrt(g.variance)), alpha);
        }
        default: {
            const auto& d = as_gmm()[step];
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (std::size_t k = 0; k < d.components(); ++k) {
                const double sd = std::sqrt(d.variances[k]);
                lo = std::min(lo, d.means[k] - 10.0 * sd);
                hi = std::max(hi, d.means[k] + 10.0 * sd);
            }
            return bisect_quantile([&](double x) { return gmm_cdf(x, d); }, alpha, lo, hi);
        }
    }
}

double ForecastDistribution::mean(std::size_t step) const {
    require(step < horizon(), "forecast step out of range");
    switch (kind()) {
        case Kind::categorical: {
            const auto& c = as_categorical();
            double acc = 0.0;
            for (std::size_t i = 0; i < c.partition.bins(); ++i) acc += c.steps[step][i] * c.partition.midpoint(i);
            return acc;
        }
        case Kind::gaussian: return as_gaussian()[step].mean;
        default: {
            const auto& d = as_gmm()[step];
            double acc = 0.0;
            for (std::size_t k = 0; k < d.components(); ++k) acc += d.weights[k] * d.means[k];
            return acc;
        }
    }
}

double ForecastDistribution::sample(std::size_t step, Rng& rng) const {
    require(step < horizon(), "forecast step out of range");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    switch (kind()) {
        case Kind::categorical: {
            const auto& c = as_categorical();
            const auto& p = c.steps[step].probs();
            std::discrete_distribution<std::size_t> pick(p.begin(), p.end());
            const std::size_t bin = pick(rng);
            return c.partition.bin_lower(bin) + unit(rng) * c.partition.width();
        }
        case Kind::gaussian: {
            const auto& g = as_gaussian()[step];
            return std::normal_distribution<double>(g.mean, std::sqrt(g.variance))(rng);
        }
        default: {
            const auto& d = as_gmm()[step];
            std::discrete_distribution<std::size_t> pick(d.weights.begin(), d.weights.end());
            const std::size_t k = pick(rng);
            return std::normal_distribution<double>(d.means[k], std::sqrt(d.variances[k]))(rng);
        }
    }
}

}  // namespace mordred
