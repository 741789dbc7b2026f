#pragma once

#include <span>
#include <vector>

#include "mordred/distribution.hpp"

namespace mordred::ar {

struct ArModel {
    std::vector<double> coefficients;  // phi_1..phi_p, phi_1 multiplies the latest value
    double innovation_variance = 1.0;
    double observation_variance = 1e-6;

    std::size_t order() const { return coefficients.size(); }
};

/// Least-squares AR(p) fit without intercept. Needs more than 10p samples.
/// Falls back to a 1e-8 ridge when the lagged design is rank deficient.
ArModel fit_ar(std::span<const double> series, std::size_t order);

/// Kalman filter in companion form over `history`, then `horizon` predict-only
/// steps. Step k holds the predicted observation mean and variance.
ForecastDistribution kalman_forecast(const ArModel& model, std::span<const double> history, std::size_t horizon);

}  // namespace mordred::ar
