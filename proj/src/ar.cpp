#include "mordred/ar.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace mordred::ar {

ArModel fit_ar(std::span<const double> series, std::size_t order) {
    require(order >= 1, "AR order must be at least 1");
    require(series.size() > 10 * order, "AR(p) fit needs more than 10p samples");
    const auto p = static_cast<Eigen::Index>(order);
    const auto rows = static_cast<Eigen::Index>(series.size()) - p;
    Eigen::MatrixXd design(rows, p);
    Eigen::VectorXd target(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto t = static_cast<std::size_t>(r + p);
        target(r) = series[t];
        for (Eigen::Index j = 0; j < p; ++j) design(r, j) = series[t - 1 - static_cast<std::size_t>(j)];
    }

    Eigen::MatrixXd gram = design.transpose() * design;
    const Eigen::VectorXd rhs = design.transpose() * target;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    const double scale = std::max(1.0, gram.diagonal().maxCoeff());
    const bool singular = ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
                          ldlt.vectorD().minCoeff() <= 1e-12 * scale;
    if (singular) {
        gram.diagonal().array() += 1e-8;
        ldlt.compute(gram);
    }
    const Eigen::VectorXd phi = ldlt.solve(rhs);
    if (!phi.allFinite()) throw NumericalError("AR least-squares solution is not finite");

    ArModel model;
    model.coefficients.assign(phi.data(), phi.data() + p);
    const Eigen::VectorXd residual = target - design * phi;
    model.innovation_variance = std::max(residual.squaredNorm() / static_cast<double>(rows), 1e-12);
    return model;
}

ForecastDistribution kalman_forecast(const ArModel& model, std::span<const double> history, std::size_t horizon) {
    const auto p = static_cast<Eigen::Index>(model.order());
    require(p >= 1, "AR model has no coefficients");
    require(history.size() >= model.order(), "history shorter than the AR order");
    require(model.innovation_variance >= 0.0 && model.observation_variance >= 0.0, "variances must be nonnegative");

    Eigen::MatrixXd transition = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index j = 0; j < p; ++j) transition(0, j) = model.coefficients[static_cast<std::size_t>(j)];
    for (Eigen::Index j = 1; j < p; ++j) transition(j, j - 1) = 1.0;

    // Moderate diffuse prior: large enough to be uninformative, small enough
    // that the first updates do not lose precision to cancellation.
    const double mean = std::accumulate(history.begin(), history.end(), 0.0) / static_cast<double>(history.size());
    double spread = 0.0;
    for (double x : history) spread += (x - mean) * (x - mean);
    spread /= static_cast<double>(history.size());
    const double prior_scale = std::max({spread + mean * mean, model.innovation_variance, 1.0});

    Eigen::VectorXd state = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd cov = prior_scale * Eigen::MatrixXd::Identity(p, p);

    auto predict = [&] {
        state = transition * state;
        cov = transition * cov * transition.transpose();
        cov(0, 0) += model.innovation_variance;
    };
    auto update = [&](double y) {
        const double s = cov(0, 0) + model.observation_variance;
        if (s <= 0.0) return;
        const Eigen::VectorXd gain = cov.col(0) / s;
        state += gain * (y - state(0));
        // Joseph form keeps the covariance symmetric and positive semi-definite.
        Eigen::MatrixXd a = -gain * Eigen::RowVectorXd::Unit(p, 0);
        a.diagonal().array() += 1.0;
        cov = a * cov * a.transpose() + model.observation_variance * gain * gain.transpose();
        cov = 0.5 * (cov + cov.transpose());
    };

    for (std::size_t t = 0; t < history.size(); ++t) {
        if (t > 0) predict();
        update(history[t]);
    }
    if (!state.allFinite() || !cov.allFinite()) throw NumericalError("Kalman filter produced non-finite values");

    std::vector<GaussianStep> steps;
    steps.reserve(horizon);
    for (std::size_t k = 0; k < horizon; ++k) {
        predict();
        const double variance = cov(0, 0) + model.observation_variance;
        if (!std::isfinite(state(0)) || !std::isfinite(variance))
            throw NumericalError("Kalman prediction became non-finite at step " + std::to_string(k + 1));
        steps.push_back({state(0), std::max(variance, 1e-300)});
    }
    return ForecastDistribution::gaussian(std::move(steps));
}

}  // namespace mordred::ar
