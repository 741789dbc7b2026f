#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <utility>

#include "mordred/ensemble.hpp"

// Autoregressive Gaussian process with a Matern 5/2 ARD kernel plus white noise.
namespace mordred::gp {

struct GpHyper {
    double signal_variance = 1.0;
    Eigen::VectorXd lengthscales;  // one per input dimension
    double noise_variance = 1e-2;

    /// [log sf2, log l_1..l_P, log sn2]
    Eigen::VectorXd to_log() const;
    static GpHyper from_log(const Eigen::VectorXd& log_params);
};

/// Kernel value without the white-noise term.
double matern52(std::span<const double> a, std::span<const double> b, const GpHyper& hyper);

struct Likelihood {
    double value = 0.0;
    Eigen::VectorXd gradient;  // with respect to GpHyper::to_log() coordinates
};

/// Log marginal likelihood of `targets` given row-wise `inputs`. Throws
/// NumericalError if K + sn2 I cannot be factorized even with 1e-4 jitter.
Likelihood log_marginal_likelihood(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                                   const GpHyper& hyper, bool with_gradient = true);

struct GpModel {
    GpHyper hyper;
    Eigen::MatrixXd inputs;  // n x P, one window per row
    Eigen::VectorXd targets;
    Eigen::MatrixXd cholesky;  // lower factor of K + (sn2 + jitter) I
    Eigen::VectorXd alpha;
    double jitter = 0.0;
    double log_likelihood = 0.0;

    Eigen::Index lookback() const { return inputs.cols(); }
};

struct FitOptions {
    std::size_t restarts = 3;
    std::size_t max_iterations = 100;
    double tolerance = 1e-6;
    std::uint64_t seed = 0;
    bool parallel = true;
};

/// Factorizes the kernel matrix for fixed hyperparameters.
GpModel condition(Eigen::MatrixXd inputs, Eigen::VectorXd targets, GpHyper hyper);

/// Data-driven starting point: sf2 = var(y), l_d = sqrt(P) * std of column d, sn2 = 0.01 var(y).
GpHyper default_hyper(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets);

/// Gradient ascent with backtracking in log-hyperparameter space from `init`
/// and from `restarts` random perturbations of it; keeps the best optimum.
GpModel fit_gp(Eigen::MatrixXd inputs, Eigen::VectorXd targets, const GpHyper& init, const FitOptions& options = {});

/// Posterior predictive mean and variance of the next value (noise included).
std::pair<double, double> gp_predict(const GpModel& model, std::span<const double> window);

/// Lagged windows of `series` as (inputs, next-value targets). When more than
/// `max_points` windows exist an evenly strided subset is kept.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> training_windows(std::span<const double> series, std::size_t lookback,
                                                             std::size_t max_points = 2000);

/// Monte-Carlo propagation: every trajectory repeatedly predicts, samples and
/// slides its window. Trajectory s draws from stream s of `seed`.
TrajectoryEnsemble gp_mc_trajectories(const GpModel& model, std::span<const double> seed_window, std::size_t horizon,
                                      std::size_t count, std::uint64_t seed);
TrajectoryEnsemble gp_mc_trajectories_serial(const GpModel& model, std::span<const double> seed_window,
                                             std::size_t horizon, std::size_t count, std::uint64_t seed);

}  // namespace mordred::gp
