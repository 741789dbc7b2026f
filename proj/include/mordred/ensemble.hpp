#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>

#include "mordred/distribution.hpp"

namespace mordred {

/// S sampled future paths, one per row, P_h horizon steps per column.
struct TrajectoryEnsemble {
    enum class Origin { gp, model };

    Eigen::MatrixXd paths;
    Origin origin = Origin::model;

    Eigen::Index size() const { return paths.rows(); }
    Eigen::Index horizon() const { return paths.cols(); }
};

/// Per-step sample mean and population variance (1/S normalization). S >= 2.
/// Variances may be zero; see gaussian_with_floor.
std::vector<GaussianStep> correct_moments(const TrajectoryEnsemble& ensemble);

/// Gaussian forecast with every variance raised to at least `floor`.
ForecastDistribution gaussian_with_floor(std::vector<GaussianStep> steps, double floor = 1e-8);

/// Independent per-step draws from a forecast distribution.
TrajectoryEnsemble sample_trajectories(const ForecastDistribution& dist, std::size_t count, std::uint64_t seed);

/// CSV with one row per trajectory and one column per horizon step.
void write_ensemble_csv(std::ostream& out, const TrajectoryEnsemble& ensemble);
TrajectoryEnsemble read_ensemble_csv(std::istream& in, TrajectoryEnsemble::Origin origin);

}  // namespace mordred
