#pragma once

#include <span>
#include <vector>

#include "mordred/distribution.hpp"
#include "mordred/ensemble.hpp"

// One-dimensional variational Bayesian Gaussian mixture (Dirichlet weights,
// Normal-Gamma components) and its per-step application to trajectory ensembles.
namespace mordred::gmm {

struct VbOptions {
    std::size_t max_iterations = 500;
    double tolerance = 1e-8;      // relative ELBO change
    double prune_weight = 0.01;   // components lighter than this are dropped
};

struct VbFit {
    GmmDensity density;
    std::vector<double> elbo;  // one entry per iteration
    bool converged = false;
};

/// Priors: concentration 1/K, beta0 = 1, m0 = sample mean, nu0 = 1,
/// W0 = 1/sample variance. Responsibilities start from nearest-quantile
/// assignment, so the fit is deterministic.
VbFit fit_vb_gmm(std::span<const double> samples, std::size_t max_components, const VbOptions& options = {});

struct StepwiseFit {
    std::vector<GmmDensity> steps;
    std::size_t unconverged_steps = 0;
};

/// Independent VB-GMM fit to the ensemble column at every horizon step.
StepwiseFit fit_stepwise_gmm(const TrajectoryEnsemble& ensemble, std::size_t max_components,
                             const VbOptions& options = {});
StepwiseFit fit_stepwise_gmm_serial(const TrajectoryEnsemble& ensemble, std::size_t max_components,
                                    const VbOptions& options = {});

}  // namespace mordred::gmm
