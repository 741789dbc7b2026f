#include "mordred/gmm.hpp"

#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "mordred/parallel.hpp"

namespace mordred::gmm {

namespace {

using boost::math::digamma;

const double kLog2Pi = std::log(2.0 * std::numbers::pi);
constexpr double kVarianceFloor = 1e-8;

struct Posterior {
    std::vector<double> alpha, beta, mean, nu, w;  // w is the Gamma scale W_k
};

// ln B(W, nu) of the one-dimensional Wishart (a Gamma distribution).
double log_wishart_norm(double w, double nu) {
    return -0.5 * nu * std::log(w) - 0.5 * nu * std::log(2.0) - std::lgamma(0.5 * nu);
}

double log_dirichlet_norm(const std::vector<double>& alpha) {
    double total = 0.0, acc = 0.0;
    for (double a : alpha) {
        total += a;
        acc -= std::lgamma(a);
    }
    return acc + std::lgamma(total);
}

GmmDensity single(double mean, double variance) { return {{1.0}, {mean}, {std::max(variance, kVarianceFloor)}}; }

StepwiseFit stepwise(const TrajectoryEnsemble& ensemble, std::size_t k, const VbOptions& options, bool parallel) {
    const auto horizon = static_cast<std::size_t>(ensemble.horizon());
    std::vector<VbFit> fits(horizon);
    parallel_for(horizon, parallel, [&](std::size_t t) {
        const Eigen::VectorXd column = ensemble.paths.col(static_cast<Eigen::Index>(t));
        fits[t] = fit_vb_gmm(std::span<const double>(column.data(), static_cast<std::size_t>(column.size())), k,
                             options);
    });
    StepwiseFit out;
    out.steps.reserve(horizon);
    for (auto& f : fits) {
        if (!f.converged) ++out.unconverged_steps;
        out.steps.push_back(std::move(f.density));
    }
    return out;
}

}  // namespace

VbFit fit_vb_gmm(std::span<const double> x, std::size_t max_components, const VbOptions& options) {
    require(!x.empty(), "GMM fit needs samples");
    require(max_components >= 1, "GMM needs at least one component");
    for (double v : x) require(std::isfinite(v), "GMM samples must be finite");

    const std::size_t n = x.size();
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);

    VbFit fit;
    if (!(var > 1e-14 * std::max(1.0, mean * mean))) {
        fit.density = single(mean, var);
        fit.converged = true;
        return fit;
    }

    const std::size_t k = max_components;
    const double alpha0 = 1.0 / static_cast<double>(k);
    const double beta0 = 1.0;
    const double m0 = mean;
    const double nu0 = 1.0;
    const double w0 = 1.0 / var;

    // Hard initial assignment to the nearest of K evenly spaced sample quantiles.
    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> centres(k);
    for (std::size_t j = 0; j < k; ++j)
        centres[j] = sorted[std::min(n - 1, static_cast<std::size_t>((static_cast<double>(j) + 0.5) / k * n))];
    std::vector<double> resp(n * k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < k; ++j)
            if (std::abs(x[i] - centres[j]) < std::abs(x[i] - centres[best])) best = j;
        resp[i * k + best] = 1.0;
    }

    Posterior q;
    q.alpha.resize(k);
    q.beta.resize(k);
    q.mean.resize(k);
    q.nu.resize(k);
    q.w.resize(k);
    std::vector<double> nk(k), xbar(k), scatter(k), e_log_pi(k), e_log_lambda(k);

    double previous = -std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
        // M-step: statistics and conjugate updates.
        for (std::size_t j = 0; j < k; ++j) {
            double s0 = 0.0, s1 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                s0 += resp[i * k + j];
                s1 += resp[i * k + j] * x[i];
            }
            nk[j] = s0;
            xbar[j] = s0 > 1e-300 ? s1 / s0 : m0;
            double s2 = 0.0;
            for (std::size_t i = 0; i < n; ++i) s2 += resp[i * k + j] * (x[i] - xbar[j]) * (x[i] - xbar[j]);
            scatter[j] = s2;  // N_k S_k
            q.alpha[j] = alpha0 + nk[j];
            q.beta[j] = beta0 + nk[j];
            q.mean[j] = (beta0 * m0 + nk[j] * xbar[j]) / q.beta[j];
            const double dm = xbar[j] - m0;
            q.w[j] = 1.0 / (1.0 / w0 + scatter[j] + beta0 * nk[j] / (beta0 + nk[j]) * dm * dm);
            q.nu[j] = nu0 + nk[j];
        }
        const double alpha_sum = std::accumulate(q.alpha.begin(), q.alpha.end(), 0.0);
        for (std::size_t j = 0; j < k; ++j) {
            e_log_pi[j] = digamma(q.alpha[j]) - digamma(alpha_sum);
            e_log_lambda[j] = digamma(0.5 * q.nu[j]) + std::log(2.0) + std::log(q.w[j]);
        }

        // Evidence lower bound for the current (responsibilities, posterior) pair.
        double elbo = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double dx = xbar[j] - q.mean[j];
            elbo += 0.5 * (nk[j] * (e_log_lambda[j] - 1.0 / q.beta[j] - kLog2Pi) -
                           q.nu[j] * q.w[j] * (scatter[j] + nk[j] * dx * dx));
            elbo += nk[j] * e_log_pi[j];
            elbo += (alpha0 - 1.0) * e_log_pi[j];
            const double dm = q.mean[j] - m0;
            elbo += 0.5 * (std::log(beta0 / (2.0 * std::numbers::pi)) + e_log_lambda[j] - beta0 / q.beta[j] -
                           beta0 * q.nu[j] * q.w[j] * dm * dm);
            elbo += log_wishart_norm(w0, nu0) + 0.5 * (nu0 - 2.0) * e_log_lambda[j] - 0.5 * q.nu[j] * q.w[j] / w0;
            elbo -= (q.alpha[j] - 1.0) * e_log_pi[j];
            const double entropy_lambda =
                -log_wishart_norm(q.w[j], q.nu[j]) - 0.5 * (q.nu[j] - 2.0) * e_log_lambda[j] + 0.5 * q.nu[j];
            elbo -= 0.5 * e_log_lambda[j] + 0.5 * std::log(q.beta[j] / (2.0 * std::numbers::pi)) - 0.5 - entropy_lambda;
        }
        elbo += log_dirichlet_norm(std::vector<double>(k, alpha0)) - log_dirichlet_norm(q.alpha);
        for (double r : resp)
            if (r > 0.0) elbo -= r * std::log(r);
        fit.elbo.push_back(elbo);

        if (std::abs(elbo - previous) <= options.tolerance * std::max(1.0, std::abs(elbo))) {
            fit.converged = true;
            break;
        }
        previous = elbo;

        // E-step: responsibilities.
        for (std::size_t i = 0; i < n; ++i) {
            double top = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < k; ++j) {
                const double d = x[i] - q.mean[j];
                const double lr = e_log_pi[j] + 0.5 * e_log_lambda[j] - 0.5 * kLog2Pi -
                                  0.5 * (1.0 / q.beta[j] + q.nu[j] * q.w[j] * d * d);
                resp[i * k + j] = lr;
                top = std::max(top, lr);
            }
            double total = 0.0;
            for (std::size_t j = 0; j < k; ++j) total += resp[i * k + j] = std::exp(resp[i * k + j] - top);
            for (std::size_t j = 0; j < k; ++j) resp[i * k + j] /= total;
        }
    }

    const double alpha_sum = std::accumulate(q.alpha.begin(), q.alpha.end(), 0.0);
    double kept = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        const double weight = q.alpha[j] / alpha_sum;
        if (weight < options.prune_weight) continue;
        fit.density.weights.push_back(weight);
        fit.density.means.push_back(q.mean[j]);
        fit.density.variances.push_back(std::max(1.0 / (q.nu[j] * q.w[j]), kVarianceFloor));
        kept += weight;
    }
    if (fit.density.weights.empty()) {
        fit.density = single(mean, var);
        return fit;
    }
    for (double& w : fit.density.weights) w /= kept;
    return fit;
}

StepwiseFit fit_stepwise_gmm(const TrajectoryEnsemble& ensemble, std::size_t max_components,
                             const VbOptions& options) {
    return stepwise(ensemble, max_components, options, true);
}

StepwiseFit fit_stepwise_gmm_serial(const TrajectoryEnsemble& ensemble, std::size_t max_components,
                                    const VbOptions& options) {
    return stepwise(ensemble, max_components, options, false);
}

}  // namespace mordred::gmm
