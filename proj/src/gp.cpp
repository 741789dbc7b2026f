#include "mordred/gp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <optional>

#include "mordred/parallel.hpp"

namespace mordred::gp {

namespace {

const double kSqrt5 = std::sqrt(5.0);
constexpr double kLogBound = 15.0;

Eigen::MatrixXd scaled(const Eigen::MatrixXd& inputs, const GpHyper& hyper) {
    return inputs * hyper.lengthscales.cwiseInverse().asDiagonal();
}

// Pairwise distances between rows of already-scaled inputs.
Eigen::MatrixXd distances(const Eigen::MatrixXd& z) {
    const Eigen::VectorXd sq = z.rowwise().squaredNorm();
    Eigen::MatrixXd r2 = -2.0 * z * z.transpose();
    r2.colwise() += sq;
    r2.rowwise() += sq.transpose();
    Eigen::MatrixXd r = r2.cwiseMax(0.0).cwiseSqrt();
    r.diagonal().setZero();
    return r;
}

double matern_of_r(double r, double sf2) {
    const double s = kSqrt5 * r;
    return sf2 * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

struct Factor {
    Eigen::MatrixXd lower;
    double jitter = 0.0;
};

Factor factorize(Eigen::MatrixXd k) {
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() == Eigen::Success) return {llt.matrixL(), 0.0};
    for (double jitter = 1e-10; jitter <= 1e-4 * 1.0000001; jitter *= 10.0) {
        Eigen::MatrixXd kj = k;
        kj.diagonal().array() += jitter;
        llt.compute(kj);
        if (llt.info() == Eigen::Success) return {llt.matrixL(), jitter};
    }
    throw NumericalError("GP kernel matrix is not positive definite even with 1e-4 jitter");
}

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& r, const GpHyper& hyper) {
    return r.unaryExpr([&](double v) { return matern_of_r(v, hyper.signal_variance); });
}

Eigen::VectorXd clamp_log(Eigen::VectorXd v) { return v.cwiseMax(-kLogBound).cwiseMin(kLogBound); }

struct Optimum {
    Eigen::VectorXd point;
    double value = -std::numeric_limits<double>::infinity();
};

Optimum ascend(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets, Eigen::VectorXd start,
               const FitOptions& options) {
    auto value_at = [&](const Eigen::VectorXd& x, bool grad) -> std::optional<Likelihood> {
        try {
            auto l = log_marginal_likelihood(inputs, targets, GpHyper::from_log(x), grad);
            if (!std::isfinite(l.value)) return std::nullopt;
            return l;
        } catch (const NumericalError&) {
            return std::nullopt;
        }
    };

    Optimum best;
    best.point = clamp_log(std::move(start));
    auto current = value_at(best.point, true);
    if (!current) return best;
    best.value = current->value;

    double step = 1.0;
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
        const double norm = current->gradient.norm();
        if (!(norm > 0.0) || !std::isfinite(norm)) break;
        const Eigen::VectorXd direction = current->gradient / norm;
        bool moved = false;
        while (step >= 1e-6) {
            Eigen::VectorXd candidate = clamp_log(best.point + step * direction);
            auto trial = value_at(candidate, false);
            if (trial && trial->value > best.value) {
                const double gain = trial->value - best.value;
                best.point = std::move(candidate);
                best.value = trial->value;
                moved = true;
                step = std::min(2.0 * step, 4.0);
                if (gain < options.tolerance * (1.0 + std::abs(best.value))) return best;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
        current = value_at(best.point, true);
        if (!current) break;
    }
    return best;
}

TrajectoryEnsemble trajectories(const GpModel& model, std::span<const double> seed_window, std::size_t horizon,
                                std::size_t count, std::uint64_t seed, bool parallel) {
    const auto p = static_cast<std::size_t>(model.lookback());
    require(seed_window.size() >= p, "seed window shorter than the GP lookback");
    require(count >= 1, "need at least one trajectory");
    TrajectoryEnsemble ens;
    ens.origin = TrajectoryEnsemble::Origin::gp;
    ens.paths.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(horizon));
    const auto tail = seed_window.subspan(seed_window.size() - p);
    parallel_for(count, parallel, [&](std::size_t s) {
        Rng rng = stream_rng(seed, s);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<double> window(tail.begin(), tail.end());
        window.reserve(p + horizon);
        for (std::size_t k = 0; k < horizon; ++k) {
            const auto [mu, var] = gp_predict(model, std::span<const double>(window).subspan(window.size() - p));
            const double x = mu + std::sqrt(var) * normal(rng);
            ens.paths(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k)) = x;
            window.push_back(x);
        }
    });
    return ens;
}

}  // namespace

Eigen::VectorXd GpHyper::to_log() const {
    Eigen::VectorXd v(lengthscales.size() + 2);
    v(0) = std::log(signal_variance);
    v.segment(1, lengthscales.size()) = lengthscales.array().log();
    v(v.size() - 1) = std::log(noise_variance);
    return v;
}

GpHyper GpHyper::from_log(const Eigen::VectorXd& log_params) {
    require(log_params.size() >= 3, "GP log-hyperparameter vector too short");
    GpHyper h;
    h.signal_variance = std::exp(log_params(0));
    h.lengthscales = log_params.segment(1, log_params.size() - 2).array().exp();
    h.noise_variance = std::exp(log_params(log_params.size() - 1));
    return h;
}

double matern52(std::span<const double> a, std::span<const double> b, const GpHyper& hyper) {
    require(a.size() == b.size() && static_cast<Eigen::Index>(a.size()) == hyper.lengthscales.size(),
            "matern52: input lengths do not match the lengthscales");
    double r2 = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        const double u = (a[d] - b[d]) / hyper.lengthscales(static_cast<Eigen::Index>(d));
        r2 += u * u;
    }
    return matern_of_r(std::sqrt(r2), hyper.signal_variance);
}

Likelihood log_marginal_likelihood(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                                   const GpHyper& hyper, bool with_gradient) {
    const Eigen::Index n = inputs.rows();
    const Eigen::Index dims = inputs.cols();
    require(n == targets.size() && n > 0, "GP inputs and targets differ in length");
    require(hyper.lengthscales.size() == dims, "GP lengthscale count does not match the input dimension");

    const Eigen::MatrixXd z = scaled(inputs, hyper);
    const Eigen::MatrixXd r = distances(z);
    Eigen::MatrixXd k = kernel_matrix(r, hyper);
    Eigen::MatrixXd ky = k;
    ky.diagonal().array() += hyper.noise_variance;
    const Factor f = factorize(std::move(ky));
    const auto tri = f.lower.triangularView<Eigen::Lower>();
    Eigen::VectorXd alpha = tri.solve(targets);
    tri.transpose().solveInPlace(alpha);

    Likelihood out;
    out.value = -0.5 * targets.dot(alpha) - f.lower.diagonal().array().log().sum() -
                0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
    if (!with_gradient) return out;

    Eigen::MatrixXd kinv = Eigen::MatrixXd::Identity(n, n);
    tri.solveInPlace(kinv);
    tri.transpose().solveInPlace(kinv);
    const Eigen::MatrixXd w = alpha * alpha.transpose() - kinv;

    out.gradient.resize(dims + 2);
    out.gradient(0) = 0.5 * (w.cwiseProduct(k)).sum();
    out.gradient(dims + 1) = 0.5 * hyper.noise_variance * w.trace();

    // dK/dlog l_d = sf2 (5/3)(1 + sqrt5 r) exp(-sqrt5 r) (z_id - z_jd)^2
    const Eigen::MatrixXd c = r.unaryExpr([&](double v) {
        return hyper.signal_variance * (5.0 / 3.0) * (1.0 + kSqrt5 * v) * std::exp(-kSqrt5 * v);
    });
    const Eigen::MatrixXd m = w.cwiseProduct(c);
    const Eigen::VectorXd row_sums = m.rowwise().sum();
    const Eigen::MatrixXd mz = m * z;
    for (Eigen::Index d = 0; d < dims; ++d) {
        const auto zd = z.col(d);
        out.gradient(d + 1) = zd.cwiseAbs2().dot(row_sums) - zd.dot(mz.col(d));
    }
    return out;
}

GpModel condition(Eigen::MatrixXd inputs, Eigen::VectorXd targets, GpHyper hyper) {
    require(inputs.rows() == targets.size() && inputs.rows() > 0, "GP inputs and targets differ in length");
    require(hyper.lengthscales.size() == inputs.cols(), "GP lengthscale count does not match the input dimension");
    require(hyper.signal_variance > 0.0 && hyper.noise_variance > 0.0 && (hyper.lengthscales.array() > 0.0).all(),
            "GP hyperparameters must be positive");
    GpModel m;
    const Eigen::MatrixXd r = distances(scaled(inputs, hyper));
    Eigen::MatrixXd ky = kernel_matrix(r, hyper);
    ky.diagonal().array() += hyper.noise_variance;
    Factor f = factorize(std::move(ky));
    m.cholesky = std::move(f.lower);
    m.jitter = f.jitter;
    const Eigen::MatrixXd& lower = m.cholesky;
    const auto tri = lower.triangularView<Eigen::Lower>();
    m.alpha = tri.solve(targets);
    tri.transpose().solveInPlace(m.alpha);
    m.log_likelihood = -0.5 * targets.dot(m.alpha) - m.cholesky.diagonal().array().log().sum() -
                       0.5 * static_cast<double>(targets.size()) * std::log(2.0 * std::numbers::pi);
    m.hyper = std::move(hyper);
    m.inputs = std::move(inputs);
    m.targets = std::move(targets);
    return m;
}

GpHyper default_hyper(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets) {
    const double n = static_cast<double>(targets.size());
    const double var = std::max((targets.array() - targets.mean()).square().sum() / n, 1e-6);
    GpHyper h;
    h.signal_variance = var;
    h.noise_variance = 0.01 * var;
    h.lengthscales.resize(inputs.cols());
    const double root_p = std::sqrt(static_cast<double>(inputs.cols()));
    for (Eigen::Index d = 0; d < inputs.cols(); ++d) {
        const auto col = inputs.col(d).array();
        const double sd = std::sqrt((col - col.mean()).square().sum() / static_cast<double>(inputs.rows()));
        h.lengthscales(d) = root_p * std::max(sd, 1e-3);
    }
    return h;
}

GpModel fit_gp(Eigen::MatrixXd inputs, Eigen::VectorXd targets, const GpHyper& init, const FitOptions& options) {
    require(inputs.rows() == targets.size() && inputs.rows() > 0, "GP inputs and targets differ in length");
    const Eigen::VectorXd start = init.to_log();
    const std::size_t runs = options.restarts + 1;
    std::vector<Optimum> results(runs);
    parallel_for(runs, options.parallel, [&](std::size_t run) {
        Eigen::VectorXd x = start;
        if (run > 0) {
            Rng rng = stream_rng(options.seed, run);
            std::normal_distribution<double> normal(0.0, 1.0);
            for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += normal(rng);
        }
        results[run] = ascend(inputs, targets, std::move(x), options);
    });
    std::size_t best = 0;
    for (std::size_t i = 1; i < runs; ++i)
        if (results[i].value > results[best].value) best = i;
    if (!std::isfinite(results[best].value))
        throw NumericalError("GP marginal likelihood could not be evaluated at any starting point");
    return condition(std::move(inputs), std::move(targets), GpHyper::from_log(results[best].point));
}

std::pair<double, double> gp_predict(const GpModel& model, std::span<const double> window) {
    const Eigen::Index p = model.lookback();
    require(static_cast<Eigen::Index>(window.size()) == p, "GP query window has the wrong length");
    const Eigen::Map<const Eigen::RowVectorXd> w(window.data(), p);
    const Eigen::RowVectorXd inv_l = model.hyper.lengthscales.cwiseInverse().transpose();
    const Eigen::VectorXd r = ((model.inputs.rowwise() - w).array().rowwise() * inv_l.array())
                                  .matrix()
                                  .rowwise()
                                  .norm();
    const Eigen::VectorXd kstar = r.unaryExpr([&](double v) { return matern_of_r(v, model.hyper.signal_variance); });
    const double mean = kstar.dot(model.alpha);
    const Eigen::VectorXd v = model.cholesky.triangularView<Eigen::Lower>().solve(kstar);
    const double prior = model.hyper.signal_variance + model.hyper.noise_variance;
    const double var = std::max(prior - v.squaredNorm(), 1e-12 * prior);
    return {mean, var};
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> training_windows(std::span<const double> series, std::size_t lookback,
                                                             std::size_t max_points) {
    require(lookback >= 1 && series.size() > lookback, "series too short for the GP lookback");
    require(max_points >= 1, "max_points must be positive");
    const std::size_t available = series.size() - lookback;
    const std::size_t n = std::min(available, max_points);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(lookback));
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t start = n == available ? k : k * available / n;
        for (std::size_t d = 0; d < lookback; ++d)
            x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d)) = series[start + d];
        y(static_cast<Eigen::Index>(k)) = series[start + lookback];
    }
    return {std::move(x), std::move(y)};
}

TrajectoryEnsemble gp_mc_trajectories(const GpModel& model, std::span<const double> seed_window, std::size_t horizon,
                                      std::size_t count, std::uint64_t seed) {
    return trajectories(model, seed_window, horizon, count, seed, true);
}

TrajectoryEnsemble gp_mc_trajectories_serial(const GpModel& model, std::span<const double> seed_window,
                                             std::size_t horizon, std::size_t count, std::uint64_t seed) {
    return trajectories(model, seed_window, horizon, count, seed, false);
}

}  // namespace mordred::gp
