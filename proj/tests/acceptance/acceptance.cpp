// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
//   acceptance [--workdir DIR] [--only N]

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mordred/ar.hpp"
#include "mordred/cli.hpp"
#include "mordred/csv_io.hpp"
#include "mordred/datagen.hpp"
#include "mordred/emd.hpp"
#include "mordred/ensemble.hpp"
#include "mordred/events.hpp"
#include "mordred/gmm.hpp"
#include "mordred/gp.hpp"
#include "mordred/metrics.hpp"
#include "mordred/ordinal.hpp"
#include "mordred/seq2seq.hpp"

namespace fs = std::filesystem;
using namespace mordred;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

std::string sci(double v) {
    std::ostringstream s;
    s << std::setprecision(3) << std::scientific << v;
    return s.str();
}

std::string fixed(double v, int digits = 4) {
    std::ostringstream s;
    s << std::setprecision(digits) << std::fixed << v;
    return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return out;
}

int cli(const std::vector<std::string>& args) { return cli::run(args); }

std::map<std::string, double> read_metrics(const fs::path& csv_path, const std::string& model) {
    std::map<std::string, double> out;
    std::ifstream in(csv_path);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        const auto f = csv::split_line(line);
        if (f.size() == 4 && f[0] == model) out[f[2]] = std::stod(f[3]);
    }
    return out;
}

// ---- 1 -------------------------------------------------------------------

Outcome gradient_correctness() {
    Outcome o;
    Rng rng(2024);
    std::uniform_int_distribution<std::size_t> units(1, 8), bins(2, 10), lookback(1, 3), decoder(1, 2);
    std::uniform_real_distribution<double> drop(0.0, 0.5), unit(-1.0, 1.0);
    const std::size_t instances = 24;
    double worst = 0.0;
    std::size_t checked = 0;
    for (std::size_t n = 0; n < instances; ++n) {
        const bool ordinal_mode = n % 2 == 0;
        const std::size_t u = units(rng), m = bins(rng), p = lookback(rng), l = decoder(rng);
        const std::size_t length = p + l;  // one window: sequence length <= 5
        std::vector<double> series(length);
        for (double& x : series) x = unit(rng);
        std::optional<ordinal::BinPartition> partition;
        seq2seq::SeriesData data;
        if (ordinal_mode) {
            partition = ordinal::fit_partition(series, m);
            data = seq2seq::SeriesData::ordinal(ordinal::quantize(series, *partition));
        } else {
            data = seq2seq::SeriesData::regression(series);
        }
        const auto model = seq2seq::Seq2SeqModel::create(
            ordinal_mode ? seq2seq::Mode::ordinal : seq2seq::Mode::regression, u, p, partition, drop(rng), n % 3 == 0,
            1000 + n);
        const auto windows = seq2seq::make_windows(data.size(), p, 1, l);
        const auto masks = model.sample_masks(static_cast<Eigen::Index>(windows.size()), rng);
        const double l2 = 1e-3;
        const auto lg = seq2seq::loss_and_gradient(model, data, windows, windows.starts, masks, l2);
        seq2seq::Vector theta = model.flatten();
        seq2seq::Seq2SeqModel probe = model;
        const double h = 1e-5;
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
            const double keep = theta(i);
            theta(i) = keep + h;
            probe.unflatten(theta);
            const double up = seq2seq::loss_and_gradient(probe, data, windows, windows.starts, masks, l2).loss;
            theta(i) = keep - h;
            probe.unflatten(theta);
            const double down = seq2seq::loss_and_gradient(probe, data, windows, windows.starts, masks, l2).loss;
            theta(i) = keep;
            const double numeric = (up - down) / (2 * h);
            const double scale = std::max({std::abs(numeric), std::abs(lg.gradient(i)), 1e-3});
            worst = std::max(worst, std::abs(lg.gradient(i) - numeric) / scale);
            ++checked;
        }
    }
    o.check(worst < 1e-4, "relative error above 1e-4");
    o.detail << instances << " instances, " << checked << " partials, max relative error " << sci(worst);
    return o;
}

// ---- 2 -------------------------------------------------------------------

Outcome ordinal_soundness() {
    Outcome o;
    Rng rng(7);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const ordinal::BinPartition part(-2.3, 3.1, 37);

    // integral of the piecewise-uniform density, bin by bin
    std::vector<double> probs(part.bins());
    for (double& p : probs) p = u01(rng);
    const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
    for (double& p : probs) p /= total;
    const ordinal::CategoricalDensity dens(probs);
    double integral = 0.0;
    for (std::size_t i = 0; i < part.bins(); ++i)
        integral += std::exp(ordinal::piecewise_uniform_logpdf(part.midpoint(i), dens, part)) * part.width();
    o.check(std::abs(integral - 1.0) < 1e-12, "density does not integrate to 1");

    // additivity of the sequence NLL
    std::vector<double> truth(40);
    std::vector<ordinal::CategoricalDensity> steps;
    for (double& x : truth) {
        x = -2.3 + 5.4 * u01(rng);
        std::vector<double> p(part.bins());
        for (double& v : p) v = u01(rng) + 1e-3;
        const double s = std::accumulate(p.begin(), p.end(), 0.0);
        for (double& v : p) v /= s;
        steps.emplace_back(p);
    }
    const double whole = ordinal::sequence_nll(truth, steps, part);
    const double split = ordinal::sequence_nll(std::span(truth).first(17), std::span(steps).first(17), part) +
                         ordinal::sequence_nll(std::span(truth).subspan(17), std::span(steps).subspan(17), part);
    const double add_err = std::abs(whole - split) / std::abs(whole);
    o.check(add_err < 1e-12, "NLL not additive");

    double worst = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double x = part.lower() + (part.upper() - part.lower()) * u01(rng);
        worst = std::max(worst, std::abs(ordinal::decode(ordinal::encode(x, part), part) - x));
    }
    o.check(worst <= part.width() / 2 + 1e-12, "round trip beyond half a bin");
    o.detail << "integral-1 = " << sci(integral - 1.0) << ", additivity rel err " << sci(add_err)
             << ", max |decode(encode(x))-x| / width = " << fixed(worst / part.width()) << " over 1e5 values";
    return o;
}

// ---- 3 -------------------------------------------------------------------

Outcome kalman_oracle() {
    Outcome o;
    const double phi = 0.8, var_e = 0.5;
    const ar::ArModel model{{phi}, var_e, 0.0};
    Rng rng(3);
    std::normal_distribution<double> n01;
    std::vector<double> history(200);
    history[0] = 0.0;
    for (std::size_t t = 1; t < history.size(); ++t) history[t] = phi * history[t - 1] + std::sqrt(var_e) * n01(rng);
    const auto f = ar::kalman_forecast(model, history, 50);
    double worst = 0.0;
    for (std::size_t k = 1; k <= 50; ++k) {
        const double mean = std::pow(phi, static_cast<double>(k)) * history.back();
        double var = 0.0;
        for (std::size_t j = 0; j < k; ++j) var += var_e * std::pow(phi, 2.0 * static_cast<double>(j));
        const auto& g = f.as_gaussian()[k - 1];
        worst = std::max({worst, std::abs(g.mean - mean), std::abs(g.variance - var)});
    }
    o.check(worst < 1e-10, "closed form mismatch");
    o.detail << "AR(1) phi=0.8, k<=50, max abs deviation " << sci(worst);
    return o;
}

// ---- 4 -------------------------------------------------------------------

Outcome gp_correctness() {
    Outcome o;
    gp::GpHyper hyper;
    hyper.signal_variance = 2.5;
    hyper.lengthscales = Eigen::VectorXd::Constant(1, 0.7);
    hyper.noise_variance = 0.01;
    const double a[1] = {0.3}, b[1] = {1.0};
    const double value = gp::matern52(a, b, hyper) / hyper.signal_variance;
    const double s5 = std::sqrt(5.0);
    const double direct = (1.0 + s5 + 5.0 / 3.0) * std::exp(-s5);
    o.check(std::abs(value - direct) < 1e-4, "Matern value at r = l");

    // hyper-gradients against central differences
    Rng rng(11);
    std::normal_distribution<double> n01;
    Eigen::MatrixXd x(40, 3);
    Eigen::VectorXd y(40);
    for (Eigen::Index i = 0; i < 40; ++i) {
        for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = n01(rng);
        y(i) = std::sin(x(i, 0)) + 0.5 * x(i, 1) * x(i, 2) + 0.1 * n01(rng);
    }
    gp::GpHyper h3;
    h3.signal_variance = 1.3;
    h3.lengthscales = Eigen::Vector3d(0.8, 1.4, 2.0);
    h3.noise_variance = 0.05;
    const auto lik = gp::log_marginal_likelihood(x, y, h3);
    const Eigen::VectorXd theta = h3.to_log();
    double worst = 0.0;
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
        Eigen::VectorXd up = theta, down = theta;
        up(j) += 1e-5;
        down(j) -= 1e-5;
        const double numeric = (gp::log_marginal_likelihood(x, y, gp::GpHyper::from_log(up), false).value -
                                gp::log_marginal_likelihood(x, y, gp::GpHyper::from_log(down), false).value) /
                               2e-5;
        worst = std::max(worst, std::abs(lik.gradient(j) - numeric) / std::max(1.0, std::abs(numeric)));
    }
    o.check(worst < 1e-4, "hyper-gradient mismatch");

    // far from the data the posterior is the prior
    const gp::GpModel model = gp::condition(x, y, h3);
    const double far[3] = {50.0, -60.0, 70.0};
    const auto [mean, var] = gp::gp_predict(model, far);
    const double prior = h3.signal_variance + h3.noise_variance;
    o.check(std::abs(mean) < 1e-8 && std::abs(var - prior) < 1e-8, "no reversion to the prior");
    o.detail << "k(r=l)/sf2 = " << std::setprecision(6) << value << " vs direct evaluation " << direct
             << " (the figure 0.5246 quoted for this is 6e-4 away from both); grad max rel err " << sci(worst)
             << "; far-field |mean| " << sci(std::abs(mean)) << ", var-prior " << sci(var - prior);
    return o;
}

// ---- 5 -------------------------------------------------------------------

Outcome moment_correction() {
    Outcome o;
    Rng rng(5);
    std::normal_distribution<double> n01;
    TrajectoryEnsemble ens;
    ens.origin = TrajectoryEnsemble::Origin::gp;
    ens.paths.resize(100, 1000);
    for (Eigen::Index s = 0; s < 100; ++s)
        for (Eigen::Index k = 0; k < 1000; ++k) ens.paths(s, k) = 3.0 * n01(rng) + 0.01 * static_cast<double>(k);
    const auto steps = correct_moments(ens);
    double worst = 0.0;
    for (Eigen::Index k = 0; k < 1000; ++k) {
        double mean = 0.0;
        for (Eigen::Index s = 0; s < 100; ++s) mean += ens.paths(s, k);
        mean /= 100.0;
        double var = 0.0;
        for (Eigen::Index s = 0; s < 100; ++s) var += (ens.paths(s, k) - mean) * (ens.paths(s, k) - mean);
        var /= 100.0;
        const auto& g = steps[static_cast<std::size_t>(k)];
        worst = std::max({worst, std::abs(g.mean - mean) / std::max(1.0, std::abs(mean)), std::abs(g.variance - var) / var});
    }
    o.check(worst < 1e-12, "moments differ from the two-pass oracle");
    o.detail << "S=100, P_h=1000, max relative deviation " << sci(worst);
    return o;
}

// ---- 6 -------------------------------------------------------------------

Outcome gmm_recovery() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(6);
    std::normal_distribution<double> n01;
    std::bernoulli_distribution coin(0.5);
    std::vector<double> x(2000);
    for (double& v : x) v = (coin(rng) ? 5.0 : -5.0) + n01(rng);
    const auto fit = gmm::fit_vb_gmm(x, 5);
    const double secs = seconds_since(t0);
    std::vector<std::size_t> heavy;
    double light_max = 0.0;
    for (std::size_t c = 0; c < fit.density.components(); ++c) {
        if (fit.density.weights[c] >= 0.05) heavy.push_back(c);
        else light_max = std::max(light_max, fit.density.weights[c]);
    }
    o.check(heavy.size() == 2, "expected two components");
    if (heavy.size() == 2) {
        auto [lo, hi] = std::minmax(heavy[0], heavy[1], [&](auto a, auto b) {
            return fit.density.means[a] < fit.density.means[b];
        });
        o.check(std::abs(fit.density.means[lo] + 5.0) < 0.3 && std::abs(fit.density.means[hi] - 5.0) < 0.3, "means");
        o.check(std::abs(fit.density.weights[lo] - 0.5) < 0.1 && std::abs(fit.density.weights[hi] - 0.5) < 0.1, "weights");
        o.detail << "means " << fixed(fit.density.means[lo], 3) << ", " << fixed(fit.density.means[hi], 3) << "; weights "
                 << fixed(fit.density.weights[lo], 3) << ", " << fixed(fit.density.weights[hi], 3) << "; ";
    }
    o.check(secs < 10.0, "too slow");
    o.detail << fit.density.components() << " components kept, largest other weight " << fixed(light_max, 4) << ", "
             << fixed(secs, 3) << " s";
    return o;
}

// ---- 7 -------------------------------------------------------------------

Outcome calibration() {
    Outcome o;
    const std::size_t h = 10000;
    Rng rng(8);
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<GaussianStep> steps(h);
    std::vector<double> truth(h);
    for (std::size_t k = 0; k < h; ++k) {
        steps[k] = {std::sin(0.01 * static_cast<double>(k)), 0.5 + u01(rng)};
        truth[k] = steps[k].mean + std::sqrt(steps[k].variance) * n01(rng);
    }
    const auto dist = ForecastDistribution::gaussian(steps);
    const double self = metrics::qqdist(truth, dist, h);
    o.check(self < 1e-3, "self-sampled QQDist");

    std::vector<double> above(h), below(h);
    for (std::size_t k = 0; k < h; ++k) {
        above[k] = steps[k].mean + 100.0;
        below[k] = steps[k].mean - 100.0;
    }
    const double qa = metrics::qqdist(above, dist, h), qb = metrics::qqdist(below, dist, h);
    o.check(std::abs(qa - 1.0 / 3.0) < 1e-3 && std::abs(qb - 1.0 / 3.0) < 1e-3, "degenerate cases");
    o.detail << "self-sampled P_h=1e4: " << sci(self) << "; always above " << fixed(qa, 6) << ", always below "
             << fixed(qb, 6);
    return o;
}

// ---- 8 -------------------------------------------------------------------

Outcome metric_fixed_points() {
    Outcome o;
    Rng rng(9);
    std::normal_distribution<double> n01;
    std::vector<double> x(300);
    for (double& v : x) v = n01(rng);
    const double self = metrics::smape(x, x);
    const double opposite = metrics::smape(std::vector<double>{1.0}, std::vector<double>{-1.0});
    std::vector<double> shifted = x;
    for (double& v : shifted) v += -0.75;
    const double offset = metrics::rmse(x, shifted);
    o.check(self == 0.0, "SMAPE(x,x)");
    o.check(std::abs(opposite - 2.0) < 1e-15, "SMAPE(1,-1)");
    o.check(std::abs(offset - 0.75) < 1e-12, "RMSE offset");

    std::vector<GaussianStep> steps;
    for (std::size_t k = 0; k < x.size(); ++k) steps.push_back({0.1 * static_cast<double>(k % 7), 1.0 + 0.01 * k});
    const auto dist = ForecastDistribution::gaussian(steps);
    const double cnll = metrics::cumulative_nll(x, dist);
    double oracle = 0.0;
    for (std::size_t end = 1; end <= x.size(); ++end)
        for (std::size_t k = 0; k < end; ++k) oracle -= dist.logpdf(k, x[k]);
    const double rel = std::abs(cnll - oracle) / std::abs(oracle);
    o.check(rel < 1e-12, "CNLL prefix identity");
    o.detail << "SMAPE(x,x)=" << self << ", SMAPE(1,-1)=" << opposite << ", RMSE offset 0.75 -> " << offset
             << ", CNLL vs double loop rel err " << sci(rel);
    return o;
}

// ---- 9 -------------------------------------------------------------------

struct DeskScale {
    // decoder trained over half the horizon; shorter rollouts drift after ~50 steps
    std::size_t epochs = 100;
    std::size_t decoder_length = 100;
    std::size_t stride = 5;
    std::size_t batch = 32;
    double learning_rate = 0.002;
};

Outcome desk_scale_skill(const fs::path& work, const DeskScale& cfg) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = work / "c9";
    fs::create_directories(dir);
    const std::string data = (dir / "mackey_glass.csv").string();
    o.check(cli({"generate", "--system", "mackey_glass", "--n", "10000", "--seed", "0", "--out", data}) == 0, "generate");

    const std::vector<std::string> common{"--data", data, "--lookback", "50", "--units", "64", "--p-drop", "0.25",
                                          "--l2", "1e-7", "--epochs", std::to_string(cfg.epochs), "--decoder-length",
                                          std::to_string(cfg.decoder_length), "--stride", std::to_string(cfg.stride),
                                          "--batch", std::to_string(cfg.batch), "--learning-rate",
                                          std::to_string(cfg.learning_rate), "--seed", "0"};
    auto train = [&](const std::string& model, const std::string& out, std::vector<std::string> extra) {
        std::vector<std::string> args{"train", "--model", model, "--out", (dir / out).string()};
        args.insert(args.end(), common.begin(), common.end());
        args.insert(args.end(), extra.begin(), extra.end());
        return cli(args);
    };
    const int rc = train("mordred", "mordred", {"--bins", "64"});
    o.check(rc == 0, "MOrdReD training");
    const double train_secs = seconds_since(t0);
    o.check(cli({"forecast", "--model-dir", (dir / "mordred").string(), "--data", data, "--horizon", "200", "--samples",
                 "100", "--seed", "0", "--out", (dir / "f_mordred").string()}) == 0,
            "MOrdReD forecast");
    o.check(cli({"evaluate", "--forecast", (dir / "f_mordred").string(), "--data", data, "--out",
                 (dir / "eval").string()}) == 0,
            "evaluate");
    const auto m = read_metrics(dir / "eval" / "metrics.csv", "mordred");
    const auto art = cli::read_forecast(dir / "f_mordred");
    const auto& part = art.distribution.as_categorical().partition;
    const double uniform_nll = 200.0 * std::log(part.upper() - part.lower());
    const double nll = m.count("nll") ? m.at("nll") : INFINITY;
    const double med_smape = m.count("median_smape") ? m.at("median_smape") : INFINITY;
    o.check(nll < uniform_nll, "NLL not below the uniform density");
    o.check(med_smape < 0.5, "median SMAPE");

    const int rc_reg = train("seq2seq-reg", "regression", {});
    o.check(rc_reg == 0, "regression seq2seq diverged or failed");
    const double secs = seconds_since(t0);
    o.check(secs < 1800.0, "over the 30 minute budget");
    o.detail << "NLL " << fixed(nll, 2) << " vs uniform " << fixed(uniform_nll, 2) << ", median SMAPE "
             << fixed(med_smape, 4) << ", regression exit " << rc_reg << "; " << fixed(train_secs, 0)
             << " s MOrdReD training, " << fixed(secs, 0) << " s total";
    return o;
}

// ---- 10 ------------------------------------------------------------------

Outcome event_timing(const fs::path& work) {
    Outcome o;
    const fs::path dir = work / "c10";
    fs::create_directories(dir);
    const double period = 50.0;
    std::vector<double> sine(4000);
    for (std::size_t t = 0; t < sine.size(); ++t)
        sine[t] = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period);
    const std::string data = (dir / "sine.csv").string();
    csv::write_series(fs::path(data), sine);

    o.check(cli({"train", "--data", data, "--model", "ar", "--ar-order", "4", "--out", (dir / "ar").string()}) == 0,
            "train");
    o.check(cli({"forecast", "--model-dir", (dir / "ar").string(), "--data", data, "--horizon", "300",
                 "--trajectories", "200", "--seed", "1", "--out", (dir / "f").string()}) == 0,
            "forecast");
    o.check(cli({"events", "--forecast", (dir / "f").string(), "--data", data, "--min-distance", "10", "--out",
                 (dir / "ev").string()}) == 0,
            "events");
    double nll = INFINITY, uniform = 0.0;
    std::ifstream in(dir / "ev" / "timing_nll.csv");
    std::string line;
    std::getline(in, line);
    if (std::getline(in, line)) {
        const auto f = csv::split_line(line);
        if (f.size() >= 3) {
            nll = std::stod(f[1]);
            uniform = std::stod(f[2]);
        }
    }
    o.check(nll < uniform, "timing NLL not below the uniform baseline");

    // EMD reconstruction on a two-tone signal with a trend
    std::vector<double> s(1000);
    for (std::size_t t = 0; t < s.size(); ++t) {
        const double x = static_cast<double>(t);
        s[t] = std::sin(x / 7.0) + 0.5 * std::sin(x / 53.0) + 0.001 * x;
    }
    const auto dec = emd::emd_sift(s);
    double recon = 0.0;
    for (std::size_t t = 0; t < s.size(); ++t) {
        double sum = dec.residual[t];
        for (const auto& imf : dec.imfs) sum += imf[t];
        recon = std::max(recon, std::abs(sum - s[t]));
    }
    o.check(recon < 1e-8, "EMD reconstruction");

    // KDE normalization by a fine trapezoid over +-10 bandwidths
    Rng rng(10);
    std::normal_distribution<double> n01;
    std::vector<double> samples(300);
    for (double& v : samples) v = 100.0 + 20.0 * n01(rng);
    const auto kde = events::kde_fit(samples);
    const double lo = *std::min_element(samples.begin(), samples.end()) - 10 * kde.bandwidth();
    const double hi = *std::max_element(samples.begin(), samples.end()) + 10 * kde.bandwidth();
    const std::size_t n = 20000;
    double integral = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
        const double t = lo + (hi - lo) * static_cast<double>(i) / n;
        integral += (i == 0 || i == n ? 0.5 : 1.0) * kde(t);
    }
    integral *= (hi - lo) / n;
    o.check(std::abs(integral - 1.0) < 1e-3, "KDE normalization");
    o.detail << "sine period 50, AR forecast timing NLL " << fixed(nll, 3) << " vs uniform " << fixed(uniform, 3)
             << "; EMD max reconstruction error " << sci(recon) << "; KDE integral " << fixed(integral, 6);
    return o;
}

// ---- 11 ------------------------------------------------------------------

Outcome generator_fidelity() {
    Outcome o;
    auto lorenz = datagen::system_spec("lorenz");
    lorenz.initial = {0.0, 0.0, 0.0};
    lorenz.length = 2000;
    double lorenz_max = 0.0;
    for (double v : datagen::generate(lorenz)) lorenz_max = std::max(lorenz_max, std::abs(v));
    o.check(lorenz_max == 0.0, "Lorenz origin");

    const auto mg = datagen::gen_mackey_glass(0.2, 0.1, 17, 10, 3000, std::vector<double>(18, 1.0), 100);
    double mg_dev = 0.0;
    for (double v : mg) mg_dev = std::max(mg_dev, std::abs(v - 1.0));
    o.check(mg_dev == 0.0, "Mackey-Glass fixed point");

    // logistic map, long iteration from an arbitrary start
    double x = 0.3;
    for (int i = 0; i < 100000; ++i) x = 3.2 * x * (1.0 - x);
    const double y = 3.2 * x * (1.0 - x);
    const double lo = std::min(x, y), hi = std::max(x, y);
    auto logistic = datagen::system_spec("logistic");
    logistic.length = 1000;
    const auto series = datagen::generate(logistic);
    const double gen_lo = std::min(series[series.size() - 1], series[series.size() - 2]);
    const double gen_hi = std::max(series[series.size() - 1], series[series.size() - 2]);
    o.check(std::abs(gen_lo - lo) < 1e-3 && std::abs(gen_hi - hi) < 1e-3, "logistic 2-cycle vs iteration");
    o.check(std::abs(gen_lo - 0.5130) < 1e-3 && std::abs(gen_hi - 0.7995) < 1e-3, "logistic 2-cycle values");

    // dx/dt = -x from 1 to t = 1
    datagen::State s{1.0};
    const datagen::VectorField decay = [](const datagen::State& v, datagen::State& dv) { dv[0] = -v[0]; };
    for (int i = 0; i < 100; ++i) datagen::rk4_step(decay, s, 0.01);
    const double rk_err = std::abs(s[0] - std::exp(-1.0));
    o.check(rk_err < 1e-6, "RK4 exponential");
    o.detail << "Lorenz origin max |x| " << lorenz_max << "; Mackey-Glass max |x-1| " << mg_dev << "; logistic cycle {"
             << fixed(gen_lo) << ", " << fixed(gen_hi) << "} (iteration oracle {" << fixed(lo) << ", " << fixed(hi)
             << "}); RK4 error " << sci(rk_err);
    return o;
}

// ---- 12 ------------------------------------------------------------------

Outcome determinism(const fs::path& work) {
    Outcome o;
    const fs::path root = work / "c12";
    std::vector<std::string> identical, differing;
    auto run_twice = [&](const std::string& name, const std::function<std::vector<std::string>(const fs::path&)>& make,
                         const std::string& artifact) {
        std::map<std::string, std::string> snaps[2];
        for (int rep = 0; rep < 2; ++rep) {
            const fs::path out = root / ("run" + std::to_string(rep));
            fs::create_directories(out);
            if (cli(make(out)) != 0) {
                o.check(false, name + " failed");
                return;
            }
            const fs::path target = out / artifact;
            snaps[rep] = fs::is_directory(target) ? snapshot(target)
                                                  : std::map<std::string, std::string>{{artifact, slurp(target)}};
        }
        (snaps[0] == snaps[1] ? identical : differing).push_back(name);
    };
    const auto data = [](const fs::path& out) { return (out / "mackey_glass.csv").string(); };
    run_twice("generate", [&](const fs::path& out) {
        return std::vector<std::string>{"generate", "--system", "mackey_glass", "--n", "2000", "--seed", "3", "--out", data(out)};
    }, "mackey_glass.csv");
    run_twice("train mordred", [&](const fs::path& out) {
        return std::vector<std::string>{"train", "--data", data(out), "--model", "mordred", "--lookback", "20",
                                        "--bins", "32", "--units", "8,12", "--epochs", "2", "--decoder-length", "5",
                                        "--stride", "4", "--seed", "3", "--out", (out / "mordred").string()};
    }, "mordred");
    run_twice("train seq2seq-reg", [&](const fs::path& out) {
        return std::vector<std::string>{"train", "--data", data(out), "--model", "seq2seq-reg", "--lookback", "20",
                                        "--units", "8", "--epochs", "2", "--decoder-length", "5", "--stride", "4",
                                        "--seed", "3", "--out", (out / "reg").string()};
    }, "reg");
    run_twice("train ar", [&](const fs::path& out) {
        return std::vector<std::string>{"train", "--data", data(out), "--model", "ar", "--ar-order", "4,8",
                                        "--seed", "3", "--out", (out / "ar").string()};
    }, "ar");
    run_twice("train gp-gmm", [&](const fs::path& out) {
        return std::vector<std::string>{"train", "--data", data(out), "--model", "gp-gmm", "--lookback", "8",
                                        "--gp-max-points", "200", "--gp-iterations", "20", "--seed", "3",
                                        "--out", (out / "gp").string()};
    }, "gp");
    // forecasts use N_s = 100 MC-dropout samples
    for (const auto& [model, dir] : std::vector<std::pair<std::string, std::string>>{
             {"mordred", "mordred"}, {"seq2seq-reg", "reg"}, {"ar", "ar"}, {"gp-gmm", "gp"}}) {
        run_twice("forecast " + model, [&, dir = dir](const fs::path& out) {
            return std::vector<std::string>{"forecast", "--model-dir", (out / dir).string(), "--data", data(out),
                                            "--horizon", "100", "--samples", "100", "--seed", "9",
                                            "--out", (out / ("f_" + dir)).string()};
        }, "f_" + dir);
    }
    auto forecasts = [](const fs::path& out) {
        std::vector<std::string> v;
        for (const char* d : {"f_mordred", "f_reg", "f_ar", "f_gp"}) v.push_back((out / d).string());
        return v;
    };
    run_twice("evaluate", [&](const fs::path& out) {
        std::vector<std::string> a{"evaluate", "--forecast"};
        for (auto& f : forecasts(out)) a.push_back(f);
        a.insert(a.end(), {"--data", data(out), "--out", (out / "eval").string()});
        return a;
    }, "eval");
    run_twice("events", [&](const fs::path& out) {
        std::vector<std::string> a{"events", "--forecast"};
        for (auto& f : forecasts(out)) a.push_back(f);
        a.insert(a.end(), {"--data", data(out), "--min-distance", "10", "--out", (out / "events").string()});
        return a;
    }, "events");
    run_twice("plot", [&](const fs::path& out) {
        return std::vector<std::string>{"plot", "--forecast", (out / "f_mordred").string(), "--data", data(out),
                                        "--events", "--min-distance", "10", "--out", (out / "fan.svg").string()};
    }, "fan.svg");

    o.check(differing.empty(), "outputs differ between runs");
    o.detail << identical.size() << " commands byte-identical across reruns";
    if (!differing.empty()) {
        o.detail << "; differing:";
        for (const auto& d : differing) o.detail << ' ' << d;
    }
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::string workdir = (fs::temp_directory_path() / "mordred_acceptance").string();
    std::vector<int> only;
    DeskScale desk;
    app.add_option("--workdir", workdir, "scratch directory");
    app.add_option("--only", only, "run these criteria only")->delimiter(',');
    app.add_option("--epochs", desk.epochs, "criterion 9 training epochs");
    app.add_option("--decoder-length", desk.decoder_length, "criterion 9 decoder length");
    app.add_option("--stride", desk.stride, "criterion 9 window stride");
    app.add_option("--batch", desk.batch, "criterion 9 minibatch size");
    app.add_option("--learning-rate", desk.learning_rate, "criterion 9 Nadam step size");
    CLI11_PARSE(app, argc, argv);

    const fs::path work(workdir);
    fs::remove_all(work);
    fs::create_directories(work);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient correctness", gradient_correctness},
        {"ordinal density soundness", ordinal_soundness},
        {"Kalman oracle", kalman_oracle},
        {"GP correctness", gp_correctness},
        {"moment-correction equivalence", moment_correction},
        {"GMM recovery", gmm_recovery},
        {"calibration soundness", calibration},
        {"metric fixed points", metric_fixed_points},
        {"desk-scale MOrdReD skill", [&] { return desk_scale_skill(work, desk); }},
        {"event-timing sanity", [&] { return event_timing(work); }},
        {"generator fidelity", generator_fidelity},
        {"determinism", [&] { return determinism(work); }},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        // CLI progress lines would interleave with the report
        std::ostringstream chatter;
        std::streambuf* const saved = std::cout.rdbuf(chatter.rdbuf());
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "exception: " << e.what();
        }
        std::cout.rdbuf(saved);
        if (!o.pass) ++failures;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << std::setw(2) << id << "  " << criteria[i].first
                  << ": " << o.detail.str() << " (" << fixed(seconds_since(t0), 1) << " s)" << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
