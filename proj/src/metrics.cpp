#include "mordred/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mordred::metrics {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
    require(a == b, "length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
}

template <class Value>
std::vector<std::string> appearance_order(const std::vector<MetricsReport>& reports, Value value) {
    std::vector<std::string> out;
    for (const auto& r : reports) {
        const std::string& v = value(r);
        if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    }
    return out;
}

}  // namespace

double smape(std::span<const double> truth, std::span<const double> forecast) {
    check_lengths(truth.size(), forecast.size());
    require(!truth.empty(), "smape of an empty sequence");
    double acc = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double denom = std::abs(truth[i]) + std::abs(forecast[i]);
        if (denom > 0.0) acc += std::abs(truth[i] - forecast[i]) / denom;
    }
    return 2.0 * acc / static_cast<double>(truth.size());
}

double rmse(std::span<const double> truth, std::span<const double> forecast) {
    check_lengths(truth.size(), forecast.size());
    require(!truth.empty(), "rmse of an empty sequence");
    double acc = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) acc += (truth[i] - forecast[i]) * (truth[i] - forecast[i]);
    return std::sqrt(acc / static_cast<double>(truth.size()));
}

std::vector<double> step_nll(std::span<const double> truth, const ForecastDistribution& dist) {
    check_lengths(truth.size(), dist.horizon());
    std::vector<double> out(truth.size());
    for (std::size_t k = 0; k < truth.size(); ++k) out[k] = -dist.logpdf(k, truth[k]);
    return out;
}

double forecast_nll(std::span<const double> truth, const ForecastDistribution& dist) {
    if (dist.kind() == ForecastDistribution::Kind::categorical) {
        check_lengths(truth.size(), dist.horizon());
        const auto& c = dist.as_categorical();
        return ordinal::sequence_nll(truth, c.steps, c.partition);
    }
    const auto per_step = step_nll(truth, dist);
    return std::accumulate(per_step.begin(), per_step.end(), 0.0);
}

double cumulative_nll(std::span<const double> truth, const ForecastDistribution& dist) {
    const auto per_step = step_nll(truth, dist);
    const auto n = per_step.size();
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += static_cast<double>(n - k) * per_step[k];
    return acc;
}

QuantileSeries quantile_series(const ForecastDistribution& dist, double alpha) {
    require(alpha > 0.0 && alpha < 1.0, "quantile level must lie in (0, 1)");
    QuantileSeries q{alpha, std::vector<double>(dist.horizon())};
    for (std::size_t k = 0; k < q.values.size(); ++k) q.values[k] = dist.quantile(k, alpha);
    return q;
}

std::vector<double> mean_series(const ForecastDistribution& dist) {
    std::vector<double> out(dist.horizon());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = dist.mean(k);
    return out;
}

std::vector<double> alpha_grid() {
    std::vector<double> grid(99);
    for (int i = 0; i < 99; ++i) grid[static_cast<std::size_t>(i)] = (i + 1) / 100.0;
    return grid;
}

double qqdist(std::span<const double> truth, const ForecastDistribution& dist, std::size_t horizon_cap) {
    check_lengths(truth.size(), dist.horizon());
    require(horizon_cap >= 1 && horizon_cap <= truth.size(), "QQDist horizon cap must lie in [1, P_h]");
    std::vector<double> alphas{0.0};
    std::vector<double> coverage{0.0};
    for (double alpha : alpha_grid()) {
        std::size_t below = 0;
        for (std::size_t t = 0; t < horizon_cap; ++t)
            if (truth[t] < dist.quantile(t, alpha)) ++below;
        alphas.push_back(alpha);
        coverage.push_back(static_cast<double>(below) / static_cast<double>(horizon_cap));
    }
    coverage.front() = coverage[1];
    alphas.push_back(1.0);
    coverage.push_back(coverage.back());
    std::vector<double> gaps(alphas.size());
    for (std::size_t i = 0; i < gaps.size(); ++i) gaps[i] = (coverage[i] - alphas[i]) * (coverage[i] - alphas[i]);
    double area = 0.0;
    for (std::size_t i = 1; i < alphas.size(); ++i) area += 0.5 * (gaps[i] + gaps[i - 1]) * (alphas[i] - alphas[i - 1]);
    return area;
}

const std::vector<std::string>& MetricsReport::metric_names() {
    static const std::vector<std::string> names{"mean_smape", "median_smape", "mean_rmse", "median_rmse",
                                                "nll",        "cnll",         "qqdist",    "qqdist_250"};
    return names;
}

double MetricsReport::metric(const std::string& name) const {
    if (name == "mean_smape") return mean_smape;
    if (name == "median_smape") return median_smape;
    if (name == "mean_rmse") return mean_rmse;
    if (name == "median_rmse") return median_rmse;
    if (name == "nll") return nll;
    if (name == "cnll") return cnll;
    if (name == "qqdist") return qqdist;
    if (name == "qqdist_250") return qqdist_250;
    throw std::invalid_argument("unknown metric '" + name + "'");
}

MetricsReport evaluate(const std::string& model, const std::string& dataset, std::span<const double> truth,
                       const ForecastDistribution& dist) {
    check_lengths(truth.size(), dist.horizon());
    MetricsReport r;
    r.model = model;
    r.dataset = dataset;
    const auto mean = mean_series(dist);
    const auto median = quantile_series(dist, 0.5).values;
    r.mean_smape = smape(truth, mean);
    r.median_smape = smape(truth, median);
    r.mean_rmse = rmse(truth, mean);
    r.median_rmse = rmse(truth, median);
    r.nll = forecast_nll(truth, dist);
    r.cnll = cumulative_nll(truth, dist);
    r.qqdist = qqdist(truth, dist, truth.size());
    r.qqdist_250 = qqdist(truth, dist, std::min<std::size_t>(250, truth.size()));
    return r;
}

RankTables rank_tables(const std::vector<MetricsReport>& reports) {
    require(!reports.empty(), "no reports to rank");
    RankTables t;
    t.metrics = MetricsReport::metric_names();
    t.models = appearance_order(reports, [](const MetricsReport& r) -> const std::string& { return r.model; });
    t.datasets = appearance_order(reports, [](const MetricsReport& r) -> const std::string& { return r.dataset; });

    std::map<std::pair<std::string, std::string>, const MetricsReport*> cells;
    for (const auto& r : reports) cells[{r.model, r.dataset}] = &r;
    std::string gaps;
    for (const auto& m : t.models)
        for (const auto& d : t.datasets)
            if (!cells.count({m, d})) gaps += " (" + m + ", " + d + ")";
    if (!gaps.empty()) throw std::invalid_argument("missing metric cells:" + gaps);

    const bool merge = std::count(t.models.begin(), t.models.end(), kGpMonteCarlo) &&
                       std::count(t.models.begin(), t.models.end(), kGpMixture);
    for (const auto& m : t.models) {
        const bool is_gp = m == kGpMonteCarlo || m == kGpMixture;
        if (!merge || !is_gp) t.ranked_models.push_back(m);
        else if (std::find(t.ranked_models.begin(), t.ranked_models.end(), kGpMerged) == t.ranked_models.end())
            t.ranked_models.push_back(kGpMerged);
    }

    const double datasets = static_cast<double>(t.datasets.size());
    for (const auto& metric : t.metrics) {
        auto& best = t.best_count[metric];
        auto& mean_rank = t.mean_rank[metric];
        auto& worst_rank = t.mean_worst_rank[metric];
        for (const auto& m : t.models) best[m] = 0.0;
        for (const auto& m : t.ranked_models) mean_rank[m] = worst_rank[m] = 0.0;

        for (const auto& d : t.datasets) {
            std::size_t winner = 0;
            for (std::size_t i = 1; i < t.models.size(); ++i)
                if (cells[{t.models[i], d}]->metric(metric) < cells[{t.models[winner], d}]->metric(metric)) winner = i;
            best[t.models[winner]] += 1.0;

            std::vector<double> values;
            for (const auto& m : t.ranked_models) {
                if (m == kGpMerged)
                    values.push_back(std::min(cells[{kGpMonteCarlo, d}]->metric(metric),
                                              cells[{kGpMixture, d}]->metric(metric)));
                else
                    values.push_back(cells[{m, d}]->metric(metric));
            }
            std::vector<std::size_t> order(values.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
            const std::size_t last = order.size() - 1;
            for (std::size_t pos = 0; pos < order.size(); ++pos) {
                mean_rank[t.ranked_models[order[pos]]] += static_cast<double>(pos) / datasets;
                worst_rank[t.ranked_models[order[pos]]] += static_cast<double>(last - pos) / datasets;
            }
        }
    }
    return t;
}

}  // namespace mordred::metrics
