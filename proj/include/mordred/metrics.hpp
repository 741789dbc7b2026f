#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "mordred/distribution.hpp"

namespace mordred::metrics {

/// (2/P_h) sum |x - f| / (|x| + |f|); terms with |x| + |f| = 0 contribute 0.
double smape(std::span<const double> truth, std::span<const double> forecast);
double rmse(std::span<const double> truth, std::span<const double> forecast);

/// Negative log-likelihood of each truth value under its step density.
std::vector<double> step_nll(std::span<const double> truth, const ForecastDistribution& dist);
double forecast_nll(std::span<const double> truth, const ForecastDistribution& dist);
/// Sum of the NLLs of every prefix: sum_k (P_h - k + 1) nll_k.
double cumulative_nll(std::span<const double> truth, const ForecastDistribution& dist);

struct QuantileSeries {
    double alpha = 0.5;
    std::vector<double> values;
};

QuantileSeries quantile_series(const ForecastDistribution& dist, double alpha);
std::vector<double> mean_series(const ForecastDistribution& dist);

/// Levels 0.01, 0.02, ..., 0.99.
std::vector<double> alpha_grid();

/// Integrated squared gap between alpha and the fraction r_alpha of the first
/// `horizon_cap` truth values strictly below the alpha-quantile curve. The
/// trapezoid rule runs over alpha_grid() plus the end points 0 and 1, which
/// take the r value of the nearest grid level.
double qqdist(std::span<const double> truth, const ForecastDistribution& dist, std::size_t horizon_cap);

struct MetricsReport {
    std::string model;
    std::string dataset;
    double mean_smape = 0.0;
    double median_smape = 0.0;
    double mean_rmse = 0.0;
    double median_rmse = 0.0;
    double nll = 0.0;
    double cnll = 0.0;
    double qqdist = 0.0;
    double qqdist_250 = 0.0;

    /// Metric names in reporting order; all are lower-is-better.
    static const std::vector<std::string>& metric_names();
    double metric(const std::string& name) const;
};

MetricsReport evaluate(const std::string& model, const std::string& dataset, std::span<const double> truth,
                       const ForecastDistribution& dist);

struct RankTables {
    std::vector<std::string> metrics;
    std::vector<std::string> datasets;
    std::vector<std::string> models;         // as listed, used for best counts
    std::vector<std::string> ranked_models;  // after merging the GP variants
    // metric -> model -> value
    std::map<std::string, std::map<std::string, double>> best_count;
    std::map<std::string, std::map<std::string, double>> mean_rank;        // 0 = best
    std::map<std::string, std::map<std::string, double>> mean_worst_rank;  // 0 = worst
};

/// Names of the two GP variants merged for the rank tables and their merged name.
inline const std::string kGpMonteCarlo = "gp-mc";
inline const std::string kGpMixture = "gp-gmm";
inline const std::string kGpMerged = "gp";

/// Model order comes from first appearance in `reports`; ties go to the
/// earlier model. Throws std::invalid_argument listing any missing cells.
RankTables rank_tables(const std::vector<MetricsReport>& reports);

}  // namespace mordred::metrics
