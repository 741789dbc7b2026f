#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "internal.hpp"
#include "mordred/cli.hpp"
#include "mordred/csv_io.hpp"
#include "mordred/metrics.hpp"

namespace mordred::cli {

std::vector<double> PreparedData::context() const {
    return {series.begin(), series.begin() + static_cast<std::ptrdiff_t>(split.validation_end)};
}

std::vector<double> PreparedData::truth(std::size_t horizon) const {
    if (horizon > split.test.size())
        throw std::invalid_argument("horizon " + std::to_string(horizon) + " exceeds the " +
                                    std::to_string(split.test.size()) + " test values of " + name);
    return {split.test.begin(), split.test.begin() + static_cast<std::ptrdiff_t>(horizon)};
}

PreparedData prepare_dataset(const std::filesystem::path& csv_path, const PrepOptions& options) {
    if (!std::filesystem::exists(csv_path)) throw std::invalid_argument("no such dataset: " + csv_path.string());
    PreparedData out;
    out.name = csv_path.stem().string();
    out.raw = csv::read_series(csv_path);
    if (out.raw.size() < 20) throw std::invalid_argument(csv_path.string() + " has fewer than 20 values");
    std::vector<double> values = out.raw;
    if (options.detrend) values = preprocess::detrend(out.raw, options.period).values;
    out.split = preprocess::split_70_15_15(values, true);
    out.series = out.split.train;
    out.series.insert(out.series.end(), out.split.validation.begin(), out.split.validation.end());
    out.series.insert(out.series.end(), out.split.test.begin(), out.split.test.end());
    return out;
}

namespace {

const char* kind_name(ForecastDistribution::Kind kind) {
    switch (kind) {
        case ForecastDistribution::Kind::categorical: return "categorical";
        case ForecastDistribution::Kind::gaussian: return "gaussian";
        case ForecastDistribution::Kind::gmm: return "gmm";
    }
    return "";
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("missing artifact file " + path.string());
    return in;
}

// data rows of a CSV with one header line
std::vector<std::vector<double>> read_table(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    std::string line;
    std::getline(in, line);
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        for (const auto& f : csv::split_line(line)) row.push_back(std::stod(f));
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_densities(std::ostream& out, const ForecastDistribution& dist) {
    const std::size_t h = dist.horizon();
    switch (dist.kind()) {
        case ForecastDistribution::Kind::categorical: {
            const auto& cat = dist.as_categorical();
            out << "step";
            for (std::size_t i = 0; i < cat.partition.bins(); ++i) out << ",p" << i;
            out << '\n';
            for (std::size_t k = 0; k < h; ++k) {
                out << k;
                for (double p : cat.steps[k].probs()) out << ',' << csv::format(p);
                out << '\n';
            }
            break;
        }
        case ForecastDistribution::Kind::gaussian:
            out << "step,mean,variance\n";
            for (std::size_t k = 0; k < h; ++k) {
                const auto& g = dist.as_gaussian()[k];
                out << k << ',' << csv::format(g.mean) << ',' << csv::format(g.variance) << '\n';
            }
            break;
        case ForecastDistribution::Kind::gmm:
            out << "step,component,weight,mean,variance\n";
            for (std::size_t k = 0; k < h; ++k) {
                const auto& g = dist.as_gmm()[k];
                for (std::size_t c = 0; c < g.components(); ++c)
                    out << k << ',' << c << ',' << csv::format(g.weights[c]) << ',' << csv::format(g.means[c]) << ','
                        << csv::format(g.variances[c]) << '\n';
            }
            break;
    }
}

ForecastDistribution read_densities(const std::filesystem::path& path, const nlohmann::json& meta) {
    const std::string kind = meta.at("kind").get<std::string>();
    const std::size_t h = meta.at("horizon").get<std::size_t>();
    const auto rows = read_table(path);
    auto check_steps = [&](std::size_t got) {
        if (got != h) throw std::invalid_argument(path.string() + ": expected " + std::to_string(h) + " steps");
    };
    if (kind == "categorical") {
        const auto& p = meta.at("partition");
        ordinal::BinPartition partition(p.at("lower").get<double>(), p.at("upper").get<double>(),
                                        p.at("bins").get<std::size_t>());
        std::vector<ordinal::CategoricalDensity> steps;
        for (const auto& row : rows) {
            if (row.size() != partition.bins() + 1) throw std::invalid_argument(path.string() + ": bad row width");
            steps.emplace_back(std::vector<double>(row.begin() + 1, row.end()));
        }
        check_steps(steps.size());
        return ForecastDistribution::categorical(partition, std::move(steps));
    }
    if (kind == "gaussian") {
        std::vector<GaussianStep> steps;
        for (const auto& row : rows) steps.push_back({row.at(1), row.at(2)});
        check_steps(steps.size());
        return ForecastDistribution::gaussian(std::move(steps));
    }
    if (kind == "gmm") {
        std::vector<GmmDensity> steps(h);
        for (const auto& row : rows) {
            const auto k = static_cast<std::size_t>(row.at(0));
            if (k >= h) throw std::invalid_argument(path.string() + ": step out of range");
            steps[k].weights.push_back(row.at(2));
            steps[k].means.push_back(row.at(3));
            steps[k].variances.push_back(row.at(4));
        }
        for (const auto& s : steps) s.validate();
        return ForecastDistribution::gmm(std::move(steps));
    }
    throw std::invalid_argument("unknown density kind '" + kind + "'");
}

}  // namespace

void write_forecast(const std::filesystem::path& dir, const ForecastArtifact& a) {
    std::filesystem::create_directories(dir);
    const ForecastDistribution& dist = a.distribution;
    const std::size_t h = dist.horizon();
    if (a.trajectories.size() > 0 && static_cast<std::size_t>(a.trajectories.horizon()) != h)
        throw std::invalid_argument("trajectory horizon does not match the densities");

    nlohmann::ordered_json meta;
    meta["schema_version"] = kArtifactSchema;
    meta["model"] = a.model;
    meta["dataset"] = a.dataset;
    meta["kind"] = kind_name(dist.kind());
    meta["horizon"] = h;
    meta["origin"] = a.origin;
    meta["seed"] = a.seed;
    meta["prep"] = {{"detrend", a.prep.detrend}, {"period", a.prep.period}};
    if (dist.kind() == ForecastDistribution::Kind::categorical) {
        const auto& p = dist.as_categorical().partition;
        meta["partition"] = {{"lower", p.lower()}, {"upper", p.upper()}, {"bins", p.bins()}};
    }
    meta["quantile_levels"] = kQuantileLevels;
    meta["trajectories"] = a.trajectories.size();
    meta["trajectory_origin"] = a.trajectories.origin == TrajectoryEnsemble::Origin::gp ? "gp" : "model";
    {
        std::ofstream out = open_out(dir / "forecast.json");
        out << meta.dump(2) << '\n';
    }
    {
        std::ofstream out = open_out(dir / "densities.csv");
        write_densities(out, dist);
    }
    {
        std::vector<metrics::QuantileSeries> qs;
        for (double alpha : kQuantileLevels) qs.push_back(metrics::quantile_series(dist, alpha));
        std::ofstream out = open_out(dir / "quantiles.csv");
        out << "step";
        for (double alpha : kQuantileLevels) {
            std::ostringstream label;
            label << alpha;
            out << ",q" << label.str();
        }
        out << '\n';
        for (std::size_t k = 0; k < h; ++k) {
            out << k;
            for (const auto& q : qs) out << ',' << csv::format(q.values[k]);
            out << '\n';
        }
    }
    {
        std::ofstream out = open_out(dir / "trajectories.csv");
        write_ensemble_csv(out, a.trajectories);
    }
}

ForecastArtifact read_forecast(const std::filesystem::path& dir) {
    const nlohmann::json meta = load_json(dir / "forecast.json");
    if (meta.at("schema_version").get<int>() != kArtifactSchema)
        throw std::invalid_argument(dir.string() + ": unsupported forecast schema version");
    ForecastArtifact a;
    a.model = meta.at("model").get<std::string>();
    a.dataset = meta.at("dataset").get<std::string>();
    a.seed = meta.at("seed").get<std::uint64_t>();
    a.origin = meta.at("origin").get<std::size_t>();
    a.prep.detrend = meta.at("prep").at("detrend").get<bool>();
    a.prep.period = meta.at("prep").at("period").get<std::size_t>();
    a.distribution = read_densities(dir / "densities.csv", meta);
    const auto origin = meta.value("trajectory_origin", "model") == "gp" ? TrajectoryEnsemble::Origin::gp
                                                                          : TrajectoryEnsemble::Origin::model;
    std::ifstream in = open_in(dir / "trajectories.csv");
    a.trajectories = read_ensemble_csv(in, origin);
    if (a.trajectories.size() != meta.at("trajectories").get<Eigen::Index>())
        throw std::invalid_argument(dir.string() + ": trajectory count does not match forecast.json");
    return a;
}

}  // namespace mordred::cli
