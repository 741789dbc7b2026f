#include "mordred/ensemble.hpp"

#include <algorithm>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace mordred {

std::vector<GaussianStep> correct_moments(const TrajectoryEnsemble& ensemble) {
    require(ensemble.size() >= 2, "correct_moments needs at least 2 trajectories");
    const auto s = static_cast<double>(ensemble.size());
    std::vector<GaussianStep> steps(static_cast<std::size_t>(ensemble.horizon()));
    for (Eigen::Index k = 0; k < ensemble.horizon(); ++k) {
        const auto col = ensemble.paths.col(k);
        const double mu = col.sum() / s;
        const double var = (col.array() - mu).square().sum() / s;
        steps[static_cast<std::size_t>(k)] = {mu, var};
    }
    return steps;
}

ForecastDistribution gaussian_with_floor(std::vector<GaussianStep> steps, double floor) {
    for (auto& s : steps) s.variance = std::max(s.variance, floor);
    return ForecastDistribution::gaussian(std::move(steps));
}

TrajectoryEnsemble sample_trajectories(const ForecastDistribution& dist, std::size_t count, std::uint64_t seed) {
    require(count >= 1, "sample_trajectories: count must be positive");
    TrajectoryEnsemble ens;
    ens.origin = TrajectoryEnsemble::Origin::model;
    ens.paths.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dist.horizon()));
    for (std::size_t s = 0; s < count; ++s) {
        Rng rng = stream_rng(seed, s);
        for (std::size_t k = 0; k < dist.horizon(); ++k)
            ens.paths(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k)) = dist.sample(k, rng);
    }
    return ens;
}

void write_ensemble_csv(std::ostream& out, const TrajectoryEnsemble& ensemble) {
    out << std::setprecision(17);
    for (Eigen::Index s = 0; s < ensemble.size(); ++s) {
        for (Eigen::Index k = 0; k < ensemble.horizon(); ++k) {
            if (k) out << ',';
            out << ensemble.paths(s, k);
        }
        out << '\n';
    }
}

TrajectoryEnsemble read_ensemble_csv(std::istream& in, TrajectoryEnsemble::Origin origin) {
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        require(rows.empty() || row.size() == rows.front().size(), "ensemble CSV rows differ in length");
        rows.push_back(std::move(row));
    }
    require(!rows.empty(), "ensemble CSV is empty");
    TrajectoryEnsemble ens;
    ens.origin = origin;
    ens.paths.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t s = 0; s < rows.size(); ++s)
        for (std::size_t k = 0; k < rows[s].size(); ++k)
            ens.paths(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k)) = rows[s][k];
    return ens;
}

}  // namespace mordred
