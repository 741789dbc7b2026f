// Serial reference vs OpenMP kernel for each parallel hot spot.
// Set OMP_NUM_THREADS to compare thread counts.

#include <benchmark/benchmark.h>

#include <cmath>

#include "mordred/events.hpp"
#include "mordred/gmm.hpp"
#include "mordred/gp.hpp"
#include "mordred/seq2seq.hpp"

using namespace mordred;

namespace {

std::vector<double> wave(std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t t = 0; t < n; ++t) v[t] = std::sin(0.2 * static_cast<double>(t)) + 0.3 * std::sin(0.05 * t);
    return v;
}

const seq2seq::Seq2SeqModel& ordinal_model() {
    static const auto model = [] {
        const auto partition = ordinal::BinPartition(-1.5, 1.5, 64);
        return seq2seq::Seq2SeqModel::create(seq2seq::Mode::ordinal, 64, 50, partition, 0.25, false, 1);
    }();
    return model;
}

void BM_McDropout(benchmark::State& state) {
    const bool parallel = state.range(0) != 0;
    const auto series = wave(200);
    for (auto _ : state) {
        auto f = parallel ? seq2seq::mc_dropout_forecast(ordinal_model(), series, 100, 32, 7)
                          : seq2seq::mc_dropout_forecast_serial(ordinal_model(), series, 100, 32, 7);
        benchmark::DoNotOptimize(f);
    }
}
BENCHMARK(BM_McDropout)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

const gp::GpModel& gp_model() {
    static const auto model = [] {
        auto [x, y] = gp::training_windows(wave(600), 16, 400);
        return gp::condition(x, y, gp::default_hyper(x, y));
    }();
    return model;
}

void BM_GpTrajectories(benchmark::State& state) {
    const bool parallel = state.range(0) != 0;
    const auto seed = wave(100);
    for (auto _ : state) {
        auto e = parallel ? gp::gp_mc_trajectories(gp_model(), seed, 100, 64, 3)
                          : gp::gp_mc_trajectories_serial(gp_model(), seed, 100, 64, 3);
        benchmark::DoNotOptimize(e);
    }
}
BENCHMARK(BM_GpTrajectories)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

TrajectoryEnsemble random_ensemble(Eigen::Index paths, Eigen::Index horizon) {
    TrajectoryEnsemble e;
    Rng rng(5);
    std::normal_distribution<double> n;
    e.paths.resize(paths, horizon);
    for (Eigen::Index s = 0; s < paths; ++s)
        for (Eigen::Index k = 0; k < horizon; ++k)
            e.paths(s, k) = std::sin(0.1 * static_cast<double>(k)) + (s % 2 ? 2.0 : -2.0) + 0.5 * n(rng);
    return e;
}

void BM_StepwiseGmm(benchmark::State& state) {
    const bool parallel = state.range(0) != 0;
    const auto ens = random_ensemble(100, 200);
    for (auto _ : state) {
        auto f = parallel ? gmm::fit_stepwise_gmm(ens, 5) : gmm::fit_stepwise_gmm_serial(ens, 5);
        benchmark::DoNotOptimize(f);
    }
}
BENCHMARK(BM_StepwiseGmm)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

void BM_TrajectoryTimings(benchmark::State& state) {
    const bool parallel = state.range(0) != 0;
    const auto ens = random_ensemble(1000, 1000);
    for (auto _ : state) {
        auto t = parallel ? events::trajectory_timings(ens) : events::trajectory_timings_serial(ens);
        benchmark::DoNotOptimize(t);
    }
}
BENCHMARK(BM_TrajectoryTimings)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
