#include "doctest.h"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stack>
#include <unistd.h>

#include <json.hpp>

#include "mordred/checkpoint.hpp"
#include "mordred/cli.hpp"
#include "mordred/csv_io.hpp"
#include "mordred/events.hpp"
#include "mordred/metrics.hpp"
#include "mordred/seq2seq.hpp"

namespace fs = std::filesystem;
using namespace mordred;
using nlohmann::json;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) {
        path = fs::temp_directory_path() / ("mordred_cli_" + name + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

int run_cli(std::vector<std::string> args) { return cli::run(args); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

std::vector<std::vector<double>> read_rows(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        std::vector<double> row;
        for (const auto& f : csv::split_line(line)) row.push_back(std::stod(f));
        rows.push_back(row);
    }
    return rows;
}

void write_sine(const fs::path& p, std::size_t n, double period) {
    std::vector<double> v(n);
    for (std::size_t t = 0; t < n; ++t) v[t] = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period);
    csv::write_series(p, v);
}

// every byte of every file under a directory, keyed by relative path
std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return out;
}

// Minimal well-formedness check: balanced tags, quoted attributes, one root.
bool well_formed_xml(const std::string& s) {
    std::stack<std::string> open;
    std::size_t roots = 0;
    std::size_t i = 0;
    while ((i = s.find('<', i)) != std::string::npos) {
        const std::size_t end = s.find('>', i);
        if (end == std::string::npos) return false;
        std::string tag = s.substr(i + 1, end - i - 1);
        i = end + 1;
        if (tag.empty()) return false;
        if (tag[0] == '?' || tag[0] == '!') continue;
        if (std::count(tag.begin(), tag.end(), '"') % 2) return false;
        if (tag[0] == '/') {
            if (open.empty() || open.top() != tag.substr(1)) return false;
            open.pop();
            continue;
        }
        const bool self_closing = tag.back() == '/';
        const std::string name = tag.substr(0, tag.find_first_of(" /"));
        if (open.empty()) ++roots;
        if (!self_closing) open.push(name);
    }
    return open.empty() && roots == 1;
}

std::vector<std::string> mordred_small(const TempDir& d, const std::string& data, const std::string& out) {
    return {"train",      "--data",    data,  "--model", "mordred", "--out",  d / out,       "--lookback",
            "10",         "--bins",    "16",  "--units", "4",       "--epochs", "2",         "--decoder-length",
            "3",          "--stride",  "8",   "--batch", "32",      "--seed", "5"};
}

}  // namespace

TEST_CASE("generate is deterministic and documents itself") {
    TempDir d("generate");
    REQUIRE(run_cli({"generate", "--system", "lorenz", "--n", "500", "--seed", "7", "--out", d / "a.csv"}) == 0);
    REQUIRE(run_cli({"generate", "--system", "lorenz", "--n", "500", "--seed", "7", "--out", d / "b.csv"}) == 0);
    CHECK(slurp(d / "a.csv") == slurp(d / "b.csv"));
    CHECK(slurp(d / "a.json") == slurp(d / "b.json"));
    CHECK(csv::read_series(fs::path(d / "a.csv")).size() == 500);

    const json meta = read_json(d / "a.json");
    CHECK(meta["schema_version"] == cli::kArtifactSchema);
    CHECK(meta["seed"] == 7);
    CHECK(meta["system"] == "lorenz");
    CHECK(meta["split"]["train_end"] == 350);
    CHECK(meta["split"]["validation_end"] == 425);
    CHECK(meta["transform"].contains("mean"));
    CHECK(meta["transform"].contains("scale"));

    SUBCASE("stochastic systems follow the seed") {
        REQUIRE(run_cli({"generate", "--system", "timmer_ar2", "--n", "300", "--seed", "1", "--out", d / "s1.csv"}) == 0);
        REQUIRE(run_cli({"generate", "--system", "timmer_ar2", "--n", "300", "--seed", "2", "--out", d / "s2.csv"}) == 0);
        CHECK(slurp(d / "s1.csv") != slurp(d / "s2.csv"));
    }
    SUBCASE("parameter overrides") {
        REQUIRE(run_cli({"generate", "--system", "logistic", "--n", "30", "--param", "A=2.5", "--out", d / "l.csv"}) == 0);
        for (double x : csv::read_series(fs::path(d / "l.csv"))) CHECK(x == doctest::Approx(0.6).epsilon(1e-9));
        CHECK(run_cli({"generate", "--system", "logistic", "--param", "B=2", "--out", d / "l2.csv"}) == 1);
    }
}

TEST_CASE("usage errors exit with 1") {
    TempDir d("usage");
    CHECK(run_cli({"generate", "--system", "no_such_system", "--out", d / "x.csv"}) == 1);
    CHECK(run_cli({"generate", "--out", d / "x.csv"}) == 1);
    CHECK(run_cli({}) == 1);
    CHECK(run_cli({"frobnicate"}) == 1);
    CHECK(run_cli({"train", "--data", d / "missing.csv", "--model", "ar", "--out", d / "m"}) == 1);
    CHECK(run_cli({"train", "--data", d / "missing.csv", "--model", "lstm", "--out", d / "m"}) == 1);
    CHECK(run_cli({"--help"}) == 0);
}

TEST_CASE("config files are expanded before explicit flags") {
    TempDir d("config");
    {
        std::ofstream cfg(d / "c.json");
        cfg << R"({"units": [64, 128], "l2": 1e-7, "detrend": true, "noise": false, "label": "MACKEY"})";
    }
    const auto args = cli::expand_config({"train", "--config", d / "c.json", "--units", "8"});
    const std::vector<std::string> expected{"train",   "--units", "64,128",  "--l2", "1e-07", "--detrend",
                                            "--label", "MACKEY",  "--units", "8"};
    CHECK(args == expected);
    CHECK(cli::expand_config({"generate", "--n", "5"}) == std::vector<std::string>{"generate", "--n", "5"});

    SUBCASE("flags override file values end to end") {
        {
            std::ofstream cfg(d / "g.json");
            cfg << R"({"system": "henon", "n": 50, "seed": 3})";
        }
        REQUIRE(run_cli({"generate", "--config", d / "g.json", "--n", "40", "--out", d / "h.csv"}) == 0);
        CHECK(csv::read_series(fs::path(d / "h.csv")).size() == 40);
        CHECK(read_json(d / "h.json")["system"] == "henon");
    }
    CHECK(cli::parse_number_list("64, 128,256") == std::vector<double>{64, 128, 256});
    CHECK_THROWS(cli::parse_number_list("64,abc"));
}

TEST_CASE("shipped tuned tables") {
    const fs::path dir = fs::path(MORDRED_SOURCE_DIR) / "configs" / "tuned";
    const json mordred_table = read_json(dir / "mordred.json");
    const json& mackey = mordred_table["rows"]["MACKEY"];
    CHECK(mackey["units"] == 256);
    CHECK(mackey["p_drop"] == 0.25);
    CHECK(mackey["l2"] == 1e-7);
    CHECK(mackey["bins"] == 300);
    CHECK(mordred_table["rows"]["SF_Acont"]["bins"] == 236);
    CHECK(mordred_table["rows"].size() == 45);
    CHECK(mordred_table["aliases"]["mackey_glass"] == "MACKEY");

    const json reg = read_json(dir / "seq2seq_reg.json");
    CHECK(reg["rows"]["MACKEY"]["units"] == 128);
    CHECK(reg["rows"]["EMlorenz"]["l2"] == 1e-7);

    const json ar = read_json(dir / "ar.json");
    CHECK(ar["rows"]["ECG"]["ar_order"] == 32);
    CHECK(ar["rows"]["MUS.3_78"]["ar_order"] == 16);

    SUBCASE("train picks rows up unless a flag is given") {
        TempDir d("tuned");
        REQUIRE(run_cli({"generate", "--system", "mackey_glass", "--n", "2000", "--out", d / "mackey_glass.csv"}) == 0);
        REQUIRE(run_cli({"train", "--data", d / "mackey_glass.csv", "--model", "ar", "--tuned", (dir / "ar.json").string(),
                     "--out", d / "m1"}) == 0);
        CHECK(read_json(d / "m1/model.json")["selected"]["ar_order"] == 16);
        REQUIRE(run_cli({"train", "--data", d / "mackey_glass.csv", "--model", "ar", "--tuned", (dir / "ar.json").string(),
                     "--label", "ECG", "--out", d / "m2"}) == 0);
        CHECK(read_json(d / "m2/model.json")["selected"]["ar_order"] == 32);
        REQUIRE(run_cli({"train", "--data", d / "mackey_glass.csv", "--model", "ar", "--tuned", (dir / "ar.json").string(),
                     "--ar-order", "4", "--out", d / "m3"}) == 0);
        CHECK(read_json(d / "m3/model.json")["selected"]["ar_order"] == 4);
        CHECK(run_cli({"train", "--data", d / "mackey_glass.csv", "--model", "ar", "--tuned", (dir / "ar.json").string(),
                   "--label", "NOPE", "--out", d / "m4"}) == 1);
    }
}

TEST_CASE("train: grid search, logs and checkpoint reload") {
    TempDir d("train");
    REQUIRE(run_cli({"generate", "--system", "mackey_glass", "--n", "1500", "--out", d / "mg.csv"}) == 0);

    SUBCASE("single point grid is one run") {
        REQUIRE(run_cli(mordred_small(d, d / "mg.csv", "one")) == 0);
        CHECK(read_json(d / "one/grid.json")["cells"].size() == 1);
    }

    auto args = mordred_small(d, d / "mg.csv", "grid");
    args.insert(args.end(), {"--units", "3,4", "--l2", "1e-7,1e-6"});
    // later flags win over earlier ones
    REQUIRE(run_cli(args) == 0);
    const json grid = read_json(d / "grid/grid.json");
    REQUIRE(grid["cells"].size() == 4);
    std::size_t argmin = 0;
    for (std::size_t c = 0; c < 4; ++c) {
        CHECK(grid["cells"][c]["status"] == "ok");
        if (grid["cells"][c]["validation_loss"].get<double>() < grid["cells"][argmin]["validation_loss"].get<double>())
            argmin = c;
    }
    CHECK(grid["winner"] == argmin);
    CHECK(grid["cells"][0]["params"]["units"] == 3);
    CHECK(grid["cells"][3]["params"]["l2"] == 1e-6);

    // the log holds every epoch of every cell, and each cell's best matches grid.json
    const auto log = read_rows(d / "grid/training_log.csv");
    std::vector<double> best(4, INFINITY);
    for (const auto& r : log) best[static_cast<std::size_t>(r[0])] = std::min(best[static_cast<std::size_t>(r[0])], r[3]);
    for (std::size_t c = 0; c < 4; ++c) CHECK(best[c] == grid["cells"][c]["validation_loss"].get<double>());

    // reloading the checkpoint reproduces the winner's validation loss
    const json model_json = read_json(d / "grid/model.json");
    const auto model = checkpoint::load(d / "grid/model.ckpt");
    CHECK(model.units == grid["cells"][argmin]["params"]["units"].get<std::size_t>());
    const cli::PreparedData data = cli::prepare_dataset(d / "mg.csv", {});
    std::vector<double> val(data.split.train.end() - 10, data.split.train.end());
    val.insert(val.end(), data.split.validation.begin(), data.split.validation.end());
    const auto series = seq2seq::SeriesData::ordinal(ordinal::quantize(val, *model.partition));
    const auto windows = seq2seq::make_windows(series.size(), 10, 1, model_json["decoder_length"].get<std::size_t>());
    const double reloaded = seq2seq::evaluate_loss(model, series, windows, 32);
    CHECK(std::abs(reloaded - model_json["validation_loss"].get<double>()) < 1e-12);

    SUBCASE("divergence exits with 2 and keeps the log") {
        auto bad = mordred_small(d, d / "mg.csv", "bad");
        bad.insert(bad.end(), {"--l2", "1e308"});
        CHECK(run_cli(bad) == 2);
        const json g = read_json(d / "bad/grid.json");
        CHECK(g["cells"][0]["status"] == "diverged");
        CHECK(g["winner"].is_null());
    }
}

TEST_CASE("forecast artifacts") {
    TempDir d("forecast");
    REQUIRE(run_cli({"generate", "--system", "mackey_glass", "--n", "1500", "--out", d / "mg.csv"}) == 0);
    REQUIRE(run_cli(mordred_small(d, d / "mg.csv", "m")) == 0);
    const std::vector<std::string> fc{"forecast", "--model-dir", d / "m",    "--data", d / "mg.csv", "--horizon",
                                      "50",       "--samples",   "20",       "--seed", "11",         "--out"};
    auto run_fc = [&](const std::string& out) {
        auto a = fc;
        a.push_back(d / out);
        return run_cli(a);
    };
    REQUIRE(run_fc("f1") == 0);

    const json meta = read_json(d / "f1/forecast.json");
    CHECK(meta["kind"] == "categorical");
    CHECK(meta["horizon"] == 50);
    CHECK(meta["origin"] == 1275);
    CHECK(meta["seed"] == 11);

    const auto dens = read_rows(d / "f1/densities.csv");
    REQUIRE(dens.size() == 50);
    for (const auto& row : dens) {
        CHECK(row.size() == 17);
        CHECK(std::abs(std::accumulate(row.begin() + 1, row.end(), 0.0) - 1.0) < 1e-9);
    }

    // the median column equals the 0.5 quantile recomputed from the stored densities
    const cli::ForecastArtifact art = cli::read_forecast(d / "f1");
    const auto median = metrics::quantile_series(art.distribution, 0.5).values;
    const auto quant = read_rows(d / "f1/quantiles.csv");
    REQUIRE(quant.size() == 50);
    for (std::size_t k = 0; k < 50; ++k) {
        CHECK(quant[k][3] == doctest::Approx(median[k]).epsilon(1e-12));
        CHECK(quant[k][1] <= quant[k][2]);
        CHECK(quant[k][2] <= quant[k][3]);
        CHECK(quant[k][4] <= quant[k][5]);
    }
    CHECK(art.trajectories.size() == 100);
    CHECK(art.trajectories.horizon() == 50);

    REQUIRE(run_fc("f2") == 0);
    CHECK(snapshot(d.path / "f1") == snapshot(d.path / "f2"));

    SUBCASE("a different seed changes the forecast") {
        auto a = fc;
        a[a.size() - 2] = "12";
        a.push_back(d / "f3");
        REQUIRE(run_cli(a) == 0);
        CHECK(slurp(d / "f1/densities.csv") != slurp(d / "f3/densities.csv"));
    }
    SUBCASE("horizon longer than the test split") {
        auto a = fc;
        a[6] = "100000";
        a.push_back(d / "f4");
        CHECK(run_cli(a) == 1);
    }
    SUBCASE("missing model directory") {
        CHECK(run_cli({"forecast", "--model-dir", d / "nothing", "--data", d / "mg.csv", "--out", d / "f5"}) == 1);
    }
}

TEST_CASE("baseline forecasts: Gaussian and mixture densities") {
    TempDir d("baselines");
    REQUIRE(run_cli({"generate", "--system", "henon", "--n", "1200", "--out", d / "henon.csv"}) == 0);
    REQUIRE(run_cli({"train", "--data", d / "henon.csv", "--model", "ar", "--ar-order", "2,4", "--out", d / "ar"}) == 0);
    REQUIRE(run_cli({"train", "--data", d / "henon.csv", "--model", "gp-gmm", "--lookback", "4", "--gp-max-points", "150",
                 "--gp-iterations", "20", "--gp-restarts", "1", "--out", d / "gp"}) == 0);
    REQUIRE(run_cli({"forecast", "--model-dir", d / "ar", "--data", d / "henon.csv", "--horizon", "30", "--out", d / "fa"}) == 0);
    REQUIRE(run_cli({"forecast", "--model-dir", d / "gp", "--data", d / "henon.csv", "--horizon", "30", "--trajectories",
                 "60", "--out", d / "fg"}) == 0);

    CHECK(read_json(d / "fa/forecast.json")["kind"] == "gaussian");
    const auto g = read_rows(d / "fa/densities.csv");
    REQUIRE(g.size() == 30);
    for (const auto& row : g) CHECK(row[2] > 0.0);

    CHECK(read_json(d / "fg/forecast.json")["kind"] == "gmm");
    CHECK(read_json(d / "fg/forecast.json")["trajectory_origin"] == "gp");
    const cli::ForecastArtifact art = cli::read_forecast(d / "fg");
    for (const auto& step : art.distribution.as_gmm()) {
        CHECK(step.components() >= 1);
        CHECK(step.components() <= 5);
        CHECK(std::abs(std::accumulate(step.weights.begin(), step.weights.end(), 0.0) - 1.0) < 1e-9);
    }
}

TEST_CASE("evaluate") {
    TempDir d("evaluate");
    for (const char* sys : {"henon", "lozi"})
        REQUIRE(run_cli({"generate", "--system", sys, "--n", "1000", "--out", d / (std::string(sys) + ".csv")}) == 0);
    std::vector<std::string> forecasts;
    for (const char* sys : {"henon", "lozi"}) {
        const std::string data = d / (std::string(sys) + ".csv");
        for (const char* order : {"2", "6"}) {
            const std::string tag = std::string(sys) + order;
            REQUIRE(run_cli({"train", "--data", data, "--model", "ar", "--ar-order", order, "--out", d / ("m" + tag)}) == 0);
            REQUIRE(run_cli({"forecast", "--model-dir", d / ("m" + tag), "--data", data, "--horizon", "40", "--out",
                         d / ("f" + tag)}) == 0);
            forecasts.push_back(d / ("f" + tag));
        }
    }
    // the two orders share a model id; relabel one of them
    for (const char* sys : {"henon6", "lozi6"}) {
        json meta = read_json(d / (std::string("f") + sys + "/forecast.json"));
        meta["model"] = "ar-high";
        std::ofstream(d / (std::string("f") + sys + "/forecast.json")) << meta.dump(2);
    }

    std::vector<std::string> args{"evaluate", "--forecast"};
    args.insert(args.end(), forecasts.begin(), forecasts.end());
    args.insert(args.end(), {"--data", d / "henon.csv", d / "lozi.csv", "--out", d / "ev"});
    REQUIRE(run_cli(args) == 0);

    const auto metrics_csv = slurp(d / "ev/metrics.csv");
    const auto lines = std::count(metrics_csv.begin(), metrics_csv.end(), '\n');
    CHECK(lines == 1 + 2 * 2 * static_cast<long>(metrics::MetricsReport::metric_names().size()));
    const json ranks = read_json(d / "ev/ranks.json");
    CHECK(ranks["datasets"].size() == 2);
    CHECK(ranks["models"] == json({"ar", "ar-high"}));
    for (const auto& metric : ranks["metrics"]) {
        const double total = ranks["best_count"][metric.get<std::string>()]["ar"].get<double>() +
                             ranks["best_count"][metric.get<std::string>()]["ar-high"].get<double>();
        CHECK(total == doctest::Approx(2.0));
    }

    SUBCASE("evaluation is reproducible") {
        args.back() = d / "ev2";
        REQUIRE(run_cli(args) == 0);
        CHECK(snapshot(d.path / "ev") == snapshot(d.path / "ev2"));
    }
    SUBCASE("misaligned truth is rejected") {
        REQUIRE(run_cli({"generate", "--system", "henon", "--n", "900", "--out", d / "short/henon.csv"}) == 0);
        CHECK(run_cli({"evaluate", "--forecast", forecasts[0], "--data", d / "short/henon.csv", "--out", d / "ev3"}) == 1);
        CHECK(run_cli({"evaluate", "--forecast", forecasts[0], "--data", d / "lozi.csv", "--out", d / "ev4"}) == 1);
    }
}

TEST_CASE("evaluate: truth drawn from the forecast itself is calibrated") {
    TempDir d("selfcal");
    write_sine(d.path / "wave.csv", 20000, 37.0);
    const cli::PreparedData data = cli::prepare_dataset(d.path / "wave.csv", {});
    const std::vector<double> truth = data.truth(data.split.test.size());

    // step k is N(truth_k - e_k, 1) with e_k ~ N(0, 1), so truth_k is a draw from step k
    Rng rng(99);
    std::normal_distribution<double> normal;
    std::vector<GaussianStep> steps;
    for (double x : truth) steps.push_back({x - normal(rng), 1.0});
    cli::ForecastArtifact art;
    art.model = "oracle";
    art.dataset = "wave";
    art.origin = data.split.validation_end;
    art.distribution = ForecastDistribution::gaussian(steps);
    art.trajectories = sample_trajectories(art.distribution, 5, 1);
    cli::write_forecast(d.path / "f", art);

    REQUIRE(run_cli({"evaluate", "--forecast", d / "f", "--data", d / "wave.csv", "--out", d / "ev"}) == 0);
    double qq = -1.0;
    std::ifstream in(d / "ev/metrics.csv");
    std::string line;
    while (std::getline(in, line))
        if (line.rfind("oracle,wave,qqdist,", 0) == 0) qq = std::stod(line.substr(19));
    CHECK(qq >= 0.0);
    CHECK(qq < 0.01);
}

TEST_CASE("events: timing table on a noiseless sine") {
    TempDir d("events");
    const double period = 40.0;
    write_sine(d.path / "sine.csv", 4000, period);
    const cli::PreparedData data = cli::prepare_dataset(d.path / "sine.csv", {});
    const std::size_t horizon = 200;
    const std::vector<double> truth = data.truth(horizon);

    auto write_model = [&](const std::string& name, double shift, double variance) {
        std::vector<GaussianStep> steps;
        for (std::size_t k = 0; k < horizon; ++k) {
            const double t = static_cast<double>(data.split.validation_end + k) + shift;
            const double raw = std::sin(2.0 * std::numbers::pi * t / period);
            steps.push_back({(raw - data.split.mean) / data.split.scale, variance});
        }
        cli::ForecastArtifact art;
        art.model = name;
        art.dataset = "sine";
        art.origin = data.split.validation_end;
        art.distribution = ForecastDistribution::gaussian(steps);
        art.trajectories = sample_trajectories(art.distribution, 50, 3);
        cli::write_forecast(d.path / name, art);
    };
    write_model("sharp", 0.0, 1e-4);
    write_model("lagged", period / 2.0, 1e-4);

    const std::vector<std::string> args{"events", "--forecast", d / "sharp", d / "lagged", "--data",
                                        d / "sine.csv", "--min-distance", "10", "--out"};
    auto a1 = args;
    a1.push_back(d / "ev1");
    REQUIRE(run_cli(a1) == 0);

    std::ifstream in(d / "ev1/timing_nll.csv");
    std::string header, row, best_row;
    std::getline(in, header);
    std::getline(in, row);
    std::getline(in, best_row);
    CHECK(header == "dataset,sharp,lagged,uniform,best");
    const auto cells = csv::split_line(row);
    REQUIRE(cells.size() == 5);
    CHECK(cells[0] == "sine");
    const double sharp = std::stod(cells[1]), lagged = std::stod(cells[2]), uniform = std::stod(cells[3]);
    CHECK(sharp < uniform);
    CHECK(sharp < lagged);
    CHECK(cells[4] == "sharp");
    CHECK(best_row == "# BEST,1,0,,");

    // L' true peaks of a sine of period 40 over 200 steps, and the uniform baseline
    const auto peaks = events::detect_peaks(truth, {0.0, 10});
    CHECK(peaks.size() == 5);
    CHECK(uniform == doctest::Approx(5.0 * std::log(200.0)).epsilon(1e-12));

    const auto density = read_rows(d / "ev1/timing_density_sharp_sine.csv");
    CHECK(density.size() == horizon);

    auto a2 = args;
    a2.push_back(d / "ev2");
    REQUIRE(run_cli(a2) == 0);
    CHECK(snapshot(d.path / "ev1") == snapshot(d.path / "ev2"));

    SUBCASE("no events is an error") {
        std::vector<double> flat(1000, 0.0);
        for (std::size_t t = 0; t < flat.size(); ++t) flat[t] = static_cast<double>(t);
        csv::write_series(d.path / "ramp.csv", flat);
        const cli::PreparedData ramp = cli::prepare_dataset(d.path / "ramp.csv", {});
        cli::ForecastArtifact art;
        art.model = "m";
        art.dataset = "ramp";
        art.origin = ramp.split.validation_end;
        art.distribution = ForecastDistribution::gaussian(std::vector<GaussianStep>(50, {0.0, 1.0}));
        art.trajectories = sample_trajectories(art.distribution, 5, 1);
        cli::write_forecast(d.path / "fr", art);
        CHECK(run_cli({"events", "--forecast", d / "fr", "--data", d / "ramp.csv", "--out", d / "ev3"}) != 0);
    }
}

TEST_CASE("plot: fan chart") {
    std::vector<GaussianStep> steps;
    std::vector<double> truth;
    for (std::size_t k = 0; k < 24; ++k) {
        steps.push_back({std::sin(0.3 * static_cast<double>(k)), 0.01 + 0.01 * static_cast<double>(k)});
        truth.push_back(std::sin(0.3 * static_cast<double>(k) + 0.1));
    }
    const auto dist = ForecastDistribution::gaussian(steps);
    const std::string svg = cli::fan_chart_svg(dist, truth, "demo & <test>");
    CHECK(well_formed_xml(svg));
    CHECK(svg.find("demo &amp; &lt;test&gt;") != std::string::npos);

    const auto band_at = svg.find("id=\"band\"");
    REQUIRE(band_at != std::string::npos);
    const auto points_at = svg.find("points=\"", band_at) + 8;
    const std::string points = svg.substr(points_at, svg.find('"', points_at) - points_at);
    CHECK(std::count(points.begin(), points.end(), ',') == 2 * 24);
    CHECK(svg.find("id=\"median\"") != std::string::npos);
    CHECK(svg.find("id=\"truth\"") != std::string::npos);
    CHECK(svg.find("timing-density") == std::string::npos);

    const std::string golden = slurp(fs::path(MORDRED_TEST_DATA_DIR) / "fan_chart.svg");
    CHECK(svg == golden);

    SUBCASE("timing panel") {
        cli::TimingPanel panel{std::vector<double>(24, 1.0 / 24.0), {5, 15}};
        const std::string with_panel = cli::fan_chart_svg(dist, truth, "demo", panel);
        CHECK(well_formed_xml(with_panel));
        CHECK(with_panel.find("id=\"timing-density\"") != std::string::npos);
        std::size_t markers = 0, at = 0;
        while ((at = with_panel.find("class=\"true-event\"", at)) != std::string::npos) ++markers, ++at;
        CHECK(markers == 2);
    }
    SUBCASE("plot command") {
        TempDir d("plot");
        write_sine(d.path / "sine.csv", 1000, 25.0);
        const cli::PreparedData data = cli::prepare_dataset(d.path / "sine.csv", {});
        cli::ForecastArtifact art;
        art.model = "m";
        art.dataset = "sine";
        art.origin = data.split.validation_end;
        art.distribution = ForecastDistribution::gaussian(std::vector<GaussianStep>(100, {0.0, 0.5}));
        art.trajectories = sample_trajectories(art.distribution, 20, 1);
        cli::write_forecast(d.path / "f", art);
        REQUIRE(run_cli({"plot", "--forecast", d / "f", "--data", d / "sine.csv", "--out", d / "a.svg"}) == 0);
        REQUIRE(run_cli({"plot", "--forecast", d / "f", "--data", d / "sine.csv", "--out", d / "b.svg", "--events"}) == 0);
        CHECK(well_formed_xml(slurp(d / "a.svg")));
        CHECK(well_formed_xml(slurp(d / "b.svg")));
        CHECK(slurp(d / "b.svg").find("timing-density") != std::string::npos);
        REQUIRE(run_cli({"plot", "--forecast", d / "f", "--data", d / "sine.csv", "--out", d / "c.svg"}) == 0);
        CHECK(slurp(d / "a.svg") == slurp(d / "c.svg"));
    }
}
