#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "internal.hpp"
#include "mordred/ar.hpp"
#include "mordred/checkpoint.hpp"
#include "mordred/cli.hpp"
#include "mordred/csv_io.hpp"
#include "mordred/datagen.hpp"
#include "mordred/events.hpp"
#include "mordred/gmm.hpp"
#include "mordred/gp.hpp"
#include "mordred/metrics.hpp"
#include "mordred/parallel.hpp"
#include "mordred/seq2seq.hpp"

namespace mordred::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

const std::vector<std::string> kModels{"mordred", "seq2seq-reg", "ar", "gp-mc", "gp-gmm"};

// Sub-seeds for the independent random streams of one command.
enum class Purpose : std::uint64_t { noise = 1, trajectories = 2 };

std::uint64_t derive_seed(std::uint64_t seed, Purpose purpose) {
    Rng rng = stream_rng(seed, 1000 + static_cast<std::uint64_t>(purpose));
    return rng();
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out = open_out(path);
    out << text;
}

template <class T>
std::vector<T> as_list(const std::string& text, const char* what) {
    std::vector<T> out;
    for (double v : parse_number_list(text)) {
        if constexpr (std::is_integral_v<T>) {
            if (v < 1 || v != std::floor(v)) throw std::invalid_argument(std::string(what) + " must be positive integers");
            out.push_back(static_cast<T>(v));
        } else {
            out.push_back(static_cast<T>(v));
        }
    }
    return out;
}

std::vector<double> tail(const std::vector<double>& v, std::size_t n) {
    n = std::min(n, v.size());
    return {v.end() - static_cast<std::ptrdiff_t>(n), v.end()};
}

std::vector<double> concat(std::vector<double> a, const std::vector<double>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

// ---- generate ----------------------------------------------------------

struct GenerateArgs {
    std::string system;
    std::size_t n = 15000;
    std::uint64_t seed = 0;
    std::optional<std::size_t> burn_in;
    std::optional<double> dt;
    std::optional<std::size_t> stride;
    std::optional<std::size_t> channel;
    std::vector<std::string> params;
    std::string initial;
    std::size_t detrend_period = 0;
    bool detrend = false;
    std::string out;
};

int cmd_generate(const GenerateArgs& a) {
    datagen::SystemSpec spec = datagen::system_spec(a.system);
    spec.length = a.n;
    spec.seed = a.seed;
    if (a.burn_in) spec.burn_in = *a.burn_in;
    if (a.dt) spec.dt = *a.dt;
    if (a.stride) spec.stride = *a.stride;
    if (a.channel) spec.channel = *a.channel;
    for (const std::string& kv : a.params) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--param expects name=value, got '" + kv + "'");
        const std::string name = kv.substr(0, eq);
        if (!spec.params.count(name)) throw std::invalid_argument("system " + a.system + " has no parameter " + name);
        spec.params[name] = parse_number_list(kv.substr(eq + 1)).at(0);
    }
    if (!a.initial.empty()) {
        auto init = parse_number_list(a.initial);
        if (init.size() != spec.initial.size())
            throw std::invalid_argument("--initial needs " + std::to_string(spec.initial.size()) + " values");
        spec.initial = std::move(init);
    }

    const std::vector<double> values = datagen::generate(spec);
    const fs::path out(a.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    csv::write_series(out, values);

    // the record of the transform the common pipeline applies to this series
    std::vector<double> transformed = values;
    preprocess::TransformRecord record;
    if (a.detrend) {
        auto d = preprocess::detrend(values, a.detrend_period);
        transformed = std::move(d.values);
        record = d.record;
    }
    const preprocess::DatasetSplit split = preprocess::split_70_15_15(transformed, true);
    record.mean = split.mean;
    record.scale = split.scale;

    json meta;
    meta["schema_version"] = kArtifactSchema;
    meta["system"] = spec.id;
    meta["kind"] = spec.kind == datagen::SystemKind::map ? "map" : spec.kind == datagen::SystemKind::delay ? "delay" : "flow";
    meta["params"] = spec.params;
    meta["initial"] = spec.initial;
    meta["dt"] = spec.dt;
    meta["stride"] = spec.stride;
    meta["burn_in"] = spec.burn_in;
    meta["channel"] = spec.channel;
    meta["length"] = spec.length;
    meta["seed"] = spec.seed;
    meta["split"] = {{"train_end", split.train_end}, {"validation_end", split.validation_end}};
    meta["transform"] = {{"detrend", a.detrend},     {"intercept", record.intercept}, {"slope", record.slope},
                         {"period", record.period},  {"seasonal", record.seasonal},   {"mean", record.mean},
                         {"scale", record.scale}};
    fs::path sidecar = out;
    sidecar.replace_extension(".json");
    write_text(sidecar, meta.dump(2) + "\n");
    std::cout << "wrote " << values.size() << " values of " << spec.id << " to " << out.string() << '\n';
    return kExitOk;
}

// ---- train -------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string model;
    std::string out;
    std::size_t lookback = 100;
    std::size_t bins = 300;
    std::string units = "64";
    std::string p_drop = "0.25";
    std::string l2 = "1e-7";
    std::string ar_order = "16";
    std::size_t epochs = 50;
    std::size_t batch = 256;
    std::size_t patience = 5;
    double learning_rate = 0.002;
    std::size_t decoder_length = 20;
    std::size_t stride = 1;
    std::uint64_t seed = 0;
    double noise = 1e-3;
    bool detrend = false;
    std::size_t period = 0;
    std::size_t gp_max_points = 1000;
    std::size_t gp_iterations = 100;
    std::size_t gp_restarts = 3;
    std::string tuned;
    std::string label;
};

struct CellResult {
    json params;
    bool diverged = false;
    std::string message;
    double validation_loss = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::vector<seq2seq::EpochRecord> log;
};

json prep_json(const TrainArgs& a) { return {{"detrend", a.detrend}, {"period", a.period}}; }

std::vector<double> noisy_train(const PreparedData& d, const TrainArgs& a) {
    if (a.noise <= 0.0) return d.split.train;
    return preprocess::add_regularizing_noise(d.split.train, a.noise, derive_seed(a.seed, Purpose::noise));
}

void write_training_outputs(const fs::path& dir, const TrainArgs& a, const std::vector<CellResult>& cells,
                            std::optional<std::size_t> winner) {
    json grid;
    grid["schema_version"] = kArtifactSchema;
    grid["model"] = a.model;
    json list = json::array();
    for (std::size_t c = 0; c < cells.size(); ++c) {
        json row;
        row["cell"] = c;
        row["params"] = cells[c].params;
        row["status"] = cells[c].diverged ? "diverged" : "ok";
        if (cells[c].diverged) {
            row["message"] = cells[c].message;
        } else {
            row["validation_loss"] = cells[c].validation_loss;
            row["best_epoch"] = cells[c].best_epoch;
        }
        list.push_back(row);
    }
    grid["cells"] = list;
    grid["winner"] = winner ? json(*winner) : json(nullptr);
    write_text(dir / "grid.json", grid.dump(2) + "\n");

    std::ofstream log = open_out(dir / "training_log.csv");
    log << "cell,epoch,train_loss,validation_loss\n";
    for (std::size_t c = 0; c < cells.size(); ++c)
        for (const auto& r : cells[c].log)
            log << c << ',' << r.epoch << ',' << csv::format(r.train_loss) << ',' << csv::format(r.validation_loss)
                << '\n';
}

std::size_t pick_winner(const fs::path& dir, const TrainArgs& a, const std::vector<CellResult>& cells) {
    std::optional<std::size_t> winner;
    for (std::size_t c = 0; c < cells.size(); ++c)
        if (!cells[c].diverged && (!winner || cells[c].validation_loss < cells[*winner].validation_loss)) winner = c;
    write_training_outputs(dir, a, cells, winner);
    if (!winner) {
        std::string msg = "every grid cell diverged";
        for (const auto& c : cells) msg += "\n  " + c.params.dump() + ": " + c.message;
        throw NumericalError(msg);
    }
    return *winner;
}

json base_model_json(const TrainArgs& a, const PreparedData& d) {
    json m;
    m["schema_version"] = kArtifactSchema;
    m["model"] = a.model;
    m["dataset"] = d.name;
    m["prep"] = prep_json(a);
    m["lookback"] = a.lookback;
    m["noise"] = a.noise;
    m["seed"] = a.seed;
    return m;
}

int train_seq2seq(const TrainArgs& a, const PreparedData& d, const fs::path& dir) {
    const bool ordinal_mode = a.model == "mordred";
    const auto units = as_list<std::size_t>(a.units, "--units");
    const auto drops = as_list<double>(a.p_drop, "--p-drop");
    const auto l2s = as_list<double>(a.l2, "--l2");
    for (double p : drops)
        if (p < 0.0 || p >= 1.0) throw std::invalid_argument("--p-drop values must lie in [0, 1)");

    std::optional<ordinal::BinPartition> partition;
    seq2seq::SeriesData train_data, val_data;
    const std::vector<double> val_series = concat(tail(d.split.train, a.lookback), d.split.validation);
    if (ordinal_mode) {
        partition = ordinal::fit_partition(d.split.train, a.bins);
        train_data = seq2seq::SeriesData::ordinal(ordinal::quantize(d.split.train, *partition));
        val_data = seq2seq::SeriesData::ordinal(ordinal::quantize(val_series, *partition));
    } else {
        train_data = seq2seq::SeriesData::regression(noisy_train(d, a));
        val_data = seq2seq::SeriesData::regression(val_series);
    }
    if (d.split.validation.size() < a.decoder_length)
        throw std::invalid_argument("validation split is shorter than --decoder-length");

    struct Cell {
        std::size_t units;
        double p_drop, l2;
    };
    std::vector<Cell> grid;
    for (auto u : units)
        for (double p : drops)
            for (double l : l2s) grid.push_back({u, p, l});

    std::vector<CellResult> results(grid.size());
    std::vector<std::optional<seq2seq::Seq2SeqModel>> models(grid.size());
    parallel_for(grid.size(), true, [&](std::size_t c) {
        const Cell& cell = grid[c];
        CellResult& r = results[c];
        r.params = {{"units", cell.units}, {"p_drop", cell.p_drop}, {"l2", cell.l2}};
        seq2seq::TrainingConfig cfg;
        cfg.lookback = a.lookback;
        cfg.decoder_length = a.decoder_length;
        cfg.units = cell.units;
        cfg.p_drop = cell.p_drop;
        cfg.l2 = cell.l2;
        cfg.max_epochs = a.epochs;
        cfg.batch_size = a.batch;
        cfg.patience = a.patience;
        cfg.optimizer.learning_rate = a.learning_rate;
        cfg.stride = a.stride;
        cfg.seed = a.seed;
        auto model = seq2seq::Seq2SeqModel::create(
            ordinal_mode ? seq2seq::Mode::ordinal : seq2seq::Mode::regression, cell.units, a.lookback, partition,
            cell.p_drop, cfg.handoff_dropout, a.seed);
        try {
            auto result = seq2seq::train(std::move(model), train_data, val_data, cfg);
            r.validation_loss = result.best_validation_loss;
            r.best_epoch = result.best_epoch;
            r.log = std::move(result.log);
            models[c] = std::move(result.model);
        } catch (const NumericalError& e) {
            r.diverged = true;
            r.message = e.what();
        }
    });
    const std::size_t w = pick_winner(dir, a, results);
    checkpoint::save(dir / "model.ckpt", *models[w]);

    json m = base_model_json(a, d);
    m["selected"] = results[w].params;
    m["decoder_length"] = a.decoder_length;
    m["checkpoint"] = "model.ckpt";
    m["validation_loss"] = results[w].validation_loss;
    write_text(dir / "model.json", m.dump(2) + "\n");
    std::cout << a.model << ": " << grid.size() << " cell(s), winner " << w << " " << results[w].params.dump()
              << " validation loss " << csv::format(results[w].validation_loss) << '\n';
    return kExitOk;
}

// mean squared one-step error of an AR model over the validation split
double ar_validation_mse(const ar::ArModel& model, const PreparedData& d) {
    const std::vector<double> ctx = d.context();
    const std::size_t p = model.order();
    double sse = 0.0;
    for (std::size_t t = d.split.train_end; t < ctx.size(); ++t) {
        double pred = 0.0;
        for (std::size_t i = 0; i < p && i < t; ++i) pred += model.coefficients[i] * ctx[t - 1 - i];
        sse += (ctx[t] - pred) * (ctx[t] - pred);
    }
    return sse / static_cast<double>(ctx.size() - d.split.train_end);
}

int train_ar(const TrainArgs& a, const PreparedData& d, const fs::path& dir) {
    const auto orders = as_list<std::size_t>(a.ar_order, "--ar-order");
    const std::vector<double> train = noisy_train(d, a);
    std::vector<CellResult> results(orders.size());
    std::vector<ar::ArModel> models(orders.size());
    parallel_for(orders.size(), true, [&](std::size_t c) {
        CellResult& r = results[c];
        r.params = {{"ar_order", orders[c]}};
        try {
            models[c] = ar::fit_ar(train, orders[c]);
            r.validation_loss = ar_validation_mse(models[c], d);
            if (!std::isfinite(r.validation_loss)) throw NumericalError("non-finite validation error");
            r.log.push_back({0, models[c].innovation_variance, r.validation_loss});
        } catch (const NumericalError& e) {
            r.diverged = true;
            r.message = e.what();
        }
    });
    const std::size_t w = pick_winner(dir, a, results);
    json m = base_model_json(a, d);
    m["selected"] = results[w].params;
    m["ar"] = {{"coefficients", models[w].coefficients},
               {"innovation_variance", models[w].innovation_variance},
               {"observation_variance", models[w].observation_variance}};
    m["validation_loss"] = results[w].validation_loss;
    write_text(dir / "model.json", m.dump(2) + "\n");
    std::cout << "ar: winner order " << orders[w] << " validation mse " << csv::format(results[w].validation_loss)
              << '\n';
    return kExitOk;
}

gp::GpModel condition_gp(const PreparedData& d, const TrainArgs& a, const gp::GpHyper& hyper) {
    auto [x, y] = gp::training_windows(noisy_train(d, a), a.lookback, a.gp_max_points);
    return gp::condition(std::move(x), std::move(y), hyper);
}

int train_gp(const TrainArgs& a, const PreparedData& d, const fs::path& dir) {
    auto [x, y] = gp::training_windows(noisy_train(d, a), a.lookback, a.gp_max_points);
    const gp::GpHyper init = gp::default_hyper(x, y);
    gp::FitOptions opt;
    opt.restarts = a.gp_restarts;
    opt.max_iterations = a.gp_iterations;
    opt.seed = a.seed;
    const gp::GpModel model = gp::fit_gp(std::move(x), std::move(y), init, opt);

    const std::vector<double> ctx = d.context();
    double sse = 0.0;
    for (std::size_t t = d.split.train_end; t < ctx.size(); ++t) {
        const auto [mean, var] = gp::gp_predict(model, std::span(ctx.data() + t - a.lookback, a.lookback));
        sse += (ctx[t] - mean) * (ctx[t] - mean);
    }
    CellResult r;
    r.validation_loss = sse / static_cast<double>(ctx.size() - d.split.train_end);
    r.params = json::object();
    r.log.push_back({0, -model.log_likelihood / static_cast<double>(model.targets.size()), r.validation_loss});
    pick_winner(dir, a, {r});

    json m = base_model_json(a, d);
    const Eigen::VectorXd lh = model.hyper.to_log();
    m["gp"] = {{"log_hyper", std::vector<double>(lh.data(), lh.data() + lh.size())},
               {"max_points", a.gp_max_points},
               {"log_likelihood", model.log_likelihood}};
    m["validation_loss"] = r.validation_loss;
    write_text(dir / "model.json", m.dump(2) + "\n");
    std::cout << a.model << ": log likelihood " << csv::format(model.log_likelihood) << ", validation mse "
              << csv::format(r.validation_loss) << '\n';
    return kExitOk;
}

void apply_tuned(TrainArgs& a, CLI::App& sub, const std::string& dataset) {
    if (a.tuned.empty()) return;
    const std::string label = a.label.empty() ? dataset : a.label;
    const auto row = tuned_row(a.tuned, label);
    if (!row) throw std::invalid_argument("no row '" + label + "' in " + a.tuned);
    for (const auto& [key, value] : row->items()) {
        std::string flag = "--" + key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        if (sub.get_option(flag)->count() > 0) continue;  // explicit flags win
        const std::string text = value.is_number_integer() ? std::to_string(value.get<long long>())
                                                           : csv::format(value.get<double>());
        if (key == "units") a.units = text;
        else if (key == "p_drop") a.p_drop = text;
        else if (key == "l2") a.l2 = text;
        else if (key == "ar_order") a.ar_order = text;
        else if (key == "bins") a.bins = static_cast<std::size_t>(value.get<double>());
    }
}

int cmd_train(TrainArgs a, CLI::App& sub) {
    const PreparedData d = prepare_dataset(a.data, {a.detrend, a.period});
    apply_tuned(a, sub, d.name);
    if (a.lookback + 1 >= d.split.train.size()) throw std::invalid_argument("--lookback exceeds the training split");
    const fs::path dir(a.out);
    fs::create_directories(dir);
    if (a.model == "mordred" || a.model == "seq2seq-reg") return train_seq2seq(a, d, dir);
    if (a.model == "ar") return train_ar(a, d, dir);
    return train_gp(a, d, dir);
}

// ---- forecast ----------------------------------------------------------

struct ForecastArgs {
    std::string model_dir;
    std::string data;
    std::size_t horizon = 1000;
    std::size_t samples = 100;
    std::size_t trajectories = 100;
    std::size_t components = 5;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_forecast(const ForecastArgs& a) {
    const fs::path mdir(a.model_dir);
    const json m = json::parse(std::ifstream(mdir / "model.json"), nullptr, false);
    if (m.is_discarded() || !m.contains("schema_version")) throw std::invalid_argument("no valid model.json in " + a.model_dir);
    if (m["schema_version"].get<int>() != kArtifactSchema) throw std::invalid_argument("unsupported model schema");
    const std::string kind = m["model"].get<std::string>();
    PrepOptions prep{m["prep"]["detrend"].get<bool>(), m["prep"]["period"].get<std::size_t>()};
    const PreparedData d = prepare_dataset(a.data, prep);
    if (d.name != m["dataset"].get<std::string>())
        std::cerr << "note: model was trained on " << m["dataset"].get<std::string>() << ", forecasting " << d.name
                  << '\n';
    const std::size_t lookback = m["lookback"].get<std::size_t>();
    const std::vector<double> ctx = d.context();
    if (a.horizon < 1) throw std::invalid_argument("--horizon must be positive");
    d.truth(a.horizon);  // checks the test split is long enough
    if (ctx.size() < lookback) throw std::invalid_argument("dataset is shorter than the model lookback");
    if (a.samples < 1 || a.trajectories < 1) throw std::invalid_argument("--samples and --trajectories must be positive");

    ForecastArtifact art;
    art.model = kind;
    art.dataset = d.name;
    art.seed = a.seed;
    art.origin = d.split.validation_end;
    art.prep = prep;
    const std::uint64_t traj_seed = derive_seed(a.seed, Purpose::trajectories);

    if (kind == "mordred" || kind == "seq2seq-reg") {
        const auto model = checkpoint::load(mdir / m.value("checkpoint", "model.ckpt"));
        if (model.lookback != lookback) throw std::invalid_argument("checkpoint lookback differs from model.json");
        if (kind == "mordred") {
            art.distribution = seq2seq::mc_dropout_forecast(model, ctx, a.horizon, a.samples, a.seed);
            art.trajectories = sample_trajectories(art.distribution, a.trajectories, traj_seed);
        } else {
            auto r = seq2seq::forecast_regression(model, ctx, a.horizon, a.samples, a.seed);
            art.distribution = std::move(r.distribution);
            art.trajectories = std::move(r.rollouts);
        }
    } else if (kind == "ar") {
        ar::ArModel model;
        model.coefficients = m["ar"]["coefficients"].get<std::vector<double>>();
        model.innovation_variance = m["ar"]["innovation_variance"].get<double>();
        model.observation_variance = m["ar"]["observation_variance"].get<double>();
        art.distribution = ar::kalman_forecast(model, ctx, a.horizon);
        art.trajectories = sample_trajectories(art.distribution, a.trajectories, traj_seed);
    } else if (kind == "gp-mc" || kind == "gp-gmm") {
        TrainArgs ta;
        ta.lookback = lookback;
        ta.noise = m["noise"].get<double>();
        ta.seed = m["seed"].get<std::uint64_t>();
        ta.gp_max_points = m["gp"]["max_points"].get<std::size_t>();
        const auto lh = m["gp"]["log_hyper"].get<std::vector<double>>();
        const gp::GpHyper hyper = gp::GpHyper::from_log(Eigen::Map<const Eigen::VectorXd>(lh.data(), static_cast<Eigen::Index>(lh.size())));
        const gp::GpModel model = condition_gp(d, ta, hyper);
        art.trajectories = gp::gp_mc_trajectories(model, ctx, a.horizon, a.trajectories, a.seed);
        if (kind == "gp-mc") {
            if (a.trajectories < 2) throw std::invalid_argument("gp-mc needs at least two trajectories");
            art.distribution = gaussian_with_floor(correct_moments(art.trajectories));
        } else {
            art.distribution = ForecastDistribution::gmm(gmm::fit_stepwise_gmm(art.trajectories, a.components).steps);
        }
    } else {
        throw std::invalid_argument("unknown model kind '" + kind + "' in model.json");
    }
    write_forecast(a.out, art);
    std::cout << kind << ": forecast " << a.horizon << " steps of " << d.name << " to " << a.out << '\n';
    return kExitOk;
}

// ---- evaluate ----------------------------------------------------------

const fs::path& find_data(const std::vector<std::string>& data, const std::string& dataset,
                          std::vector<fs::path>& storage) {
    storage.clear();
    for (const auto& p : data)
        if (fs::path(p).stem().string() == dataset) storage.emplace_back(p);
    if (storage.empty()) throw std::invalid_argument("no --data file for dataset '" + dataset + "'");
    if (storage.size() > 1) throw std::invalid_argument("several --data files named '" + dataset + "'");
    return storage.front();
}

struct Loaded {
    ForecastArtifact artifact;
    std::vector<double> truth;
};

std::vector<Loaded> load_all(const std::vector<std::string>& forecasts, const std::vector<std::string>& data) {
    std::vector<Loaded> out(forecasts.size());
    parallel_for(forecasts.size(), true, [&](std::size_t i) {
        out[i].artifact = read_forecast(forecasts[i]);
        const auto& a = out[i].artifact;
        std::vector<fs::path> storage;
        const PreparedData d = prepare_dataset(find_data(data, a.dataset, storage), a.prep);
        if (a.origin != d.split.validation_end)
            throw std::invalid_argument(forecasts[i] + ": forecast origin " + std::to_string(a.origin) +
                                        " does not align with the test split of " + d.name + " at " +
                                        std::to_string(d.split.validation_end));
        out[i].truth = d.truth(a.distribution.horizon());
    });
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& l : out)
        if (!seen.insert({l.artifact.model, l.artifact.dataset}).second)
            throw std::invalid_argument("two forecasts for model " + l.artifact.model + " on " + l.artifact.dataset);
    return out;
}

int cmd_evaluate(const std::vector<std::string>& forecasts, const std::vector<std::string>& data, const std::string& out) {
    const std::vector<Loaded> loaded = load_all(forecasts, data);
    std::vector<metrics::MetricsReport> reports(loaded.size());
    parallel_for(loaded.size(), true, [&](std::size_t i) {
        const auto& a = loaded[i].artifact;
        reports[i] = metrics::evaluate(a.model, a.dataset, loaded[i].truth, a.distribution);
    });
    const metrics::RankTables ranks = metrics::rank_tables(reports);

    const fs::path dir(out);
    fs::create_directories(dir);
    {
        std::ofstream csv_out = open_out(dir / "metrics.csv");
        csv_out << "model,dataset,metric,value\n";
        for (const auto& r : reports)
            for (const auto& name : metrics::MetricsReport::metric_names())
                csv_out << r.model << ',' << r.dataset << ',' << name << ',' << csv::format(r.metric(name)) << '\n';
    }
    json j;
    j["schema_version"] = kArtifactSchema;
    j["metrics"] = ranks.metrics;
    j["datasets"] = ranks.datasets;
    j["models"] = ranks.models;
    j["ranked_models"] = ranks.ranked_models;
    auto table = [&](const auto& t) {
        json o = json::object();
        for (const auto& metric : ranks.metrics) {
            json row = json::object();
            for (const auto& [model, v] : t.at(metric)) row[model] = v;
            o[metric] = row;
        }
        return o;
    };
    j["best_count"] = table(ranks.best_count);
    j["mean_rank"] = table(ranks.mean_rank);
    j["mean_worst_rank"] = table(ranks.mean_worst_rank);
    write_text(dir / "ranks.json", j.dump(2) + "\n");
    std::cout << "evaluated " << reports.size() << " forecast(s) into " << out << '\n';
    return kExitOk;
}

// ---- events ------------------------------------------------------------

struct EventArgs {
    std::vector<std::string> forecasts;
    std::vector<std::string> data;
    double threshold = 0.0;
    std::size_t min_distance = 5;
    std::optional<double> bandwidth;
    std::string imf = "auto";
    std::string out;
};

events::ImfSelector selector_from(const std::string& imf) {
    if (imf == "auto") return events::ImfSelector::dominant_period();
    const auto v = parse_number_list(imf);
    if (v.size() != 1 || v[0] < 0 || v[0] != std::floor(v[0]))
        throw std::invalid_argument("--imf takes 'auto' or a non-negative index");
    return events::ImfSelector::explicit_index(static_cast<std::size_t>(v[0]));
}

struct TimingResult {
    events::TrueTimings truth;
    std::vector<double> density;
    double nll = 0.0;
    double uniform = 0.0;
};

TimingResult timing_analysis(const ForecastArtifact& a, const std::vector<double>& truth, const EventArgs& e) {
    const events::PeakParams params{e.threshold, e.min_distance};
    TimingResult r;
    r.truth = events::true_timings(truth, selector_from(e.imf), params);
    if (r.truth.peaks.empty()) throw std::runtime_error("no events in the ground truth of " + a.dataset);
    const auto kde = events::kde_fit(events::trajectory_timings(a.trajectories, params), e.bandwidth);
    const std::size_t h = a.distribution.horizon();
    r.density.resize(h);
    for (std::size_t t = 0; t < h; ++t) r.density[t] = kde(static_cast<double>(t));
    r.nll = events::timing_nll(r.truth.peaks, kde);
    r.uniform = events::uniform_timing_nll(r.truth.peaks.size(), h);
    return r;
}

int cmd_events(const EventArgs& e) {
    const std::vector<Loaded> loaded = load_all(e.forecasts, e.data);
    std::vector<TimingResult> results(loaded.size());
    parallel_for(loaded.size(), true,
                 [&](std::size_t i) { results[i] = timing_analysis(loaded[i].artifact, loaded[i].truth, e); });

    const fs::path dir(e.out);
    fs::create_directories(dir);
    std::vector<std::string> models, datasets;
    std::map<std::string, std::map<std::string, double>> nll;  // dataset -> model -> value
    std::map<std::string, double> uniform;
    std::map<std::string, const TimingResult*> truth_of;
    auto add_unique = [](std::vector<std::string>& v, const std::string& s) {
        if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
    };
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        const auto& a = loaded[i].artifact;
        const auto& r = results[i];
        add_unique(models, a.model);
        add_unique(datasets, a.dataset);
        nll[a.dataset][a.model] = r.nll;
        uniform[a.dataset] = r.uniform;
        truth_of[a.dataset] = &r;
        std::ofstream dens = open_out(dir / ("timing_density_" + a.model + "_" + a.dataset + ".csv"));
        dens << "t,density\n";
        for (std::size_t t = 0; t < r.density.size(); ++t) dens << t << ',' << csv::format(r.density[t]) << '\n';
    }
    // the two GP variants compete as one column, as in the rank tables
    const bool both_gp = std::count(models.begin(), models.end(), metrics::kGpMonteCarlo) &&
                         std::count(models.begin(), models.end(), metrics::kGpMixture);
    std::vector<std::string> columns;
    for (const auto& m : models) {
        if (both_gp && (m == metrics::kGpMonteCarlo || m == metrics::kGpMixture)) {
            add_unique(columns, metrics::kGpMerged);
            for (auto& [ds, row] : nll) {
                double best = std::numeric_limits<double>::infinity();
                for (const auto& g : {metrics::kGpMonteCarlo, metrics::kGpMixture})
                    if (row.count(g)) best = std::min(best, row[g]);
                if (std::isfinite(best)) row[metrics::kGpMerged] = best;
            }
        } else {
            columns.push_back(m);
        }
    }

    std::map<std::string, int> best_count;
    std::ofstream table = open_out(dir / "timing_nll.csv");
    table << "dataset";
    for (const auto& c : columns) table << ',' << c;
    table << ",uniform,best\n";
    for (const auto& ds : datasets) {
        const auto& row = nll[ds];
        std::string best;
        for (const auto& c : columns)
            if (row.count(c) && (best.empty() || row.at(c) < row.at(best))) best = c;
        if (!best.empty()) ++best_count[best];
        table << ds;
        for (const auto& c : columns) table << ',' << (row.count(c) ? csv::format(row.at(c)) : "");
        table << ',' << csv::format(uniform[ds]) << ',' << best << '\n';
    }
    table << "# BEST";
    for (const auto& c : columns) table << ',' << best_count[c];
    table << ",,\n";

    std::ofstream tt = open_out(dir / "true_timings.csv");
    tt << "dataset,imf,timings\n";
    for (const auto& ds : datasets) {
        const auto& t = truth_of[ds]->truth;
        tt << ds << ',' << t.imf << ',';
        for (std::size_t i = 0; i < t.peaks.size(); ++i) tt << (i ? ";" : "") << t.peaks[i];
        tt << '\n';
    }
    std::cout << "timing NLL for " << loaded.size() << " forecast(s) written to " << e.out << '\n';
    return kExitOk;
}

// ---- plot --------------------------------------------------------------

int cmd_plot(const std::string& forecast, const std::string& data, const std::string& out, bool with_events,
             const EventArgs& e) {
    const ForecastArtifact a = read_forecast(forecast);
    std::vector<double> truth;
    if (!data.empty()) {
        const PreparedData d = prepare_dataset(data, a.prep);
        if (a.origin != d.split.validation_end) throw std::invalid_argument("forecast origin does not match " + data);
        truth = d.truth(a.distribution.horizon());
    }
    std::optional<TimingPanel> panel;
    if (with_events) {
        if (truth.empty()) throw std::invalid_argument("--events needs --data");
        const TimingResult r = timing_analysis(a, truth, e);
        panel = TimingPanel{r.density, r.truth.peaks};
    }
    const fs::path path(out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_text(path, fan_chart_svg(a.distribution, truth, a.model + " on " + a.dataset, panel));
    std::cout << "wrote " << out << '\n';
    return kExitOk;
}

void event_options(CLI::App* sub, EventArgs& e) {
    sub->add_option("--threshold", e.threshold, "minimum peak height (standardized units)");
    sub->add_option("--min-distance", e.min_distance, "minimum spacing between peaks")->check(CLI::PositiveNumber);
    sub->add_option("--bandwidth", e.bandwidth, "KDE bandwidth (default: Silverman's rule)")->check(CLI::PositiveNumber);
    sub->add_option("--imf", e.imf, "IMF carrying the events: 'auto' or an index");
}

}  // namespace

int run(const std::vector<std::string>& raw_args) {
    CLI::App app{"Probabilistic forecasting toolkit: ordinal seq2seq with MC dropout, baselines, metrics, events"};
    app.name("mordred");
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "OpenMP threads (results do not depend on it)");

    GenerateArgs g;
    auto* gen = app.add_subcommand("generate", "simulate a built-in system to CSV plus a JSON sidecar");
    gen->add_option("--system", g.system, "system id")->required();
    gen->add_option("--n", g.n, "samples to keep")->check(CLI::PositiveNumber);
    gen->add_option("--seed", g.seed, "seed for stochastic systems");
    gen->add_option("--burn-in", g.burn_in, "samples discarded first");
    gen->add_option("--dt", g.dt, "RK4 step for flows")->check(CLI::PositiveNumber);
    gen->add_option("--stride", g.stride, "RK4 steps per sample")->check(CLI::PositiveNumber);
    gen->add_option("--channel", g.channel, "state component to record");
    gen->add_option("--param", g.params, "override a parameter, name=value")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    gen->add_option("--initial", g.initial, "initial state, comma separated");
    gen->add_flag("--detrend", g.detrend, "record a detrending transform in the sidecar");
    gen->add_option("--period", g.detrend_period, "seasonal period for --detrend");
    gen->add_option("--out", g.out, "output CSV")->required();

    TrainArgs t;
    auto* tr = app.add_subcommand("train", "fit a model, grid-searching comma-separated hyperparameter lists");
    tr->add_option("--data", t.data, "dataset CSV")->required();
    tr->add_option("--model", t.model, "model id")->required()->check(CLI::IsMember(kModels));
    tr->add_option("--out", t.out, "model directory")->required();
    tr->add_option("--lookback", t.lookback, "lookback window P")->check(CLI::PositiveNumber);
    tr->add_option("--bins", t.bins, "ordinal bins M")->check(CLI::Range(2, 100000));
    tr->add_option("--units", t.units, "hidden units grid");
    tr->add_option("--p-drop", t.p_drop, "dropout rate grid");
    tr->add_option("--l2", t.l2, "l2 penalty grid");
    tr->add_option("--ar-order", t.ar_order, "AR order grid");
    tr->add_option("--epochs", t.epochs, "maximum epochs")->check(CLI::PositiveNumber);
    tr->add_option("--batch", t.batch, "minibatch size")->check(CLI::PositiveNumber);
    tr->add_option("--patience", t.patience, "early-stopping patience")->check(CLI::PositiveNumber);
    tr->add_option("--learning-rate", t.learning_rate, "Nadam step size")->check(CLI::PositiveNumber);
    tr->add_option("--decoder-length", t.decoder_length, "teacher-forced decoder steps")->check(CLI::PositiveNumber);
    tr->add_option("--stride", t.stride, "spacing of training windows")->check(CLI::PositiveNumber);
    tr->add_option("--seed", t.seed, "seed");
    tr->add_option("--noise", t.noise, "regularizing noise std on training data")->check(CLI::NonNegativeNumber);
    tr->add_flag("--detrend", t.detrend, "remove linear trend (and seasonal profile with --period)");
    tr->add_option("--period", t.period, "seasonal period for --detrend");
    tr->add_option("--gp-max-points", t.gp_max_points, "GP training windows kept")->check(CLI::PositiveNumber);
    tr->add_option("--gp-iterations", t.gp_iterations, "GP optimizer iterations")->check(CLI::PositiveNumber);
    tr->add_option("--gp-restarts", t.gp_restarts, "GP optimizer restarts");
    tr->add_option("--tuned", t.tuned, "tuned hyperparameter table (JSON)");
    tr->add_option("--label", t.label, "row of the tuned table (default: dataset name)");

    ForecastArgs f;
    auto* fc = app.add_subcommand("forecast", "write predictive densities, quantiles and trajectories");
    fc->add_option("--model-dir", f.model_dir, "directory written by train")->required();
    fc->add_option("--data", f.data, "dataset CSV")->required();
    fc->add_option("--horizon", f.horizon, "forecast horizon P_h")->check(CLI::PositiveNumber);
    fc->add_option("--samples", f.samples, "MC-dropout samples N_s")->check(CLI::PositiveNumber);
    fc->add_option("--trajectories", f.trajectories, "trajectories kept or sampled")->check(CLI::PositiveNumber);
    fc->add_option("--components", f.components, "maximum GMM components")->check(CLI::PositiveNumber);
    fc->add_option("--seed", f.seed, "seed");
    fc->add_option("--out", f.out, "forecast directory")->required();

    std::vector<std::string> ev_forecasts, ev_data;
    std::string ev_out;
    auto* evl = app.add_subcommand("evaluate", "metrics CSV and rank tables for forecast directories");
    evl->add_option("--forecast", ev_forecasts, "forecast directories")
        ->required()
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    evl->add_option("--data", ev_data, "dataset CSVs, matched by file name")
        ->required()
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    evl->add_option("--out", ev_out, "output directory")->required();

    EventArgs e;
    auto* evt = app.add_subcommand("events", "event-timing densities and timing NLL table");
    evt->add_option("--forecast", e.forecasts, "forecast directories")
        ->required()
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    evt->add_option("--data", e.data, "dataset CSVs, matched by file name")
        ->required()
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    evt->add_option("--out", e.out, "output directory")->required();
    event_options(evt, e);

    std::string pl_forecast, pl_data, pl_out;
    bool pl_events = false;
    EventArgs pe;
    auto* pl = app.add_subcommand("plot", "SVG fan chart of a forecast");
    pl->add_option("--forecast", pl_forecast, "forecast directory")->required();
    pl->add_option("--data", pl_data, "dataset CSV for the truth overlay");
    pl->add_option("--out", pl_out, "SVG file")->required();
    pl->add_flag("--events", pl_events, "add the event-timing density panel");
    event_options(pl, pe);

    try {
        std::vector<std::string> args = expand_config(raw_args);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? kExitOk : kExitUsage;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kExitUsage;
    }

    if (threads > 0) omp_set_num_threads(threads);
    try {
        if (*gen) return cmd_generate(g);
        if (*tr) return cmd_train(t, *tr);
        if (*fc) return cmd_forecast(f);
        if (*evl) return cmd_evaluate(ev_forecasts, ev_data, ev_out);
        if (*evt) return cmd_events(e);
        if (*pl) return cmd_plot(pl_forecast, pl_data, pl_out, pl_events, pe);
    } catch (const NumericalError& err) {
        std::cerr << "numerical failure: " << err.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

}  // namespace mordred::cli
