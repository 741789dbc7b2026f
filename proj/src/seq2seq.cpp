#include "mordred/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "mordred/parallel.hpp"

namespace mordred::seq2seq {

namespace {

std::size_t site(MaskSite s) { return static_cast<std::size_t>(s); }

Matrix input_matrix(const SeriesData& data, std::span<const std::size_t> positions) {
    const auto batch = static_cast<Eigen::Index>(positions.size());
    if (data.mode == Mode::ordinal) {
        Matrix x = Matrix::Zero(static_cast<Eigen::Index>(data.bins), batch);
        for (Eigen::Index j = 0; j < batch; ++j)
            x(static_cast<Eigen::Index>(data.indices[positions[static_cast<std::size_t>(j)]]), j) = 1.0;
        return x;
    }
    Matrix x(1, batch);
    for (Eigen::Index j = 0; j < batch; ++j) x(0, j) = data.values[positions[static_cast<std::size_t>(j)]];
    return x;
}

struct BatchResult {
    double data_loss = 0.0;  // mean per-step loss, no l2
    Seq2SeqModel grads;
};

// Teacher-forced forward pass over a batch of windows; with want_grad the
// full BPTT gradient of the mean per-step loss is returned as well.
BatchResult run_batch(const Seq2SeqModel& model, const SeriesData& data, const WindowSet& windows,
                      std::span<const std::size_t> starts, const nnet::DropoutSpec& masks, bool want_grad) {
    require(data.mode == model.mode, "series encoding does not match model mode");
    require(!starts.empty(), "empty batch");
    const std::size_t batch = starts.size();
    const std::size_t lookback = windows.lookback;
    const std::size_t dec_len = windows.decoder_length;
    const auto n = static_cast<Eigen::Index>(model.units);
    const bool use_masks = !masks.masks.empty();
    require(!use_masks || masks.masks.size() == kMaskSites, "dropout spec must hold one mask per site");
    static const Matrix kNoMask;
    auto mask = [&](MaskSite s) -> const Matrix& { return use_masks ? masks.masks[site(s)] : kNoMask; };

    std::vector<std::size_t> pos(batch);
    auto positions = [&](std::size_t offset) -> std::span<const std::size_t> {
        for (std::size_t j = 0; j < batch; ++j) pos[j] = starts[j] + offset;
        return pos;
    };

    nnet::LstmTape fwd_tape{mask(MaskSite::encoder_forward), {}};
    nnet::LstmTape bwd_tape{mask(MaskSite::encoder_backward), {}};
    nnet::LstmTape dec_tape{mask(MaskSite::decoder), {}};
    if (want_grad) {
        fwd_tape.steps.resize(lookback);
        bwd_tape.steps.resize(lookback);
        dec_tape.steps.resize(dec_len);
    }

    const auto b = static_cast<Eigen::Index>(batch);
    nnet::LstmBatchState fwd = nnet::LstmBatchState::zeros(n, b);
    nnet::LstmBatchState bwd = nnet::LstmBatchState::zeros(n, b);
    for (std::size_t t = 0; t < lookback; ++t) {
        fwd = nnet::lstm_step_batch(input_matrix(data, positions(t)), fwd, model.encoder_forward, fwd_tape.mask,
                                    want_grad ? &fwd_tape.steps[t] : nullptr);
        bwd = nnet::lstm_step_batch(input_matrix(data, positions(lookback - 1 - t)), bwd, model.encoder_backward,
                                    bwd_tape.mask, want_grad ? &bwd_tape.steps[t] : nullptr);
    }
    nnet::LstmBatchState state{0.5 * (fwd.h + bwd.h), 0.5 * (fwd.c + bwd.c)};
    const bool handoff = model.handoff_dropout && use_masks;
    if (handoff) state.h.array() *= mask(MaskSite::handoff).array();

    const Matrix& out_mask = mask(MaskSite::output);
    const double scale = 1.0 / static_cast<double>(batch * dec_len);
    BatchResult result;
    std::vector<Matrix> dh_out;
    if (want_grad) {
        result.grads = model;
        Seq2SeqModel::visit_tensors(result.grads, [](const char*, auto& t) { t.setZero(); });
        dh_out.resize(dec_len);
    }

    double loss = 0.0;
    for (std::size_t t = 0; t < dec_len; ++t) {
        state = nnet::lstm_step_batch(input_matrix(data, positions(lookback - 1 + t)), state, model.decoder,
                                      dec_tape.mask, want_grad ? &dec_tape.steps[t] : nullptr);
        Matrix features = state.h;
        if (out_mask.size() != 0) features.array() *= out_mask.array();
        Matrix logits = model.output.weights * features;
        logits.colwise() += model.output.bias;

        positions(lookback + t);
        Matrix dlogits;
        if (model.mode == Mode::ordinal) {
            Matrix probs = nnet::softmax_columns(logits);
            for (std::size_t j = 0; j < batch; ++j) {
                const auto target = static_cast<Eigen::Index>(data.indices[pos[j]]);
                const auto col = static_cast<Eigen::Index>(j);
                loss -= std::log(std::max(probs(target, col), ordinal::kProbFloor));
                if (want_grad) probs(target, col) -= 1.0;
            }
            dlogits = std::move(probs);
        } else {
            dlogits.resize(1, b);
            for (std::size_t j = 0; j < batch; ++j) {
                const double diff = logits(0, static_cast<Eigen::Index>(j)) - data.values[pos[j]];
                loss += diff * diff;
                dlogits(0, static_cast<Eigen::Index>(j)) = 2.0 * diff;
            }
        }
        if (want_grad) {
            dlogits *= scale;
            result.grads.output.weights.noalias() += dlogits * features.transpose();
            result.grads.output.bias += dlogits.rowwise().sum();
            dh_out[t] = model.output.weights.transpose() * dlogits;
            if (out_mask.size() != 0) dh_out[t].array() *= out_mask.array();
        }
    }
    result.data_loss = loss * scale;
    if (!want_grad) return result;

    nnet::LstmBatchState d0 = nnet::lstm_backward(model.decoder, dec_tape, dh_out,
                                                  nnet::LstmBatchState::zeros(n, b), result.grads.decoder);
    if (handoff) d0.h.array() *= mask(MaskSite::handoff).array();
    const nnet::LstmBatchState d_enc{0.5 * d0.h, 0.5 * d0.c};
    nnet::lstm_backward(model.encoder_forward, fwd_tape, {}, d_enc, result.grads.encoder_forward);
    nnet::lstm_backward(model.encoder_backward, bwd_tape, {}, d_enc, result.grads.encoder_backward);
    return result;
}

Matrix encode_input(const Seq2SeqModel& model, double x) {
    if (model.mode == Mode::ordinal) {
        Matrix m = Matrix::Zero(model.input_dim(), 1);
        m(static_cast<Eigen::Index>(ordinal::encode(x, *model.partition)), 0) = 1.0;
        return m;
    }
    Matrix m(1, 1);
    m(0, 0) = x;
    return m;
}

// Encodes the seed window and returns the decoder's initial state.
nnet::LstmBatchState encode_seed(const Seq2SeqModel& model, std::span<const double> window,
                                 const nnet::DropoutSpec& masks) {
    const auto n = static_cast<Eigen::Index>(model.units);
    const bool use_masks = !masks.masks.empty();
    static const Matrix kNoMask;
    auto mask = [&](MaskSite s) -> const Matrix& { return use_masks ? masks.masks[site(s)] : kNoMask; };
    nnet::LstmBatchState fwd = nnet::LstmBatchState::zeros(n, 1);
    nnet::LstmBatchState bwd = nnet::LstmBatchState::zeros(n, 1);
    for (std::size_t t = 0; t < window.size(); ++t) {
        fwd = nnet::lstm_step_batch(encode_input(model, window[t]), fwd, model.encoder_forward,
                                    mask(MaskSite::encoder_forward), nullptr);
        bwd = nnet::lstm_step_batch(encode_input(model, window[window.size() - 1 - t]), bwd, model.encoder_backward,
                                    mask(MaskSite::encoder_backward), nullptr);
    }
    nnet::LstmBatchState state{0.5 * (fwd.h + bwd.h), 0.5 * (fwd.c + bwd.c)};
    if (model.handoff_dropout && use_masks) state.h.array() *= mask(MaskSite::handoff).array();
    return state;
}

std::span<const double> last_window(const Seq2SeqModel& model, std::span<const double> seed_window) {
    require(seed_window.size() >= model.lookback, "seed window shorter than the model lookback");
    for (double x : seed_window) require(std::isfinite(x), "seed window contains non-finite values");
    return seed_window.subspan(seed_window.size() - model.lookback);
}

void check_masks(const nnet::DropoutSpec& masks) {
    require(masks.masks.empty() || masks.masks.size() == kMaskSites, "dropout spec must hold one mask per site");
    for (const auto& m : masks.masks) require(m.size() == 0 || m.cols() == 1, "rollout masks must have one column");
}

}  // namespace

const char* to_string(Mode mode) { return mode == Mode::ordinal ? "ordinal" : "regression"; }

Mode mode_from_string(const std::string& name) {
    if (name == "ordinal") return Mode::ordinal;
    if (name == "regression") return Mode::regression;
    throw std::invalid_argument("unknown seq2seq mode: " + name);
}

void TrainingConfig::validate() const {
    require(lookback >= 1, "lookback must be at least 1");
    require(decoder_length >= 1, "decoder length must be at least 1");
    require(units >= 1, "units must be at least 1");
    require(batch_size >= 1, "batch size must be at least 1");
    require(stride >= 1, "stride must be at least 1");
    require(p_drop >= 0.0 && p_drop < 1.0, "dropout probability must lie in [0, 1)");
    require(l2 >= 0.0, "l2 coefficient must be nonnegative");
    require(max_epochs >= 1, "max_epochs must be at least 1");
    require(patience >= 1, "patience must be at least 1");
}

Seq2SeqModel Seq2SeqModel::create(Mode mode, std::size_t units, std::size_t lookback,
                                  std::optional<ordinal::BinPartition> partition, double p_drop,
                                  bool handoff_dropout, std::uint64_t seed) {
    require(units >= 1 && lookback >= 1, "model needs positive units and lookback");
    require(p_drop >= 0.0 && p_drop < 1.0, "dropout probability must lie in [0, 1)");
    require(mode == Mode::regression || partition.has_value(), "ordinal model needs a bin partition");
    Seq2SeqModel m;
    m.mode = mode;
    m.units = units;
    m.lookback = lookback;
    m.p_drop = p_drop;
    m.handoff_dropout = handoff_dropout;
    m.seed = seed;
    if (mode == Mode::ordinal) m.partition = partition;
    Rng rng = stream_rng(seed, 0);
    const auto n = static_cast<Eigen::Index>(units);
    m.encoder_forward = nnet::LstmParams::glorot(m.input_dim(), n, rng);
    m.encoder_backward = nnet::LstmParams::glorot(m.input_dim(), n, rng);
    m.decoder = nnet::LstmParams::glorot(m.input_dim(), n, rng);
    m.output = nnet::DenseParams::glorot(n, m.output_dim(), rng);
    return m;
}

Eigen::Index Seq2SeqModel::input_dim() const {
    return mode == Mode::ordinal ? static_cast<Eigen::Index>(partition->bins()) : 1;
}

Eigen::Index Seq2SeqModel::output_dim() const { return input_dim(); }

std::vector<Seq2SeqModel::TensorView> Seq2SeqModel::tensors() {
    std::vector<TensorView> out;
    visit_tensors(*this, [&](const char* name, auto& t) { out.push_back({name, t.data(), t.rows(), t.cols()}); });
    return out;
}

std::size_t Seq2SeqModel::parameter_count() const {
    std::size_t total = 0;
    visit_tensors(*this, [&](const char*, const auto& t) { total += static_cast<std::size_t>(t.size()); });
    return total;
}

Vector Seq2SeqModel::flatten() const {
    Vector flat(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index offset = 0;
    visit_tensors(*this, [&](const char*, const auto& t) {
        flat.segment(offset, t.size()) = t.reshaped();
        offset += t.size();
    });
    return flat;
}

void Seq2SeqModel::unflatten(const Vector& flat) {
    require(flat.size() == static_cast<Eigen::Index>(parameter_count()), "unflatten: parameter count mismatch");
    Eigen::Index offset = 0;
    visit_tensors(*this, [&](const char*, auto& t) {
        t.reshaped() = flat.segment(offset, t.size());
        offset += t.size();
    });
}

nnet::DropoutSpec Seq2SeqModel::sample_masks(Eigen::Index batch, Rng& rng) const {
    const auto n = static_cast<Eigen::Index>(units);
    const Eigen::Index concat = input_dim() + n;
    const std::pair<Eigen::Index, Eigen::Index> shapes[kMaskSites] = {
        {concat, batch}, {concat, batch}, {concat, batch}, {n, batch}, {n, batch}};
    return nnet::sample_dropout_masks(p_drop, shapes, rng);
}

SeriesData SeriesData::ordinal(const ordinal::OrdinalSequence& seq) {
    SeriesData d;
    d.mode = Mode::ordinal;
    d.indices = seq.indices;
    d.bins = seq.partition.bins();
    return d;
}

SeriesData SeriesData::regression(std::vector<double> values) {
    SeriesData d;
    d.mode = Mode::regression;
    d.values = std::move(values);
    return d;
}

WindowSet make_windows(std::size_t series_length, std::size_t lookback, std::size_t stride,
                       std::size_t decoder_length) {
    require(lookback >= 1 && stride >= 1 && decoder_length >= 1, "window parameters must be positive");
    require(series_length >= lookback + decoder_length, "series too short for the requested windows");
    WindowSet w{lookback, decoder_length, {}};
    for (std::size_t s = 0; s + lookback + decoder_length <= series_length; s += stride) w.starts.push_back(s);
    return w;
}

LossAndGradient loss_and_gradient(const Seq2SeqModel& model, const SeriesData& data, const WindowSet& windows,
                                  std::span<const std::size_t> starts, const nnet::DropoutSpec& masks, double l2) {
    BatchResult r = run_batch(model, data, windows, starts, masks, true);
    LossAndGradient out;
    Vector theta = model.flatten();
    out.gradient = r.grads.flatten() + 2.0 * l2 * theta;
    out.data_loss = r.data_loss;
    out.loss = r.data_loss + l2 * theta.squaredNorm();
    return out;
}

double evaluate_loss(const Seq2SeqModel& model, const SeriesData& data, const WindowSet& windows,
                     std::size_t batch_size) {
    require(windows.size() > 0, "evaluate_loss: no windows");
    const nnet::DropoutSpec none;
    double total = 0.0;
    for (std::size_t begin = 0; begin < windows.size(); begin += batch_size) {
        const std::size_t end = std::min(windows.size(), begin + batch_size);
        std::span<const std::size_t> starts(windows.starts.data() + begin, end - begin);
        total += run_batch(model, data, windows, starts, none, false).data_loss * static_cast<double>(end - begin);
    }
    return total / static_cast<double>(windows.size());
}

TrainingResult train(Seq2SeqModel model, const SeriesData& train_data, const SeriesData& validation_data,
                     const TrainingConfig& config) {
    config.validate();
    require(model.lookback == config.lookback, "model lookback differs from training config");
    const WindowSet train_windows =
        make_windows(train_data.size(), config.lookback, config.stride, config.decoder_length);
    const WindowSet val_windows = make_windows(validation_data.size(), config.lookback, 1, config.decoder_length);

    Rng rng = stream_rng(config.seed, 1);
    nnet::OptimizerState opt{config.optimizer, 0, 1.0, {}, {}};
    std::vector<std::size_t> order = train_windows.starts;

    TrainingResult result{model, {}, 0, std::numeric_limits<double>::infinity()};
    Vector best = model.flatten();
    std::size_t stale = 0;
    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t end = std::min(order.size(), begin + config.batch_size);
            std::span<const std::size_t> starts(order.data() + begin, end - begin);
            const nnet::DropoutSpec masks = model.sample_masks(static_cast<Eigen::Index>(starts.size()), rng);
            LossAndGradient lg = loss_and_gradient(model, train_data, train_windows, starts, masks, config.l2);
            if (!std::isfinite(lg.loss) || !lg.gradient.allFinite()) {
                std::ostringstream msg;
                msg << "training diverged at epoch " << epoch << ", batch starting at " << begin
                    << ": loss = " << lg.loss;
                throw NumericalError(msg.str());
            }
            const double norm = lg.gradient.norm();
            if (norm > config.clip_norm) lg.gradient *= config.clip_norm / norm;
            Vector theta = model.flatten();
            nnet::nadam_update(theta, lg.gradient, opt);
            model.unflatten(theta);
            epoch_loss += lg.data_loss * static_cast<double>(starts.size());
        }
        const double val = evaluate_loss(model, validation_data, val_windows, config.batch_size);
        if (!std::isfinite(val)) throw NumericalError("validation loss is not finite at epoch " + std::to_string(epoch));
        result.log.push_back({epoch, epoch_loss / static_cast<double>(order.size()), val});
        if (val < result.best_validation_loss) {
            result.best_validation_loss = val;
            result.best_epoch = epoch;
            best = model.flatten();
            stale = 0;
        } else if (++stale >= config.patience) {
            break;
        }
    }
    model.unflatten(best);
    result.model = std::move(model);
    return result;
}

std::vector<ordinal::CategoricalDensity> forecast_ordinal(const Seq2SeqModel& model,
                                                          std::span<const double> seed_window, std::size_t horizon,
                                                          const nnet::DropoutSpec& masks) {
    require(model.mode == Mode::ordinal, "forecast_ordinal needs an ordinal model");
    check_masks(masks);
    const auto window = last_window(model, seed_window);
    nnet::LstmBatchState state = encode_seed(model, window, masks);
    static const Matrix kNoMask;
    const Matrix& dec_mask = masks.masks.empty() ? kNoMask : masks.masks[site(MaskSite::decoder)];
    const Matrix& out_mask = masks.masks.empty() ? kNoMask : masks.masks[site(MaskSite::output)];

    std::vector<ordinal::CategoricalDensity> out;
    out.reserve(horizon);
    Matrix input = encode_input(model, window.back());
    for (std::size_t k = 0; k < horizon; ++k) {
        state = nnet::lstm_step_batch(input, state, model.decoder, dec_mask, nullptr);
        Matrix features = state.h;
        if (out_mask.size() != 0) features.array() *= out_mask.array();
        Matrix logits = model.output.weights * features + model.output.bias;
        input = nnet::softmax_columns(logits);
        out.emplace_back(std::vector<double>(input.data(), input.data() + input.size()));
    }
    return out;
}

std::vector<double> forecast_scalar(const Seq2SeqModel& model, std::span<const double> seed_window,
                                    std::size_t horizon, const nnet::DropoutSpec& masks) {
    require(model.mode == Mode::regression, "forecast_scalar needs a regression model");
    check_masks(masks);
    const auto window = last_window(model, seed_window);
    nnet::LstmBatchState state = encode_seed(model, window, masks);
    static const Matrix kNoMask;
    const Matrix& dec_mask = masks.masks.empty() ? kNoMask : masks.masks[site(MaskSite::decoder)];
    const Matrix& out_mask = masks.masks.empty() ? kNoMask : masks.masks[site(MaskSite::output)];

    std::vector<double> out;
    out.reserve(horizon);
    Matrix input = encode_input(model, window.back());
    for (std::size_t k = 0; k < horizon; ++k) {
        state = nnet::lstm_step_batch(input, state, model.decoder, dec_mask, nullptr);
        Matrix features = state.h;
        if (out_mask.size() != 0) features.array() *= out_mask.array();
        input = model.output.weights * features + model.output.bias;
        if (!std::isfinite(input(0, 0))) throw NumericalError("regression rollout produced a non-finite value");
        out.push_back(input(0, 0));
    }
    return out;
}

namespace {

ForecastDistribution mc_dropout_impl(const Seq2SeqModel& model, std::span<const double> seed_window,
                                     std::size_t horizon, std::size_t samples, std::uint64_t seed, bool parallel) {
    require(model.mode == Mode::ordinal, "mc_dropout_forecast needs an ordinal model");
    require(samples >= 1, "mc_dropout_forecast needs at least one sample");
    std::vector<std::vector<ordinal::CategoricalDensity>> rollouts(samples);
    parallel_for(samples, parallel, [&](std::size_t s) {
        Rng rng = stream_rng(seed, s);
        rollouts[s] = forecast_ordinal(model, seed_window, horizon, model.sample_masks(1, rng));
    });
    const std::size_t bins = model.partition->bins();
    std::vector<ordinal::CategoricalDensity> mean;
    mean.reserve(horizon);
    for (std::size_t k = 0; k < horizon; ++k) {
        std::vector<double> acc(bins, 0.0);
        for (std::size_t s = 0; s < samples; ++s)
            for (std::size_t i = 0; i < bins; ++i) acc[i] += rollouts[s][k][i];
        for (double& p : acc) p /= static_cast<double>(samples);
        mean.emplace_back(std::move(acc));
    }
    return ForecastDistribution::categorical(*model.partition, std::move(mean));
}

RegressionForecast regression_impl(const Seq2SeqModel& model, std::span<const double> seed_window,
                                   std::size_t horizon, std::size_t samples, std::uint64_t seed, bool parallel) {
    require(model.mode == Mode::regression, "forecast_regression needs a regression model");
    require(samples >= 1, "forecast_regression needs at least one sample");
    TrajectoryEnsemble ens;
    ens.origin = TrajectoryEnsemble::Origin::model;
    ens.paths.resize(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(horizon));
    parallel_for(samples, parallel, [&](std::size_t s) {
        Rng rng = stream_rng(seed, s);
        const std::vector<double> path = forecast_scalar(model, seed_window, horizon, model.sample_masks(1, rng));
        for (std::size_t k = 0; k < horizon; ++k)
            ens.paths(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k)) = path[k];
    });
    std::vector<GaussianStep> steps(horizon);
    const auto n = static_cast<double>(samples);
    for (std::size_t k = 0; k < horizon; ++k) {
        const auto col = ens.paths.col(static_cast<Eigen::Index>(k));
        const double mu = col.sum() / n;
        steps[k] = {mu, (col.array() - mu).square().sum() / n};
    }
    return {gaussian_with_floor(std::move(steps), 1e-8), std::move(ens)};
}

}  // namespace

ForecastDistribution mc_dropout_forecast(const Seq2SeqModel& model, std::span<const double> seed_window,
                                         std::size_t horizon, std::size_t samples, std::uint64_t seed) {
    return mc_dropout_impl(model, seed_window, horizon, samples, seed, true);
}

ForecastDistribution mc_dropout_forecast_serial(const Seq2SeqModel& model, std::span<const double> seed_window,
                                                std::size_t horizon, std::size_t samples, std::uint64_t seed) {
    return mc_dropout_impl(model, seed_window, horizon, samples, seed, false);
}

RegressionForecast forecast_regression(const Seq2SeqModel& model, std::span<const double> seed_window,
                                       std::size_t horizon, std::size_t samples, std::uint64_t seed) {
    return regression_impl(model, seed_window, horizon, samples, seed, true);
}

RegressionForecast forecast_regression_serial(const Seq2SeqModel& model, std::span<const double> seed_window,
                                              std::size_t horizon, std::size_t samples, std::uint64_t seed) {
    return regression_impl(model, seed_window, horizon, samples, seed, false);
}

}  // namespace mordred::seq2seq
