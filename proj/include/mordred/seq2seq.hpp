#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mordred/distribution.hpp"
#include "mordred/ensemble.hpp"
#include "mordred/nnet.hpp"
#include "mordred/ordinal.hpp"

namespace mordred::seq2seq {

using nnet::Matrix;
using nnet::Vector;

enum class Mode { ordinal, regression };

const char* to_string(Mode mode);
Mode mode_from_string(const std::string& name);

/// Dropout sites, in the order masks are stored in a DropoutSpec.
enum class MaskSite : std::size_t { encoder_forward = 0, encoder_backward = 1, decoder = 2, output = 3, handoff = 4 };
inline constexpr std::size_t kMaskSites = 5;

struct TrainingConfig {
    std::size_t lookback = 100;
    std::size_t decoder_length = 20;  // teacher-forced decoder steps per training window
    std::size_t units = 64;
    double p_drop = 0.25;
    double l2 = 1e-7;
    std::size_t max_epochs = 50;
    std::size_t batch_size = 256;
    std::size_t patience = 5;
    std::size_t stride = 1;
    double clip_norm = 5.0;
    bool handoff_dropout = false;
    std::uint64_t seed = 0;
    nnet::NadamConfig optimizer;

    void validate() const;
};

/// Bidirectional LSTM encoder, LSTM decoder and dense output layer. In ordinal
/// mode inputs and outputs are M-vectors over the bin partition; in regression
/// mode both are scalars.
class Seq2SeqModel {
public:
    Mode mode = Mode::ordinal;
    std::size_t units = 0;
    std::size_t lookback = 0;
    double p_drop = 0.0;
    bool handoff_dropout = false;
    std::uint64_t seed = 0;
    std::optional<ordinal::BinPartition> partition;

    nnet::LstmParams encoder_forward;
    nnet::LstmParams encoder_backward;
    nnet::LstmParams decoder;
    nnet::DenseParams output;

    /// Glorot-initialized model. `partition` is required in ordinal mode.
    static Seq2SeqModel create(Mode mode, std::size_t units, std::size_t lookback,
                               std::optional<ordinal::BinPartition> partition, double p_drop, bool handoff_dropout,
                               std::uint64_t seed);

    Eigen::Index input_dim() const;
    Eigen::Index output_dim() const;

    struct TensorView {
        std::string name;
        double* data;
        Eigen::Index rows;
        Eigen::Index cols;
    };
    /// Every parameter tensor in a fixed order (column-major storage).
    std::vector<TensorView> tensors();
    std::size_t parameter_count() const;
    Vector flatten() const;
    void unflatten(const Vector& flat);

    /// Masks for `batch` columns at every site; all-ones when p_drop is 0.
    nnet::DropoutSpec sample_masks(Eigen::Index batch, Rng& rng) const;

    /// Calls f(name, tensor) for every parameter tensor in checkpoint order.
    template <class Self, class F>
    static void visit_tensors(Self& self, F&& f) {
        f("encoder_forward.weights", self.encoder_forward.weights);
        f("encoder_forward.bias", self.encoder_forward.bias);
        f("encoder_backward.weights", self.encoder_backward.weights);
        f("encoder_backward.bias", self.encoder_backward.bias);
        f("decoder.weights", self.decoder.weights);
        f("decoder.bias", self.decoder.bias);
        f("output.weights", self.output.weights);
        f("output.bias", self.output.bias);
    }
};

/// Encoded series: bin indices in ordinal mode, raw values in regression mode.
struct SeriesData {
    Mode mode = Mode::ordinal;
    std::vector<std::size_t> indices;
    std::vector<double> values;
    std::size_t bins = 0;

    std::size_t size() const { return mode == Mode::ordinal ? indices.size() : values.size(); }
    static SeriesData ordinal(const ordinal::OrdinalSequence& seq);
    static SeriesData regression(std::vector<double> values);
};

/// Training windows. Window `s` feeds positions [s, s+P) to the encoder,
/// [s+P-1, s+P-1+L) to the decoder and targets [s+P, s+P+L).
struct WindowSet {
    std::size_t lookback = 0;
    std::size_t decoder_length = 1;
    std::vector<std::size_t> starts;

    std::size_t size() const { return starts.size(); }
};

WindowSet make_windows(std::size_t series_length, std::size_t lookback, std::size_t stride,
                       std::size_t decoder_length = 1);

struct LossAndGradient {
    double loss = 0.0;       // includes the l2 term
    double data_loss = 0.0;  // mean per-step loss only
    Vector gradient;
};

/// Teacher-forced mean per-step loss (cross-entropy or squared error) over the
/// given windows plus l2 * ||theta||^2, and its exact gradient by BPTT.
/// `masks` must hold kMaskSites masks for starts.size() columns, or be empty.
LossAndGradient loss_and_gradient(const Seq2SeqModel& model, const SeriesData& data, const WindowSet& windows,
                                  std::span<const std::size_t> starts, const nnet::DropoutSpec& masks, double l2);

/// Loss only, without dropout or the l2 term.
double evaluate_loss(const Seq2SeqModel& model, const SeriesData& data, const WindowSet& windows,
                     std::size_t batch_size = 256);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double validation_loss = 0.0;
};

struct TrainingResult {
    Seq2SeqModel model;
    std::vector<EpochRecord> log;
    std::size_t best_epoch = 0;
    double best_validation_loss = 0.0;
};

/// Nadam over shuffled minibatches with fresh masks per minibatch, gradient
/// clipping, early stopping on validation loss and best-parameter restoration.
/// Throws NumericalError on a non-finite loss.
TrainingResult train(Seq2SeqModel model, const SeriesData& train_data, const SeriesData& validation_data,
                     const TrainingConfig& config);

/// Autoregressive rollout with one fixed mask set (batch 1). The decoder starts
/// from the one-hot of the last observation and is then fed its own output
/// probability vectors.
std::vector<ordinal::CategoricalDensity> forecast_ordinal(const Seq2SeqModel& model,
                                                          std::span<const double> seed_window, std::size_t horizon,
                                                          const nnet::DropoutSpec& masks);

/// Scalar rollout feeding back the regression output.
std::vector<double> forecast_scalar(const Seq2SeqModel& model, std::span<const double> seed_window,
                                    std::size_t horizon, const nnet::DropoutSpec& masks);

/// MC-dropout predictive: mean of `samples` categorical rollouts, each with
/// its own mask set drawn from stream n of `seed`. OpenMP-parallel over samples.
ForecastDistribution mc_dropout_forecast(const Seq2SeqModel& model, std::span<const double> seed_window,
                                         std::size_t horizon, std::size_t samples, std::uint64_t seed);
/// Serial reference for mc_dropout_forecast; bitwise identical results.
ForecastDistribution mc_dropout_forecast_serial(const Seq2SeqModel& model, std::span<const double> seed_window,
                                                std::size_t horizon, std::size_t samples, std::uint64_t seed);

struct RegressionForecast {
    ForecastDistribution distribution;
    TrajectoryEnsemble rollouts;
};

/// MC-dropout Gaussian predictive for regression mode: per-step mean and
/// population variance of the rollouts, variance floored at 1e-8.
RegressionForecast forecast_regression(const Seq2SeqModel& model, std::span<const double> seed_window,
                                       std::size_t horizon, std::size_t samples, std::uint64_t seed);
RegressionForecast forecast_regression_serial(const Seq2SeqModel& model, std::span<const double> seed_window,
                                              std::size_t horizon, std::size_t samples, std::uint64_t seed);

}  // namespace mordred::seq2seq
