#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "mordred/common.hpp"
#include "mordred/ordinal.hpp"

// Minimal recurrent-network core: LSTM cell, softmax output, losses, BPTT,
// Nadam and Glorot initialization. Batched routines keep one sample per column.
namespace mordred::nnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Row-block order of the stacked gate weights.
enum class Gate : int { input = 0, output = 1, forget = 2, candidate = 3 };

/// Parameters of one LSTM layer. The four gate matrices W_i, W_o, W_f, W_S
/// (each units x (inputs + units)) are stacked row-wise in Gate order and act
/// on the concatenation (x_t, h_{t-1}).
struct LstmParams {
    Matrix weights;
    Vector bias;

    static LstmParams zeros(Eigen::Index inputs, Eigen::Index units);
    /// Glorot-uniform gate matrices, zero biases except forget-gate bias 1.
    static LstmParams glorot(Eigen::Index inputs, Eigen::Index units, Rng& rng);

    Eigen::Index units() const { return bias.size() / 4; }
    Eigen::Index inputs() const { return weights.cols() - units(); }

    auto gate_weights(Gate g) { return weights.middleRows(static_cast<int>(g) * units(), units()); }
    auto gate_weights(Gate g) const { return weights.middleRows(static_cast<int>(g) * units(), units()); }
    auto gate_bias(Gate g) { return bias.segment(static_cast<int>(g) * units(), units()); }
    auto gate_bias(Gate g) const { return bias.segment(static_cast<int>(g) * units(), units()); }
};

struct DenseParams {
    Matrix weights;  // outputs x inputs
    Vector bias;

    static DenseParams zeros(Eigen::Index inputs, Eigen::Index outputs);
    static DenseParams glorot(Eigen::Index inputs, Eigen::Index outputs, Rng& rng);
};

/// Single-sample recurrent state.
struct LstmState {
    Vector h;
    Vector c;

    static LstmState zeros(Eigen::Index units);
};

/// Batched recurrent state (units x batch).
struct LstmBatchState {
    Matrix h;
    Matrix c;

    static LstmBatchState zeros(Eigen::Index units, Eigen::Index batch);
};

/// Dropout probability plus concrete masks. Each mask entry is 0 or
/// 1/(1 - p_drop); one mask set is drawn per forward pass and reused at every
/// time step of that pass.
struct DropoutSpec {
    double p_drop = 0.0;
    std::vector<Matrix> masks;
};

/// Activations of one batched LSTM step kept for the backward pass.
struct LstmStepCache {
    Matrix z;       // masked concatenated input
    Matrix gates;   // post-activation i, o, f, S stacked like the weights
    Matrix c_prev;
    Matrix tanh_c;
};

struct LstmTape {
    Matrix mask;  // empty when no dropout is applied
    std::vector<LstmStepCache> steps;
};

/// One LSTM step for a single sample. `mask` (length inputs+units) multiplies
/// the concatenated input; pass an empty vector for no dropout.
LstmState lstm_step(const Vector& x, const LstmState& prev, const LstmParams& params, const Vector& mask = {});

/// Folds lstm_step over `inputs` and returns every intermediate state.
std::vector<LstmState> lstm_scan(std::span<const Vector> inputs, const LstmParams& params, const Vector& mask,
                                 const LstmState& init);

/// Final state of a forward scan over `inputs` averaged with the final state of
/// a second LSTM scanning the reversed inputs.
LstmState bidirectional_encode(std::span<const Vector> inputs, const LstmParams& forward, const LstmParams& backward,
                               const Vector& forward_mask = {}, const Vector& backward_mask = {});

/// Batched step. When `cache` is non-null the activations needed by
/// lstm_backward are recorded there.
LstmBatchState lstm_step_batch(const Matrix& x, const LstmBatchState& prev, const LstmParams& params,
                               const Matrix& mask, LstmStepCache* cache);

/// Backpropagation through time over a recorded tape. `dh_out[t]` is the loss
/// gradient w.r.t. the step-t output (empty span means none); `d_final` the
/// gradient w.r.t. the final (h, C). Accumulates into `grads` and returns the
/// gradient w.r.t. the initial state.
LstmBatchState lstm_backward(const LstmParams& params, const LstmTape& tape, std::span<const Matrix> dh_out,
                             const LstmBatchState& d_final, LstmParams& grads);

/// Column-wise softmax stabilized by max subtraction.
Matrix softmax_columns(const Matrix& logits);

ordinal::CategoricalDensity dense_softmax(const Vector& h, const Matrix& weights, const Vector& bias);

/// -log(pred[target]) with the probability floored at 1e-12.
double cross_entropy(const ordinal::CategoricalDensity& pred, std::size_t target);

double mse(std::span<const double> pred, std::span<const double> target);

/// Entries iid uniform on [-L, L], L = sqrt(6 / (fan_in + fan_out)) with
/// fan_in = cols and fan_out = rows.
Matrix glorot_uniform_init(Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// Inverted-dropout mask of the given shape.
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p_drop, Rng& rng);

/// Draws one mask per requested (rows, cols) shape. Throws unless 0 <= p_drop < 1.
DropoutSpec sample_dropout_masks(double p_drop, std::span<const std::pair<Eigen::Index, Eigen::Index>> shapes,
                                 Rng& rng);

struct NadamConfig {
    double learning_rate = 0.002;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double schedule_decay = 0.004;
    double epsilon = 1e-7;
};

struct OptimizerState {
    NadamConfig config;
    std::uint64_t step = 0;
    double momentum_schedule = 1.0;
    Vector m;
    Vector v;
};

/// Nesterov Adam with the warming momentum schedule
///   mu_t = beta1 * (1 - 0.5 * 0.96^(t * schedule_decay))
/// and bias-corrected moments:
///   g'  = g / (1 - prod_{i<=t} mu_i)
///   m_t = beta1 m + (1 - beta1) g,      m'  = m_t / (1 - prod_{i<=t+1} mu_i)
///   v_t = beta2 v + (1 - beta2) g^2,    v'  = v_t / (1 - beta2^t)
///   p  -= lr * ((1 - mu_t) g' + mu_{t+1} m') / (sqrt(v') + eps)
void nadam_update(Vector& params, const Vector& grads, OptimizerState& state);

}  // namespace mordred::nnet
