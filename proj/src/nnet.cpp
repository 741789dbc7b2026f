#include "mordred/nnet.hpp"

#include <algorithm>
#include <cmath>

namespace mordred::nnet {

namespace {

Matrix sigmoid(const Matrix& a) { return (1.0 + (-a.array()).exp()).inverse().matrix(); }

}  // namespace

LstmParams LstmParams::zeros(Eigen::Index inputs, Eigen::Index units) {
    return {Matrix::Zero(4 * units, inputs + units), Vector::Zero(4 * units)};
}

LstmParams LstmParams::glorot(Eigen::Index inputs, Eigen::Index units, Rng& rng) {
    LstmParams p = zeros(inputs, units);
    for (Gate g : {Gate::input, Gate::output, Gate::forget, Gate::candidate})
        p.gate_weights(g) = glorot_uniform_init(units, inputs + units, rng);
    p.gate_bias(Gate::forget).setOnes();
    return p;
}

DenseParams DenseParams::zeros(Eigen::Index inputs, Eigen::Index outputs) {
    return {Matrix::Zero(outputs, inputs), Vector::Zero(outputs)};
}

DenseParams DenseParams::glorot(Eigen::Index inputs, Eigen::Index outputs, Rng& rng) {
    return {glorot_uniform_init(outputs, inputs, rng), Vector::Zero(outputs)};
}

LstmState LstmState::zeros(Eigen::Index units) { return {Vector::Zero(units), Vector::Zero(units)}; }

LstmBatchState LstmBatchState::zeros(Eigen::Index units, Eigen::Index batch) {
    return {Matrix::Zero(units, batch), Matrix::Zero(units, batch)};
}

LstmBatchState lstm_step_batch(const Matrix& x, const LstmBatchState& prev, const LstmParams& params,
                               const Matrix& mask, LstmStepCache* cache) {
    const Eigen::Index n = params.units();
    const Eigen::Index n_in = params.inputs();
    const Eigen::Index batch = x.cols();
    require(x.rows() == n_in, "lstm_step: input dimension mismatch");
    require(prev.h.rows() == n && prev.c.rows() == n && prev.h.cols() == batch && prev.c.cols() == batch,
            "lstm_step: state shape mismatch");

    Matrix z(n_in + n, batch);
    z.topRows(n_in) = x;
    z.bottomRows(n) = prev.h;
    if (mask.size() != 0) {
        require(mask.rows() == z.rows() && mask.cols() == batch, "lstm_step: mask shape mismatch");
        z.array() *= mask.array();
    }

    Matrix gates = params.weights * z;
    gates.colwise() += params.bias;
    gates.topRows(3 * n) = sigmoid(gates.topRows(3 * n));
    gates.bottomRows(n) = gates.bottomRows(n).array().tanh().matrix();

    LstmBatchState next;
    next.c = (gates.middleRows(0, n).array() * gates.middleRows(3 * n, n).array() +
              gates.middleRows(2 * n, n).array() * prev.c.array())
                 .matrix();
    Matrix tanh_c = next.c.array().tanh().matrix();
    next.h = (gates.middleRows(n, n).array() * tanh_c.array()).matrix();

    if (cache != nullptr) {
        cache->z = std::move(z);
        cache->gates = std::move(gates);
        cache->c_prev = prev.c;
        cache->tanh_c = std::move(tanh_c);
    }
    return next;
}

LstmState lstm_step(const Vector& x, const LstmState& prev, const LstmParams& params, const Vector& mask) {
    LstmBatchState s = lstm_step_batch(x, LstmBatchState{prev.h, prev.c}, params, mask, nullptr);
    return {s.h.col(0), s.c.col(0)};
}

std::vector<LstmState> lstm_scan(std::span<const Vector> inputs, const LstmParams& params, const Vector& mask,
                                 const LstmState& init) {
    require(!inputs.empty(), "lstm_scan: empty input sequence");
    std::vector<LstmState> states;
    states.reserve(inputs.size());
    LstmState state = init;
    for (const Vector& x : inputs) {
        state = lstm_step(x, state, params, mask);
        states.push_back(state);
    }
    return states;
}

LstmState bidirectional_encode(std::span<const Vector> inputs, const LstmParams& forward, const LstmParams& backward,
                               const Vector& forward_mask, const Vector& backward_mask) {
    require(!inputs.empty(), "bidirectional_encode: empty input sequence");
    require(forward.units() == backward.units(), "bidirectional_encode: unit count mismatch");
    std::vector<Vector> reversed(inputs.rbegin(), inputs.rend());
    const LstmState init = LstmState::zeros(forward.units());
    const LstmState f = lstm_scan(inputs, forward, forward_mask, init).back();
    const LstmState b = lstm_scan(reversed, backward, backward_mask, init).back();
    return {0.5 * (f.h + b.h), 0.5 * (f.c + b.c)};
}

LstmBatchState lstm_backward(const LstmParams& params, const LstmTape& tape, std::span<const Matrix> dh_out,
                             const LstmBatchState& d_final, LstmParams& grads) {
    const Eigen::Index n = params.units();
    require(dh_out.empty() || dh_out.size() == tape.steps.size(), "lstm_backward: output gradient count mismatch");
    Matrix dh = d_final.h;
    Matrix dc = d_final.c;
    for (std::size_t t = tape.steps.size(); t-- > 0;) {
        const LstmStepCache& s = tape.steps[t];
        if (!dh_out.empty() && dh_out[t].size() != 0) dh += dh_out[t];

        const auto i = s.gates.middleRows(0, n).array();
        const auto o = s.gates.middleRows(n, n).array();
        const auto f = s.gates.middleRows(2 * n, n).array();
        const auto cand = s.gates.middleRows(3 * n, n).array();
        const auto tc = s.tanh_c.array();

        dc.array() += dh.array() * o * (1.0 - tc.square());

        Matrix da(4 * n, dh.cols());
        da.middleRows(0, n) = (dc.array() * cand * i * (1.0 - i)).matrix();
        da.middleRows(n, n) = (dh.array() * tc * o * (1.0 - o)).matrix();
        da.middleRows(2 * n, n) = (dc.array() * s.c_prev.array() * f * (1.0 - f)).matrix();
        da.middleRows(3 * n, n) = (dc.array() * i * (1.0 - cand.square())).matrix();

        grads.weights.noalias() += da * s.z.transpose();
        grads.bias += da.rowwise().sum();

        Matrix dz = params.weights.transpose() * da;
        if (tape.mask.size() != 0) dz.array() *= tape.mask.array();
        dh = dz.bottomRows(n);
        dc = (dc.array() * f).matrix();
    }
    return {dh, dc};
}

Matrix softmax_columns(const Matrix& logits) {
    Matrix out = logits;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        auto col = out.col(j);
        col.array() -= col.maxCoeff();
        col = col.array().exp().matrix();
        col /= col.sum();
    }
    return out;
}

ordinal::CategoricalDensity dense_softmax(const Vector& h, const Matrix& weights, const Vector& bias) {
    require(weights.cols() == h.size() && weights.rows() == bias.size(), "dense_softmax: shape mismatch");
    Matrix logits = weights * h + bias;
    Matrix p = softmax_columns(logits);
    return ordinal::CategoricalDensity(std::vector<double>(p.data(), p.data() + p.size()));
}

double cross_entropy(const ordinal::CategoricalDensity& pred, std::size_t target) {
    require(target < pred.size(), "cross_entropy: target out of range");
    return -std::log(std::max(pred[target], ordinal::kProbFloor));
}

double mse(std::span<const double> pred, std::span<const double> target) {
    require(pred.size() == target.size(), "mse: length mismatch");
    require(!pred.empty(), "mse: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += (pred[i] - target[i]) * (pred[i] - target[i]);
    return acc / static_cast<double>(pred.size());
}

Matrix glorot_uniform_init(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    require(rows > 0 && cols > 0, "glorot_uniform_init: dimensions must be positive");
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
    return m;
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p_drop, Rng& rng) {
    require(p_drop >= 0.0 && p_drop < 1.0, "dropout probability must lie in [0, 1)");
    if (p_drop == 0.0) return Matrix::Ones(rows, cols);
    std::bernoulli_distribution keep(1.0 - p_drop);
    const double scale = 1.0 / (1.0 - p_drop);
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = keep(rng) ? scale : 0.0;
    return m;
}

DropoutSpec sample_dropout_masks(double p_drop, std::span<const std::pair<Eigen::Index, Eigen::Index>> shapes,
                                 Rng& rng) {
    DropoutSpec spec{p_drop, {}};
    spec.masks.reserve(shapes.size());
    for (auto [rows, cols] : shapes) spec.masks.push_back(dropout_mask(rows, cols, p_drop, rng));
    return spec;
}

void nadam_update(Vector& params, const Vector& grads, OptimizerState& state) {
    require(params.size() == grads.size(), "nadam_update: shape mismatch");
    if (state.m.size() == 0) {
        state.m = Vector::Zero(params.size());
        state.v = Vector::Zero(params.size());
    }
    require(state.m.size() == params.size(), "nadam_update: optimizer state shape mismatch");
    const NadamConfig& cfg = state.config;
    state.step += 1;
    const auto t = static_cast<double>(state.step);
    const double mu_t = cfg.beta1 * (1.0 - 0.5 * std::pow(0.96, t * cfg.schedule_decay));
    const double mu_next = cfg.beta1 * (1.0 - 0.5 * std::pow(0.96, (t + 1.0) * cfg.schedule_decay));
    const double schedule_new = state.momentum_schedule * mu_t;
    const double schedule_next = schedule_new * mu_next;
    state.momentum_schedule = schedule_new;

    const double v_correction = 1.0 - std::pow(cfg.beta2, t);
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        const double g_prime = g / (1.0 - schedule_new);
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        const double m_prime = state.m[i] / (1.0 - schedule_next);
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double v_prime = state.v[i] / v_correction;
        const double m_bar = (1.0 - mu_t) * g_prime + mu_next * m_prime;
        params[i] -= cfg.learning_rate * m_bar / (std::sqrt(v_prime) + cfg.epsilon);
    }
}

}  // namespace mordred::nnet
