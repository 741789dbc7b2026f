#include "mordred/datagen.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "mordred/common.hpp"

namespace mordred::datagen {

namespace {

constexpr double kDivergence = 1e6;

SystemSpec make(std::string id, SystemKind kind, std::map<std::string, double> params, std::vector<double> initial,
                std::size_t channel = 0) {
    SystemSpec s;
    s.id = std::move(id);
    s.kind = kind;
    s.params = std::move(params);
    s.initial = std::move(initial);
    s.channel = channel;
    return s;
}

std::map<std::string, SystemSpec> build_registry() {
    using K = SystemKind;
    std::vector<SystemSpec> all{
        make("mackey_glass", K::delay, {{"a", 0.2}, {"b", 0.1}, {"tau", 17}, {"n", 10}}, {1.2}),
        make("henon", K::map, {{"a", 1.4}, {"b", 0.3}}, {0.0, 0.0}),
        // initial = {x_0, x_1}
        make("lozi", K::map, {{"a", 1.7}, {"b", 0.5}}, {0.15, -0.1}),
        make("freitas", K::map, {{"mu", 2.4}, {"b", 3.0}, {"q", 0.2}}, {0.1}),
        make("logistic", K::map, {{"A", 3.2}}, {0.91}),
        make("timmer_ar2", K::map,
             {{"tau", 20}, {"T_mean", 20}, {"T_mod", 20}, {"sigma", 1}, {"M_T", 5}, {"eta", 1000}}, {0.0, 0.0}),
        make("faes_nlar2", K::map, {{"a1", 3.6}, {"a2", 0.8}, {"sigma", 0.1}}, {0.1, 0.2}),
        make("lorenz", K::flow, {{"sigma", 10}, {"r", 28}, {"b", 8.0 / 3.0}}, {1.0, 1.0, 1.0}),
        make("rossler", K::flow, {{"a", 0.15}, {"b", 0.20}, {"c", 10.0}}, {1.0, 1.0, 0.0}),
        make("act", K::flow, {{"alpha", 1.8}, {"beta", -0.07}, {"delta", 1.5}, {"mu", 0.02}}, {0.5, 0.0, 0.0}, 2),
        make("chen", K::flow, {{"a", 35}, {"b", 3}, {"c", 28}}, {-10.0, 0.0, 37.0}),
        make("double_scroll", K::flow, {{"a", 0.8}}, {0.01, 0.01, 0.0}, 1),
        make("hadley", K::flow, {{"a", 0.25}, {"b", 4}, {"F", 8}, {"G", 1}}, {0.0, 0.0, 1.3}),
        make("labyrinth", K::flow, {}, {0.1, 0.0, 0.0}, 1),
        make("moore_spiegel", K::flow, {{"T", 6}, {"R", 20}}, {0.1, 0.0, 0.0}, 2),
        make("nose_hoover", K::flow, {{"a", 1}}, {0.0, 5.0, 0.0}, 2),
        make("rucklidge", K::flow, {{"kappa", 2}, {"lambda", 6.7}}, {1.0, 0.0, 4.5}, 2),
        make("simplest_quadratic", K::flow, {{"a", 2.028}}, {-0.5, 0.0, 0.0}, 1),
        make("thomas", K::flow, {{"b", 0.18}}, {0.1, 0.0, 0.0}, 1),
        make("windmi", K::flow, {{"a", 0.7}, {"b", 2.5}}, {0.0, 0.8, 0.0}, 1),
    };
    std::map<std::string, SystemSpec> out;
    for (auto& s : all) out.emplace(s.id, std::move(s));
    return out;
}

void check_map_value(const SystemSpec& spec, double x, std::size_t step) {
    if (!std::isfinite(x) || std::abs(x) > kDivergence)
        throw NumericalError(spec.id + " diverged at step " + std::to_string(step));
}

double sgn(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

double SystemSpec::param(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument(id + ": missing parameter '" + name + "'");
    return it->second;
}

const std::map<std::string, SystemSpec>& registry() {
    static const auto systems = build_registry();
    return systems;
}

std::vector<std::string> system_ids() {
    std::vector<std::string> ids;
    for (const auto& [id, spec] : registry()) ids.push_back(id);
    return ids;
}

SystemSpec system_spec(const std::string& id) {
    auto it = registry().find(id);
    if (it != registry().end()) return it->second;
    std::string valid;
    for (const auto& name : system_ids()) valid += (valid.empty() ? "" : ", ") + name;
    throw std::invalid_argument("unknown system '" + id + "'; valid ids: " + valid);
}

std::vector<double> gen_map(const SystemSpec& spec) {
    require(spec.length > 0, "length must be positive");
    const std::size_t total = spec.burn_in + spec.length;
    std::vector<double> out;
    out.reserve(spec.length);
    Rng rng = stream_rng(spec.seed, 0);
    std::normal_distribution<double> normal(0.0, 1.0);

    auto emit = [&](std::size_t step, double v) {
        check_map_value(spec, v, step);
        if (step >= spec.burn_in) out.push_back(v);
    };

    if (spec.id == "logistic") {
        require(spec.initial.size() == 1, "logistic needs one initial value");
        const double a = spec.param("A");
        double x = spec.initial[0];
        for (std::size_t t = 0; t < total; ++t) {
            emit(t, x);
            x = a * x * (1.0 - x);
        }
    } else if (spec.id == "henon") {
        require(spec.initial.size() == 2, "henon needs (x0, y0)");
        const double a = spec.param("a"), b = spec.param("b");
        double x = spec.initial[0], y = spec.initial[1];
        for (std::size_t t = 0; t < total; ++t) {
            const double v = spec.channel == 0 ? x : y;
            emit(t, v);
            const double nx = a + b * y - x * x;
            y = x;
            x = nx;
        }
    } else if (spec.id == "lozi") {
        require(spec.initial.size() == 2, "lozi needs (x_0, x_1)");
        const double a = spec.param("a"), b = spec.param("b");
        double prev = spec.initial[0], x = spec.initial[1];
        for (std::size_t t = 0; t < total; ++t) {
            emit(t, x);
            const double next = 1.0 - a * std::abs(x) + b * prev;
            prev = x;
            x = next;
        }
    } else if (spec.id == "freitas") {
        require(spec.initial.size() == 1, "freitas needs one initial value");
        const double mu = spec.param("mu"), b = spec.param("b"), q = spec.param("q");
        std::uniform_real_distribution<double> eta(-b, b);
        std::bernoulli_distribution jump(q);
        double x = spec.initial[0];
        for (std::size_t t = 0; t < total; ++t) {
            emit(t, x);
            const double e = eta(rng);
            x = mu * std::sin(x) + (jump(rng) ? e : 0.0);
        }
    } else if (spec.id == "timmer_ar2") {
        // AR(2) with relaxation time tau and period drifting sinusoidally
        // around T_mean by M_T with modulation period eta.
        require(spec.initial.size() == 2, "timmer_ar2 needs two initial lags");
        const double tau = spec.param("tau"), t_mean = spec.param("T_mean"), m_t = spec.param("M_T");
        const double eta = spec.param("eta"), sigma = spec.param("sigma");
        const double radius = std::exp(-1.0 / tau);
        double prev = spec.initial[0], x = spec.initial[1];
        for (std::size_t t = 0; t < total; ++t) {
            emit(t, x);
            const double period = t_mean + m_t * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / eta);
            const double a1 = 2.0 * radius * std::cos(2.0 * std::numbers::pi / period);
            const double next = a1 * x - radius * radius * prev + sigma * normal(rng);
            prev = x;
            x = next;
        }
    } else if (spec.id == "faes_nlar2") {
        // x_t = a1 x_{t-1} / (1 + x_{t-1}^2) - a2 x_{t-2} + sigma e_t
        require(spec.initial.size() == 2, "faes_nlar2 needs two initial lags");
        const double a1 = spec.param("a1"), a2 = spec.param("a2"), sigma = spec.param("sigma");
        double prev = spec.initial[0], x = spec.initial[1];
        for (std::size_t t = 0; t < total; ++t) {
            emit(t, x);
            const double next = a1 * x / (1.0 + x * x) - a2 * prev + sigma * normal(rng);
            prev = x;
            x = next;
        }
    } else {
        throw std::invalid_argument("'" + spec.id + "' is not a map");
    }
    return out;
}

void rk4_step(const VectorField& f, State& x, double dt) {
    const std::size_t n = x.size();
    State k1(n), k2(n), k3(n), k4(n), tmp(n);
    f(x, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
    f(tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
    f(tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + dt * k3[i];
    f(tmp, k4);
    for (std::size_t i = 0; i < n; ++i) x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

VectorField flow_field(const SystemSpec& s) {
    const std::string& id = s.id;
    if (id == "lorenz") {
        const double sigma = s.param("sigma"), r = s.param("r"), b = s.param("b");
        return [=](const State& x, State& d) {
            d[0] = sigma * (x[1] - x[0]);
            d[1] = r * x[0] - x[1] - x[0] * x[2];
            d[2] = x[0] * x[1] - b * x[2];
        };
    }
    if (id == "rossler") {
        const double a = s.param("a"), b = s.param("b"), c = s.param("c");
        return [=](const State& x, State& d) {
            d[0] = -x[2] - x[1];
            d[1] = x[0] + a * x[1];
            d[2] = b + x[2] * (x[0] - c);
        };
    }
    if (id == "act") {
        const double al = s.param("alpha"), be = s.param("beta"), de = s.param("delta"), mu = s.param("mu");
        return [=](const State& x, State& d) {
            d[0] = al * (x[0] - x[1]);
            d[1] = -4.0 * al * x[1] + x[0] * x[2] + mu * x[0] * x[0] * x[0];
            d[2] = -de * al * x[2] + x[0] * x[1] + be * x[2] * x[2];
        };
    }
    if (id == "chen") {
        const double a = s.param("a"), b = s.param("b"), c = s.param("c");
        return [=](const State& x, State& d) {
            d[0] = a * (x[1] - x[0]);
            d[1] = (c - a) * x[0] - x[0] * x[2] + c * x[1];
            d[2] = x[0] * x[1] - b * x[2];
        };
    }
    if (id == "double_scroll") {
        const double a = s.param("a");
        return [=](const State& x, State& d) {
            d[0] = x[1];
            d[1] = x[2];
            d[2] = -a * (x[2] + x[1] + x[0] - sgn(x[0]));
        };
    }
    if (id == "hadley") {
        const double a = s.param("a"), b = s.param("b"), f = s.param("F"), g = s.param("G");
        return [=](const State& x, State& d) {
            d[0] = -x[1] * x[1] - x[2] * x[2] - a * x[0] + a * f;
            d[1] = x[0] * x[1] - b * x[0] * x[2] - x[1] + g;
            d[2] = b * x[0] * x[1] + x[0] * x[2] - x[2];
        };
    }
    if (id == "labyrinth") {
        return [](const State& x, State& d) {
            d[0] = std::sin(x[1]);
            d[1] = -std::sin(x[2]);
            d[2] = std::sin(x[0]);
        };
    }
    if (id == "moore_spiegel") {
        const double t = s.param("T"), r = s.param("R");
        return [=](const State& x, State& d) {
            d[0] = x[1];
            d[1] = x[2];
            d[2] = -x[2] - (t - r + r * x[0] * x[0]) * x[1] - t * x[0];
        };
    }
    if (id == "nose_hoover") {
        const double a = s.param("a");
        return [=](const State& x, State& d) {
            d[0] = x[1];
            d[1] = -x[0] + x[1] * x[2];
            d[2] = a - x[1] * x[1];
        };
    }
    if (id == "rucklidge") {
        const double k = s.param("kappa"), l = s.param("lambda");
        return [=](const State& x, State& d) {
            d[0] = -k * x[0] + l * x[1] - x[1] * x[2];
            d[1] = x[0];
            d[2] = -x[2] + x[1] * x[1];
        };
    }
    if (id == "simplest_quadratic") {
        const double a = s.param("a");
        return [=](const State& x, State& d) {
            d[0] = x[1];
            d[1] = x[2];
            d[2] = -a * x[2] + x[1] * x[1] - x[0];
        };
    }
    if (id == "thomas") {
        const double b = s.param("b");
        return [=](const State& x, State& d) {
            d[0] = -b * x[0] + std::sin(x[1]);
            d[1] = -b * x[1] + std::sin(x[2]);
            d[2] = -b * x[2] + std::sin(x[0]);
        };
    }
    if (id == "windmi") {
        const double a = s.param("a"), b = s.param("b");
        return [=](const State& x, State& d) {
            d[0] = x[1];
            d[1] = x[2];
            d[2] = -a * x[2] - x[1] + b - std::exp(x[0]);
        };
    }
    throw std::invalid_argument("'" + id + "' is not a flow");
}

std::vector<double> gen_flow(const SystemSpec& spec) {
    require(spec.dt > 0.0 && spec.stride >= 1, "flows need dt > 0 and stride >= 1");
    require(spec.length > 0, "length must be positive");
    require(spec.initial.size() == 3, spec.id + " needs a three-dimensional initial state");
    require(spec.channel < 3, "channel out of range");
    const auto field = flow_field(spec);
    State x = spec.initial;
    std::vector<double> out;
    out.reserve(spec.length);
    const std::size_t total = spec.burn_in + spec.length;
    for (std::size_t sample = 0; sample < total; ++sample) {
        if (sample >= spec.burn_in) out.push_back(x[spec.channel]);
        for (std::size_t k = 0; k < spec.stride; ++k) rk4_step(field, x, spec.dt);
        for (double v : x)
            if (!std::isfinite(v))
                throw NumericalError(spec.id + ": non-finite state after sample " + std::to_string(sample));
    }
    return out;
}

std::vector<double> gen_mackey_glass(double a, double b, std::size_t tau, double n, std::size_t length,
                                     const std::vector<double>& history, std::size_t burn_in) {
    require(history.size() >= tau + 1, "Mackey-Glass history must hold tau + 1 values");
    require(length > 0, "length must be positive");
    std::vector<double> x(history.end() - static_cast<std::ptrdiff_t>(tau + 1), history.end());
    x.reserve(tau + 1 + burn_in + length);
    while (x.size() < tau + 1 + burn_in + length) {
        const double now = x.back();
        const double lag = x[x.size() - 1 - tau];
        x.push_back((1.0 - b) * now + a * lag / (1.0 + std::pow(lag, n)));
    }
    return {x.end() - static_cast<std::ptrdiff_t>(length), x.end()};
}

std::vector<double> generate(const SystemSpec& spec) {
    switch (spec.kind) {
        case SystemKind::map: return gen_map(spec);
        case SystemKind::flow: return gen_flow(spec);
        case SystemKind::delay: {
            const auto tau = static_cast<std::size_t>(spec.param("tau"));
            require(!spec.initial.empty(), "Mackey-Glass needs a history value");
            const std::vector<double> history(tau + 1, spec.initial[0]);
            return gen_mackey_glass(spec.param("a"), spec.param("b"), tau, spec.param("n"), spec.length, history,
                                    spec.burn_in);
        }
    }
    throw std::logic_error("unreachable");
}

}  // namespace mordred::datagen
