#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

// Synthetic series: discrete maps, delay maps and RK4-integrated flows.
namespace mordred::datagen {

enum class SystemKind { map, delay, flow };

struct SystemSpec {
    std::string id;
    SystemKind kind = SystemKind::map;
    std::map<std::string, double> params;
    std::vector<double> initial;  // state variables; two lags for second-order maps
    double dt = 0.01;             // flows only
    std::size_t stride = 10;      // flows only: integrator steps per sample
    std::size_t burn_in = 1000;   // samples discarded before output
    std::size_t channel = 0;      // state component returned
    std::size_t length = 15000;
    std::uint64_t seed = 0;       // stochastic systems only

    double param(const std::string& name) const;
};

/// Default specs for every built-in system, keyed by id.
const std::map<std::string, SystemSpec>& registry();
std::vector<std::string> system_ids();
/// Throws std::invalid_argument listing the valid ids for an unknown id.
SystemSpec system_spec(const std::string& id);

std::vector<double> gen_map(const SystemSpec& spec);
std::vector<double> gen_flow(const SystemSpec& spec);
std::vector<double> gen_mackey_glass(double a, double b, std::size_t tau, double n, std::size_t length,
                                     const std::vector<double>& history, std::size_t burn_in = 1000);
/// Dispatches on spec.kind.
std::vector<double> generate(const SystemSpec& spec);

using State = std::vector<double>;
using VectorField = std::function<void(const State& x, State& dx)>;

/// One classical fourth-order Runge-Kutta step.
void rk4_step(const VectorField& f, State& x, double dt);

/// Vector field of a registered flow with the spec's parameters.
VectorField flow_field(const SystemSpec& spec);

}  // namespace mordred::datagen
