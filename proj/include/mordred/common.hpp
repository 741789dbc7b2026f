#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace mordred {

/// Raised when a computation produces non-finite values or fails to factorize.
/// The CLI maps it to exit code 2.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

/// Independent generator for stream `stream` of a base seed. Parallel kernels
/// give each work item its own stream so results do not depend on thread count.
inline Rng stream_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x6d6f7264u};
    return Rng(seq);
}

inline void require(bool condition, const std::string& message) {
    if (!condition) throw std::invalid_argument(message);
}

}  // namespace mordred
