#pragma once

#include <stdexcept>
#include <string>

namespace diffmn {

// Shape/dimension mismatches between tensors or network layers.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A caller violated an operation's contract (non-scalar loss, weights off
// the simplex, NaN time, ...).
struct ContractError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Training produced a non-finite gradient or loss.
struct DivergenceError : std::runtime_error {
    DivergenceError(const std::string& msg, std::string param)
        : std::runtime_error(msg), param_name(std::move(param)) {}
    std::string param_name;
};

// The CDE integration produced a non-finite latent state.
struct SolverBlowupError : std::runtime_error {
    SolverBlowupError(const std::string& msg, double t)
        : std::runtime_error(msg), time(t) {}
    double time;
};

// A channel has no observed points, so no path can be fit through it.
struct UnfitChannelError : std::runtime_error {
    UnfitChannelError(const std::string& msg, int ch)
        : std::runtime_error(msg), channel(ch) {}
    int channel;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace diffmn
