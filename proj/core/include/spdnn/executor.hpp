#pragma once

#include "spdnn/tensor.hpp"
#include "spdnn/topology.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace spdnn {

/// Parameter name -> tensor. Names are "<node>/weight", "<node>/bias",
/// "<node>/gamma" and "<node>/beta".
using ParamStore = std::map<std::string, Tensor>;

struct ParamSpec {
    std::string name;
    std::vector<std::size_t> shape;
};

/// Names and shapes of every parameter the network owns, in canonical
/// node order. Requires a shape-valid network.
std::vector<ParamSpec> param_layout(const NetworkTopology& net);

/// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases,
/// gamma = 1 and beta = 0. Reproducible for a given seed.
ParamStore init_params(const NetworkTopology& net, std::uint64_t seed);

/// Throws ValidationError unless `params` holds exactly the parameters of
/// `param_layout(net)` with matching shapes.
void check_params(const NetworkTopology& net, const ParamStore& params);

enum class Mode { Inference, Training };

struct RunOptions {
    Mode mode = Mode::Inference;
    /// Seeds the dropout masks in training mode.
    std::uint64_t dropout_seed = 0;
};

/// Evaluates the network on a C x H x W input in topological order.
Tensor forward(const NetworkTopology& net, const ParamStore& params, const Tensor& input,
               const RunOptions& options = {});

struct BackwardResult {
    double loss = 0.0;
    Tensor output;
    ParamStore grads; // same keys and shapes as the parameters
};

/// Forward pass, MSE loss against `target`, and reverse-mode gradients of
/// the loss for every parameter.
BackwardResult backward(const NetworkTopology& net, const ParamStore& params, const Tensor& input,
                        const Tensor& target, const RunOptions& options = {});

/// Zero-filled store with the same keys and shapes.
ParamStore zeros_like(const ParamStore& params);

} // namespace spdnn
