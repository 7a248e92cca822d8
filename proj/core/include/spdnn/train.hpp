#pragma once

#include "spdnn/executor.hpp"
#include "spdnn/optimizer.hpp"

#include <cstdint>
#include <vector>

namespace spdnn {

/// Synthetic stand-in for a depth dataset: smooth random intensity fields
/// as inputs, and as targets the blurred, inverted and renormalised input.
struct DemoTask {
    std::vector<Tensor> inputs;
    std::vector<Tensor> targets;
};

DemoTask make_demo_task(const Shape3& input, std::size_t samples, std::uint64_t seed);

struct TrainConfig {
    std::size_t steps = 200;
    std::uint64_t seed = 0;
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::size_t samples = 4;
};

struct TrainResult {
    /// losses[i] is the full-batch inference-mode MSE after i updates, so
    /// there are steps + 1 entries.
    std::vector<double> losses;
    ParamStore params;
};

/// Full-batch Nesterov training of `net` on make_demo_task(net.input, ...).
/// Parameters are initialised from the seed. Throws NumericError naming the
/// step if the loss stops being finite.
TrainResult train_demo(const NetworkTopology& net, const TrainConfig& cfg);

} // namespace spdnn
