#pragma once

#include "spdnn/executor.hpp"

namespace spdnn {

/// Nesterov momentum in the lookahead form:
///   v <- momentum * v - learning_rate * grad(theta + momentum * v)
///   theta <- theta + v
struct OptimizerConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    ParamStore velocity; // filled with zeros on first use
};

/// theta + momentum * v, the point at which the gradient for the next step
/// has to be evaluated.
ParamStore lookahead(const ParamStore& params, const OptimizerConfig& cfg);

/// Applies one update in place given gradients taken at `lookahead(params)`.
void nesterov_step(ParamStore& params, const ParamStore& grads_at_lookahead, OptimizerConfig& cfg);

} // namespace spdnn
