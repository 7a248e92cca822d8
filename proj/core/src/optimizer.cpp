#include "spdnn/optimizer.hpp"

#include "spdnn/error.hpp"

namespace spdnn {

namespace {

void check_config(const OptimizerConfig& cfg) {
    if (!(cfg.learning_rate >= 0.0)) throw ValidationError("learning rate must be non-negative");
    if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0))
        throw ValidationError("momentum must lie in [0,1)");
}

} // namespace

ParamStore lookahead(const ParamStore& params, const OptimizerConfig& cfg) {
    ParamStore ahead = params;
    if (cfg.velocity.empty() || cfg.momentum == 0.0) return ahead;
    for (auto& [name, t] : ahead) {
        const Tensor& v = cfg.velocity.at(name);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] += cfg.momentum * v[i];
    }
    return ahead;
}

void nesterov_step(ParamStore& params, const ParamStore& grads_at_lookahead, OptimizerConfig& cfg) {
    check_config(cfg);
    if (cfg.velocity.empty()) cfg.velocity = zeros_like(params);
    for (auto& [name, theta] : params) {
        auto g = grads_at_lookahead.find(name);
        auto v = cfg.velocity.find(name);
        if (g == grads_at_lookahead.end() || v == cfg.velocity.end())
            throw ValidationError("no gradient or velocity for parameter '" + name + "'");
        if (g->second.shape() != theta.shape() || v->second.shape() != theta.shape())
            throw ShapeError("gradient/velocity shape mismatch for parameter '" + name + "'");
        for (std::size_t i = 0; i < theta.size(); ++i) {
            v->second[i] = cfg.momentum * v->second[i] - cfg.learning_rate * g->second[i];
            theta[i] += v->second[i];
        }
    }
}

} // namespace spdnn
