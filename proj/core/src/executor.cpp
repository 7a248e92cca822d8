#include "spdnn/executor.hpp"

#include "spdnn/error.hpp"
#include "spdnn/ops.hpp"

#include <cmath>
#include <random>
#include <unordered_map>

namespace spdnn {

namespace {

std::vector<std::size_t> dims(const Shape3& s) {
    return {static_cast<std::size_t>(s.channels), static_cast<std::size_t>(s.height),
            static_cast<std::size_t>(s.width)};
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// How one concat input is resized before joining: factor 1 is identity,
// otherwise maxpool (down) or unpool (up) by the factor.
struct ConcatAlign {
    Align align = Align::Up;
    std::vector<int> factors;
};

ConcatAlign plan_concat(const Node& n, const std::vector<Shape3>& ins) {
    const auto& spec = std::get<ConcatSpec>(n.spec);
    const auto out = layer_output_shape(n, ins); // validates the ratios
    ConcatAlign plan{spec.align, {}};
    for (const auto& s : ins)
        plan.factors.push_back(static_cast<int>(spec.align == Align::Up ? out.height / s.height
                                                                        : s.height / out.height));
    return plan;
}

struct NodeTrace {
    std::vector<std::size_t> inputs; // indices into the trace; npos = network input
    Tensor output;
    Tensor pre_norm;      // conv output before batch norm
    Tensor activated;     // dense output before dropout
    Tensor mask;          // dropout mask, training mode only
    std::vector<std::size_t> argmax;
    std::vector<std::vector<std::size_t>> concat_argmax;
    ConcatAlign concat;
};

constexpr std::size_t kNetworkInput = static_cast<std::size_t>(-1);

class Run {
public:
    Run(const NetworkTopology& net, const ParamStore& params, const RunOptions& options)
        : net_(canonical_order(net)), params_(params), options_(options) {
        for (std::size_t i = 0; i < net_.nodes.size(); ++i) index_.emplace(net_.nodes[i].id, i);
    }

    const Tensor& forward(const Tensor& input) {
        if (input.rank() != 3 || input.shape3() != net_.input)
            throw ShapeError("input tensor " + shape_string(input.shape()) +
                             " does not match network input " + to_string(net_.input));
        input_ = &input;
        trace_.assign(net_.nodes.size(), {});
        for (std::size_t i = 0; i < net_.nodes.size(); ++i) step(i);
        return trace_[index_.at(net_.output_node().id)].output;
    }

    ParamStore backward(const Tensor& grad_output) {
        ParamStore grads;
        for (const auto& [name, t] : params_) grads.emplace(name, Tensor::zeros_like(t));
        std::vector<Tensor> grad(net_.nodes.size());
        grad[index_.at(net_.output_node().id)] = grad_output;
        for (std::size_t i = net_.nodes.size(); i-- > 0;) {
            if (grad[i].size() == 0) continue; // no downstream consumer reached
            back(i, grad, grads);
        }
        return grads;
    }

private:
    const Tensor& param(const std::string& node, const char* what) const {
        auto it = params_.find(node + "/" + what);
        if (it == params_.end())
            throw ValidationError(std::string("missing parameter '") + what + "'", node);
        return it->second;
    }

    const Tensor& value(std::size_t idx) const {
        return idx == kNetworkInput ? *input_ : trace_[idx].output;
    }

    void step(std::size_t i) {
        const Node& n = net_.nodes[i];
        NodeTrace& t = trace_[i];
        for (const auto& in : n.inputs)
            t.inputs.push_back(in == kInputId ? kNetworkInput : index_.at(in));
        const Tensor& x = value(t.inputs.front());

        std::visit(
            [&](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, ConvSpec>) {
                    Tensor z = conv2d(x, param(n.id, "weight"), param(n.id, "bias"), s.padding);
                    if (s.batch_norm) {
                        t.pre_norm = std::move(z);
                        z = batchnorm_affine(t.pre_norm, param(n.id, "gamma"), param(n.id, "beta"));
                    }
                    t.output = activate(z, s.activation);
                } else if constexpr (std::is_same_v<T, DenseSpec>) {
                    Tensor a = activate(dense(x, param(n.id, "weight"), param(n.id, "bias")),
                                        s.activation);
                    if (options_.mode == Mode::Training && s.dropout > 0.0) {
                        t.mask = dropout_mask(a.shape(), s.dropout,
                                              splitmix64(options_.dropout_seed ^ splitmix64(i)));
                        t.activated = a;
                        for (std::size_t k = 0; k < a.size(); ++k) a[k] *= t.mask[k];
                    }
                    t.output = std::move(a);
                } else if constexpr (std::is_same_v<T, MaxPoolSpec>) {
                    t.output = maxpool(x, s.factor, &t.argmax);
                } else if constexpr (std::is_same_v<T, UnpoolSpec>) {
                    t.output = unpool(x, s.factor);
                } else if constexpr (std::is_same_v<T, ConcatSpec>) {
                    std::vector<Shape3> shapes;
                    for (auto idx : t.inputs) shapes.push_back(value(idx).shape3());
                    t.concat = plan_concat(n, shapes);
                    t.concat_argmax.resize(t.inputs.size());
                    std::vector<Tensor> parts;
                    for (std::size_t k = 0; k < t.inputs.size(); ++k) {
                        const Tensor& v = value(t.inputs[k]);
                        const int f = t.concat.factors[k];
                        if (f == 1) parts.push_back(v);
                        else if (t.concat.align == Align::Up) parts.push_back(unpool(v, f));
                        else parts.push_back(maxpool(v, f, &t.concat_argmax[k]));
                    }
                    t.output = concat_channels(parts);
                } else if constexpr (std::is_same_v<T, ReshapeSpec>) {
                    if (static_cast<std::int64_t>(x.size()) != s.target.elements())
                        throw ShapeError("reshape element count mismatch", n.id);
                    t.output = x.reshaped(dims(s.target));
                } else {
                    t.output = x;
                }
            },
            n.spec);
    }

    void accumulate(std::vector<Tensor>& grad, std::size_t idx, Tensor g) {
        if (idx == kNetworkInput) return;
        if (grad[idx].size() == 0) {
            grad[idx] = std::move(g);
            return;
        }
        for (std::size_t k = 0; k < g.size(); ++k) grad[idx][k] += g[k];
    }

    void back(std::size_t i, std::vector<Tensor>& grad, ParamStore& grads) {
        const Node& n = net_.nodes[i];
        NodeTrace& t = trace_[i];
        Tensor g = std::move(grad[i]);
        const Tensor& x = value(t.inputs.front());

        std::visit(
            [&](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, ConvSpec>) {
                    Tensor dz = activate_backward(t.output, g, s.activation);
                    if (s.batch_norm) {
                        auto bn = batchnorm_affine_backward(t.pre_norm, param(n.id, "gamma"), dz);
                        grads.at(n.id + "/gamma") = std::move(bn.gamma);
                        grads.at(n.id + "/beta") = std::move(bn.beta);
                        dz = std::move(bn.input);
                    }
                    auto cg = conv2d_backward(x, param(n.id, "weight"), dz, s.padding);
                    grads.at(n.id + "/weight") = std::move(cg.weights);
                    grads.at(n.id + "/bias") = std::move(cg.bias);
                    accumulate(grad, t.inputs.front(), std::move(cg.input));
                } else if constexpr (std::is_same_v<T, DenseSpec>) {
                    const Tensor* activated = &t.output;
                    if (t.mask.size() != 0) {
                        for (std::size_t k = 0; k < g.size(); ++k) g[k] *= t.mask[k];
                        activated = &t.activated;
                    }
                    Tensor dz = activate_backward(*activated, g, s.activation);
                    auto dg = dense_backward(x, param(n.id, "weight"), dz);
                    grads.at(n.id + "/weight") = std::move(dg.weights);
                    grads.at(n.id + "/bias") = std::move(dg.bias);
                    accumulate(grad, t.inputs.front(), std::move(dg.input));
                } else if constexpr (std::is_same_v<T, MaxPoolSpec>) {
                    accumulate(grad, t.inputs.front(), maxpool_backward(g, t.argmax, x.shape()));
                } else if constexpr (std::is_same_v<T, UnpoolSpec>) {
                    accumulate(grad, t.inputs.front(), unpool_backward(g, s.factor));
                } else if constexpr (std::is_same_v<T, ConcatSpec>) {
                    std::vector<std::size_t> channels;
                    for (auto idx : t.inputs) channels.push_back(value(idx).dim(0));
                    auto parts = split_channels(g, channels);
                    for (std::size_t k = 0; k < parts.size(); ++k) {
                        const int f = t.concat.factors[k];
                        const Tensor& v = value(t.inputs[k]);
                        if (f == 1) accumulate(grad, t.inputs[k], std::move(parts[k]));
                        else if (t.concat.align == Align::Up)
                            accumulate(grad, t.inputs[k], unpool_backward(parts[k], f));
                        else
                            accumulate(grad, t.inputs[k],
                                       maxpool_backward(parts[k], t.concat_argmax[k], v.shape()));
                    }
                } else if constexpr (std::is_same_v<T, ReshapeSpec>) {
                    accumulate(grad, t.inputs.front(), g.reshaped(x.shape()));
                } else {
                    accumulate(grad, t.inputs.front(), std::move(g));
                }
            },
            n.spec);
    }

    NetworkTopology net_;
    const ParamStore& params_;
    RunOptions options_;
    std::unordered_map<std::string, std::size_t> index_;
    const Tensor* input_ = nullptr;
    std::vector<NodeTrace> trace_;
};

} // namespace

std::vector<ParamSpec> param_layout(const NetworkTopology& net) {
    auto ordered = canonical_order(net);
    auto shapes = infer_shapes(ordered);
    std::unordered_map<std::string, Shape3> out{{std::string(kInputId), net.input}};
    for (const auto& [id, s] : shapes.entries()) out.emplace(id, s);

    std::vector<ParamSpec> layout;
    for (const auto& n : ordered.nodes) {
        const Shape3& in = out.at(n.inputs.front());
        if (const auto* c = std::get_if<ConvSpec>(&n.spec)) {
            const auto k = static_cast<std::size_t>(c->kernel);
            const auto co = static_cast<std::size_t>(c->channels);
            layout.push_back({n.id + "/weight", {co, static_cast<std::size_t>(in.channels), k, k}});
            layout.push_back({n.id + "/bias", {co}});
            if (c->batch_norm) {
                layout.push_back({n.id + "/gamma", {co}});
                layout.push_back({n.id + "/beta", {co}});
            }
        } else if (const auto* d = std::get_if<DenseSpec>(&n.spec)) {
            const auto u = static_cast<std::size_t>(d->units);
            layout.push_back({n.id + "/weight", {u, static_cast<std::size_t>(in.elements())}});
            layout.push_back({n.id + "/bias", {u}});
        }
    }
    return layout;
}

ParamStore init_params(const NetworkTopology& net, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    ParamStore params;
    for (const auto& p : param_layout(net)) {
        Tensor t(p.shape);
        const auto suffix = p.name.substr(p.name.rfind('/') + 1);
        if (suffix == "weight") {
            double fan_in = 0, fan_out = 0;
            if (p.shape.size() == 4) {
                const double area = static_cast<double>(p.shape[2] * p.shape[3]);
                fan_in = static_cast<double>(p.shape[1]) * area;
                fan_out = static_cast<double>(p.shape[0]) * area;
            } else {
                fan_in = static_cast<double>(p.shape[1]);
                fan_out = static_cast<double>(p.shape[0]);
            }
            const double limit = std::sqrt(6.0 / (fan_in + fan_out));
            for (auto& v : t.data()) {
                const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
                v = (2.0 * u - 1.0) * limit;
            }
        } else if (suffix == "gamma") {
            for (auto& v : t.data()) v = 1.0;
        }
        params.emplace(p.name, std::move(t));
    }
    return params;
}

void check_params(const NetworkTopology& net, const ParamStore& params) {
    auto layout = param_layout(net);
    for (const auto& p : layout) {
        auto it = params.find(p.name);
        if (it == params.end()) throw ValidationError("missing parameter '" + p.name + "'");
        if (it->second.shape() != p.shape)
            throw ValidationError("parameter '" + p.name + "' has shape " +
                                  shape_string(it->second.shape()) + ", expected " +
                                  shape_string(p.shape));
    }
    if (params.size() != layout.size())
        throw ValidationError("parameter set has " + std::to_string(params.size()) +
                              " tensors, network expects " + std::to_string(layout.size()));
}

Tensor forward(const NetworkTopology& net, const ParamStore& params, const Tensor& input,
               const RunOptions& options) {
    Run run(net, params, options);
    return run.forward(input);
}

BackwardResult backward(const NetworkTopology& net, const ParamStore& params, const Tensor& input,
                        const Tensor& target, const RunOptions& options) {
    Run run(net, params, options);
    BackwardResult r;
    r.output = run.forward(input);
    r.loss = mse_loss(r.output, target);
    r.grads = run.backward(mse_loss_grad(r.output, target));
    return r;
}

ParamStore zeros_like(const ParamStore& params) {
    ParamStore z;
    for (const auto& [name, t] : params) z.emplace(name, Tensor::zeros_like(t));
    return z;
}

} // namespace spdnn
