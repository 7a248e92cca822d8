#include "spdnn/train.hpp"

#include "spdnn/error.hpp"
#include "spdnn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace spdnn {

namespace {

double uniform(std::mt19937_64& gen, double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(gen() >> 11) * 0x1.0p-53);
}

void normalize(Tensor& t) {
    auto [lo, hi] = std::minmax_element(t.data().begin(), t.data().end());
    const double a = *lo, span = *hi - *lo;
    for (auto& v : t.data()) v = span > 0 ? (v - a) / span : 0.5;
}

Tensor box_blur(const Tensor& x, long radius) {
    Tensor out = Tensor::zeros_like(x);
    const long C = static_cast<long>(x.dim(0)), H = static_cast<long>(x.dim(1)),
               W = static_cast<long>(x.dim(2));
    for (long c = 0; c < C; ++c)
        for (long y = 0; y < H; ++y)
            for (long xx = 0; xx < W; ++xx) {
                double acc = 0;
                int count = 0;
                for (long dy = -radius; dy <= radius; ++dy)
                    for (long dx = -radius; dx <= radius; ++dx) {
                        const long yy = y + dy, xc = xx + dx;
                        if (yy < 0 || yy >= H || xc < 0 || xc >= W) continue;
                        acc += x.at(static_cast<std::size_t>(c), static_cast<std::size_t>(yy),
                                    static_cast<std::size_t>(xc));
                        ++count;
                    }
                out.at(static_cast<std::size_t>(c), static_cast<std::size_t>(y),
                       static_cast<std::size_t>(xx)) = acc / count;
            }
    return out;
}

} // namespace

DemoTask make_demo_task(const Shape3& shape, std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    DemoTask task;
    const double H = static_cast<double>(shape.height), W = static_cast<double>(shape.width);
    for (std::size_t s = 0; s < samples; ++s) {
        Tensor x = Tensor::of(shape);
        for (std::int64_t c = 0; c < shape.channels; ++c) {
            // A tilted plane plus three Gaussian blobs.
            const double gy = uniform(gen, -0.5, 0.5), gx = uniform(gen, -0.5, 0.5);
            struct Blob { double cy, cx, sigma, amp; };
            std::vector<Blob> blobs;
            for (int b = 0; b < 3; ++b)
                blobs.push_back({uniform(gen, 0, H), uniform(gen, 0, W),
                                 uniform(gen, 0.12, 0.35) * std::min(H, W), uniform(gen, 0.3, 1.0)});
            for (std::int64_t y = 0; y < shape.height; ++y)
                for (std::int64_t xx = 0; xx < shape.width; ++xx) {
                    double v = gy * static_cast<double>(y) / H + gx * static_cast<double>(xx) / W;
                    for (const auto& b : blobs) {
                        const double dy = static_cast<double>(y) - b.cy,
                                     dx = static_cast<double>(xx) - b.cx;
                        v += b.amp * std::exp(-(dy * dy + dx * dx) / (2 * b.sigma * b.sigma));
                    }
                    x.at(static_cast<std::size_t>(c), static_cast<std::size_t>(y),
                         static_cast<std::size_t>(xx)) = v;
                }
        }
        normalize(x);
        Tensor t = box_blur(x, 2);
        for (auto& v : t.data()) v = 1.0 - v;
        normalize(t);
        // Targets keep a single channel: the mean over input channels.
        Tensor target({1, x.dim(1), x.dim(2)});
        const std::size_t plane = x.dim(1) * x.dim(2);
        for (std::size_t c = 0; c < x.dim(0); ++c)
            for (std::size_t i = 0; i < plane; ++i)
                target[i] += t[c * plane + i] / static_cast<double>(x.dim(0));
        task.inputs.push_back(std::move(x));
        task.targets.push_back(std::move(target));
    }
    return task;
}

TrainResult train_demo(const NetworkTopology& net, const TrainConfig& cfg) {
    const auto shapes = infer_shapes(net);
    const auto& out_shape = shapes.at(net.output_node().id);
    if (out_shape != Shape3{1, net.input.height, net.input.width})
        throw ShapeError("training demo needs a 1×H×W output, network produces " +
                         to_string(out_shape));
    if (cfg.samples == 0) throw ValidationError("training demo needs at least one sample");

    const auto task = make_demo_task(net.input, cfg.samples, cfg.seed);
    TrainResult result;
    result.params = init_params(net, cfg.seed);
    OptimizerConfig opt{cfg.learning_rate, cfg.momentum, {}};
    const double n = static_cast<double>(cfg.samples);

    auto batch_loss = [&](const ParamStore& p) {
        double loss = 0;
        for (std::size_t s = 0; s < cfg.samples; ++s)
            loss += mse_loss(forward(net, p, task.inputs[s]), task.targets[s]);
        return loss / n;
    };
    auto record = [&](std::size_t step) {
        const double loss = batch_loss(result.params);
        if (!std::isfinite(loss))
            throw NumericError("training diverged at step " + std::to_string(step) +
                               " (loss is not finite)");
        result.losses.push_back(loss);
    };

    record(0);
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        const ParamStore ahead = lookahead(result.params, opt);
        ParamStore grads = zeros_like(result.params);
        for (std::size_t s = 0; s < cfg.samples; ++s) {
            RunOptions run{Mode::Training, cfg.seed * 1000003ULL + step * 131ULL + s};
            auto r = backward(net, ahead, task.inputs[s], task.targets[s], run);
            for (auto& [name, g] : grads) {
                const Tensor& gs = r.grads.at(name);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += gs[i] / n;
            }
        }
        nesterov_step(result.params, grads, opt);
        record(step + 1);
    }
    return result;
}

} // namespace spdnn
