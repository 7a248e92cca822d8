#include "spdnn/ops.hpp"

#include "spdnn/error.hpp"
#include "spdnn/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace spdnn {

namespace {

void require_rank3(const Tensor& t, const char* what) {
    if (t.rank() != 3)
        throw ShapeError(std::string(what) + " expects a C×H×W tensor, got " +
                         shape_string(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(what) + ": shape " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
}

struct ConvGeometry {
    std::size_t in_c, in_h, in_w, out_c, out_h, out_w, k;
    long pad;
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& weights, Padding padding) {
    require_rank3(input, "conv2d");
    if (weights.rank() != 4 || weights.dim(1) != input.dim(0) || weights.dim(2) != weights.dim(3))
        throw ShapeError("conv2d weights " + shape_string(weights.shape()) +
                         " do not match input " + shape_string(input.shape()));
    ConvGeometry g{};
    g.in_c = input.dim(0);
    g.in_h = input.dim(1);
    g.in_w = input.dim(2);
    g.out_c = weights.dim(0);
    g.k = weights.dim(2);
    if (padding == Padding::Same) {
        if (g.k % 2 == 0) throw ShapeError("same padding requires an odd kernel");
        g.pad = static_cast<long>(g.k / 2);
        g.out_h = g.in_h;
        g.out_w = g.in_w;
    } else {
        if (g.in_h < g.k || g.in_w < g.k)
            throw ShapeError("valid convolution kernel larger than input " +
                             shape_string(input.shape()));
        g.pad = 0;
        g.out_h = g.in_h - g.k + 1;
        g.out_w = g.in_w - g.k + 1;
    }
    return g;
}

// Output columns x for which x + shift stays inside [0, width).
std::pair<long, long> column_range(long shift, long out_w, long width) {
    return {std::max(0L, -shift), std::min(out_w, width - shift)};
}

} // namespace

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias, Padding padding) {
    const auto g = conv_geometry(input, weights, padding);
    if (bias.size() != g.out_c)
        throw ShapeError("conv2d bias has " + std::to_string(bias.size()) + " entries, expected " +
                         std::to_string(g.out_c));
    Tensor out({g.out_c, g.out_h, g.out_w});
    const long H = static_cast<long>(g.in_h), W = static_cast<long>(g.in_w);
    const long OH = static_cast<long>(g.out_h), OW = static_cast<long>(g.out_w);
    const double* in = input.raw();
    const double* w = weights.raw();

    parallel_for(
        g.out_c,
        [&](std::size_t oc) {
            double* plane = out.raw() + oc * g.out_h * g.out_w;
            std::fill(plane, plane + g.out_h * g.out_w, bias[oc]);
            for (std::size_t ic = 0; ic < g.in_c; ++ic) {
                const double* src = in + ic * g.in_h * g.in_w;
                for (std::size_t ky = 0; ky < g.k; ++ky) {
                    for (std::size_t kx = 0; kx < g.k; ++kx) {
                        const double wv = w[((oc * g.in_c + ic) * g.k + ky) * g.k + kx];
                        const long sy = static_cast<long>(ky) - g.pad;
                        const long sx = static_cast<long>(kx) - g.pad;
                        auto [x0, x1] = column_range(sx, OW, W);
                        for (long y = 0; y < OH; ++y) {
                            const long iy = y + sy;
                            if (iy < 0 || iy >= H) continue;
                            double* row = plane + y * OW;
                            const double* srow = src + iy * W;
                            for (long x = x0; x < x1; ++x) row[x] += wv * srow[x + sx];
                        }
                    }
                }
            }
        },
        g.in_c * g.k * g.k * g.out_h * g.out_w);
    return out;
}

ConvGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                          Padding padding) {
    const auto g = conv_geometry(input, weights, padding);
    if (grad_out.shape() != std::vector<std::size_t>{g.out_c, g.out_h, g.out_w})
        throw ShapeError("conv2d gradient shape " + shape_string(grad_out.shape()) +
                         " does not match the forward output");
    const long H = static_cast<long>(g.in_h), W = static_cast<long>(g.in_w);
    const long OH = static_cast<long>(g.out_h), OW = static_cast<long>(g.out_w);
    const double* in = input.raw();
    const double* w = weights.raw();
    const double* dy = grad_out.raw();

    ConvGrads grads{Tensor::zeros_like(input), Tensor::zeros_like(weights),
                    Tensor({g.out_c})};
    const std::size_t work = g.in_c * g.k * g.k * g.out_h * g.out_w;

    parallel_for(
        g.out_c,
        [&](std::size_t oc) {
            const double* dplane = dy + oc * g.out_h * g.out_w;
            double sum = 0.0;
            for (std::size_t i = 0; i < g.out_h * g.out_w; ++i) sum += dplane[i];
            grads.bias[oc] = sum;
            for (std::size_t ic = 0; ic < g.in_c; ++ic) {
                const double* src = in + ic * g.in_h * g.in_w;
                for (std::size_t ky = 0; ky < g.k; ++ky) {
                    for (std::size_t kx = 0; kx < g.k; ++kx) {
                        const long sy = static_cast<long>(ky) - g.pad;
                        const long sx = static_cast<long>(kx) - g.pad;
                        auto [x0, x1] = column_range(sx, OW, W);
                        double acc = 0.0;
                        for (long y = 0; y < OH; ++y) {
                            const long iy = y + sy;
                            if (iy < 0 || iy >= H) continue;
                            const double* drow = dplane + y * OW;
                            const double* srow = src + iy * W;
                            for (long x = x0; x < x1; ++x) acc += drow[x] * srow[x + sx];
                        }
                        grads.weights[((oc * g.in_c + ic) * g.k + ky) * g.k + kx] = acc;
                    }
                }
            }
        },
        work);

    parallel_for(
        g.in_c,
        [&](std::size_t ic) {
            double* dst = grads.input.raw() + ic * g.in_h * g.in_w;
            for (std::size_t oc = 0; oc < g.out_c; ++oc) {
                const double* dplane = dy + oc * g.out_h * g.out_w;
                for (std::size_t ky = 0; ky < g.k; ++ky) {
                    for (std::size_t kx = 0; kx < g.k; ++kx) {
                        const double wv = w[((oc * g.in_c + ic) * g.k + ky) * g.k + kx];
                        const long sy = static_cast<long>(ky) - g.pad;
                        const long sx = static_cast<long>(kx) - g.pad;
                        auto [x0, x1] = column_range(sx, OW, W);
                        for (long y = 0; y < OH; ++y) {
                            const long iy = y + sy;
                            if (iy < 0 || iy >= H) continue;
                            const double* drow = dplane + y * OW;
                            double* row = dst + iy * W;
                            for (long x = x0; x < x1; ++x) row[x + sx] += wv * drow[x];
                        }
                    }
                }
            }
        },
        work);
    return grads;
}

Tensor maxpool(const Tensor& input, int factor, std::vector<std::size_t>* argmax) {
    require_rank3(input, "maxpool");
    const auto f = static_cast<std::size_t>(factor);
    const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
    if (factor < 1 || H % f != 0 || W % f != 0)
        throw ShapeError("maxpool factor " + std::to_string(factor) + " does not divide " +
                         shape_string(input.shape()));
    const std::size_t OH = H / f, OW = W / f;
    Tensor out({C, OH, OW});
    if (argmax) argmax->assign(out.size(), 0);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t oy = 0; oy < OH; ++oy)
            for (std::size_t ox = 0; ox < OW; ++ox) {
                std::size_t best = (c * H + oy * f) * W + ox * f;
                for (std::size_t dy = 0; dy < f; ++dy)
                    for (std::size_t dx = 0; dx < f; ++dx) {
                        std::size_t idx = (c * H + oy * f + dy) * W + ox * f + dx;
                        if (input[idx] > input[best]) best = idx;
                    }
                std::size_t o = (c * OH + oy) * OW + ox;
                out[o] = input[best];
                if (argmax) (*argmax)[o] = best;
            }
    return out;
}

Tensor maxpool_backward(const Tensor& grad_out, const std::vector<std::size_t>& argmax,
                        const std::vector<std::size_t>& input_shape) {
    if (argmax.size() != grad_out.size())
        throw ShapeError("maxpool gradient does not match recorded argmax");
    Tensor grad(input_shape);
    for (std::size_t i = 0; i < argmax.size(); ++i) grad[argmax[i]] += grad_out[i];
    return grad;
}

Tensor unpool(const Tensor& input, int factor) {
    require_rank3(input, "unpool");
    if (factor < 1) throw ShapeError("unpool factor must be positive");
    const auto f = static_cast<std::size_t>(factor);
    const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
    Tensor out({C, H * f, W * f});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < H * f; ++y)
            for (std::size_t x = 0; x < W * f; ++x) out.at(c, y, x) = input.at(c, y / f, x / f);
    return out;
}

Tensor unpool_backward(const Tensor& grad_out, int factor) {
    require_rank3(grad_out, "unpool_backward");
    const auto f = static_cast<std::size_t>(factor);
    const std::size_t C = grad_out.dim(0), H = grad_out.dim(1), W = grad_out.dim(2);
    if (factor < 1 || H % f != 0 || W % f != 0)
        throw ShapeError("unpool gradient not divisible by factor");
    Tensor grad({C, H / f, W / f});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x) grad.at(c, y / f, x / f) += grad_out.at(c, y, x);
    return grad;
}

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    if (weights.rank() != 2 || weights.dim(1) != input.size() || bias.size() != weights.dim(0))
        throw ShapeError("dense weights " + shape_string(weights.shape()) + " / bias " +
                         std::to_string(bias.size()) + " do not match input of " +
                         std::to_string(input.size()) + " elements");
    const std::size_t units = weights.dim(0), n = weights.dim(1);
    Tensor out({units, 1, 1});
    parallel_for(
        units,
        [&](std::size_t u) {
            const double* row = weights.raw() + u * n;
            double acc = bias[u];
            for (std::size_t i = 0; i < n; ++i) acc += row[i] * input[i];
            out[u] = acc;
        },
        n);
    return out;
}

DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out) {
    const std::size_t units = weights.dim(0), n = weights.dim(1);
    if (grad_out.size() != units || input.size() != n)
        throw ShapeError("dense gradient shape mismatch");
    DenseGrads g{Tensor::zeros_like(input), Tensor::zeros_like(weights), Tensor({units})};
    for (std::size_t u = 0; u < units; ++u) {
        g.bias[u] = grad_out[u];
        double* wrow = g.weights.raw() + u * n;
        for (std::size_t i = 0; i < n; ++i) wrow[i] = grad_out[u] * input[i];
    }
    parallel_for(
        n,
        [&](std::size_t i) {
            double acc = 0.0;
            for (std::size_t u = 0; u < units; ++u) acc += weights[u * n + i] * grad_out[u];
            g.input[i] = acc;
        },
        units);
    return g;
}

Tensor batchnorm_affine(const Tensor& input, const Tensor& gamma, const Tensor& beta) {
    require_rank3(input, "batchnorm");
    const std::size_t C = input.dim(0), plane = input.dim(1) * input.dim(2);
    if (gamma.size() != C || beta.size() != C)
        throw ShapeError("batchnorm parameters do not match " + std::to_string(C) + " channels");
    Tensor out = Tensor::zeros_like(input);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < plane; ++i)
            out[c * plane + i] = input[c * plane + i] * gamma[c] + beta[c];
    return out;
}

BatchNormGrads batchnorm_affine_backward(const Tensor& input, const Tensor& gamma,
                                         const Tensor& grad_out) {
    require_same_shape(input, grad_out, "batchnorm_backward");
    const std::size_t C = input.dim(0), plane = input.dim(1) * input.dim(2);
    BatchNormGrads g{Tensor::zeros_like(input), Tensor({C}), Tensor({C})};
    for (std::size_t c = 0; c < C; ++c) {
        double dg = 0.0, db = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            const std::size_t k = c * plane + i;
            dg += grad_out[k] * input[k];
            db += grad_out[k];
            g.input[k] = grad_out[k] * gamma[c];
        }
        g.gamma[c] = dg;
        g.beta[c] = db;
    }
    return g;
}

double sigmoid(double x) noexcept {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Tensor relu(const Tensor& x) {
    Tensor out = x;
    for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
    return out;
}

Tensor sigmoid(const Tensor& x) {
    Tensor out = x;
    for (auto& v : out.data()) v = sigmoid(v);
    return out;
}

Tensor activate(const Tensor& x, Activation a) {
    switch (a) {
    case Activation::ReLU: return relu(x);
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::None: break;
    }
    return x;
}

Tensor activate_backward(const Tensor& output, const Tensor& grad_out, Activation a) {
    require_same_shape(output, grad_out, "activation backward");
    Tensor g = grad_out;
    switch (a) {
    case Activation::ReLU:
        for (std::size_t i = 0; i < g.size(); ++i)
            if (!(output[i] > 0.0)) g[i] = 0.0;
        break;
    case Activation::Sigmoid:
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= output[i] * (1.0 - output[i]);
        break;
    case Activation::None: break;
    }
    return g;
}

Tensor dropout_mask(const std::vector<std::size_t>& shape, double rate, std::uint64_t seed) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ValidationError("dropout rate must lie in [0,1)");
    Tensor mask(shape, 1.0);
    if (rate == 0.0) return mask;
    std::mt19937_64 gen(seed);
    const double keep = 1.0 / (1.0 - rate);
    for (auto& v : mask.data()) {
        const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
        v = u < rate ? 0.0 : keep;
    }
    return mask;
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat of zero tensors");
    std::size_t channels = 0;
    for (const auto& p : parts) {
        require_rank3(p, "concat");
        if (p.dim(1) != parts.front().dim(1) || p.dim(2) != parts.front().dim(2))
            throw ShapeError("concat spatial mismatch: " + shape_string(p.shape()) + " vs " +
                             shape_string(parts.front().shape()));
        channels += p.dim(0);
    }
    Tensor out({channels, parts.front().dim(1), parts.front().dim(2)});
    std::size_t offset = 0;
    for (const auto& p : parts) {
        std::copy(p.data().begin(), p.data().end(), out.data().begin() + static_cast<long>(offset));
        offset += p.size();
    }
    return out;
}

std::vector<Tensor> split_channels(const Tensor& t, const std::vector<std::size_t>& channels) {
    require_rank3(t, "split");
    std::vector<Tensor> parts;
    const std::size_t plane = t.dim(1) * t.dim(2);
    std::size_t offset = 0;
    for (auto c : channels) {
        Tensor p({c, t.dim(1), t.dim(2)});
        if (offset + c * plane > t.size()) throw ShapeError("split exceeds tensor channels");
        std::copy_n(t.data().begin() + static_cast<long>(offset), c * plane, p.data().begin());
        offset += c * plane;
        parts.push_back(std::move(p));
    }
    if (offset != t.size()) throw ShapeError("split does not cover every channel");
    return parts;
}

double mse_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "mse_loss");
    if (pred.size() == 0) throw ShapeError("mse_loss of empty tensors");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

Tensor mse_loss_grad(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "mse_loss_grad");
    Tensor g = Tensor::zeros_like(pred);
    const double scale = 2.0 / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) g[i] = scale * (pred[i] - target[i]);
    return g;
}

} // namespace spdnn
