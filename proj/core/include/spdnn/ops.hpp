#pragma once

// Forward and backward kernels for the layers the executor supports. All
// spatial tensors are C x H x W; nothing here allocates parameters.

#include "spdnn/tensor.hpp"
#include "spdnn/topology.hpp"

#include <cstdint>
#include <vector>

namespace spdnn {

/// Cross-correlation of `input` (C x H x W) with `weights` (C' x C x k x k)
/// plus a per-output-channel bias. Same padding zero-pads by k/2 and keeps
/// H x W; Valid gives (H-k+1) x (W-k+1).
Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias, Padding padding);

struct ConvGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};

ConvGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                          Padding padding);

/// Max over non-overlapping f x f windows. `argmax`, when given, receives the
/// flat input index chosen for every output element; ties go to the first
/// element in row-major window order.
Tensor maxpool(const Tensor& input, int factor, std::vector<std::size_t>* argmax = nullptr);

Tensor maxpool_backward(const Tensor& grad_out, const std::vector<std::size_t>& argmax,
                        const std::vector<std::size_t>& input_shape);

/// Value-repeating unpooling: every element becomes an f x f block.
Tensor unpool(const Tensor& input, int factor);

/// Sums every f x f block of the gradient back onto its source element.
Tensor unpool_backward(const Tensor& grad_out, int factor);

/// weights (units x n) times the flattened input, plus bias. Output shape is
/// units x 1 x 1.
Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias);

struct DenseGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};

DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out);

/// Per-channel x * gamma[c] + beta[c].
Tensor batchnorm_affine(const Tensor& input, const Tensor& gamma, const Tensor& beta);

struct BatchNormGrads {
    Tensor input;
    Tensor gamma;
    Tensor beta;
};

BatchNormGrads batchnorm_affine_backward(const Tensor& input, const Tensor& gamma,
                                         const Tensor& grad_out);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
double sigmoid(double x) noexcept;

/// Applies `a` elementwise.
Tensor activate(const Tensor& x, Activation a);

/// Gradient through the activation, expressed in terms of its output.
Tensor activate_backward(const Tensor& output, const Tensor& grad_out, Activation a);

/// Inverted-dropout mask: each entry is 0 with probability `rate` and
/// 1/(1-rate) otherwise. Deterministic for a given seed.
Tensor dropout_mask(const std::vector<std::size_t>& shape, double rate, std::uint64_t seed);

/// Channel-wise concatenation of C_i x H x W tensors.
Tensor concat_channels(const std::vector<Tensor>& parts);

/// Inverse of concat_channels for gradients.
std::vector<Tensor> split_channels(const Tensor& t, const std::vector<std::size_t>& channels);

/// Mean of squared differences.
double mse_loss(const Tensor& pred, const Tensor& target);

/// d mse / d pred = 2 (pred - target) / N.
Tensor mse_loss_grad(const Tensor& pred, const Tensor& target);

} // namespace spdnn
