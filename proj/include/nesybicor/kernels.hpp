#pragma once

// Forward and backward kernels on plain tensors. The differentiable graph in
// autodiff.hpp wraps these; inference paths call them directly.

#include <cstddef>
#include <vector>

#include "nesybicor/tensor.hpp"

namespace nesybicor::kernels {

/// Cosine similarity returns 0 when either norm is below this.
inline constexpr Real kCosineEpsilon = 1e-12;

std::size_t conv_output_extent(std::size_t input, std::size_t kernel, std::size_t stride, std::size_t padding);

/// input [C,H,W], weights [K,C,h,w] -> [K,H',W'].
Tensor conv2d(const Tensor& input, const Tensor& weights, std::size_t stride, std::size_t padding);

/// Accumulates into grad_input / grad_weights when they are non-null.
void conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_output, std::size_t stride,
                     std::size_t padding, Tensor* grad_input, Tensor* grad_weights);

/// x [K,...] plus bias[k] on every element of channel k.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

Tensor relu(const Tensor& t);

struct PoolResult {
  Tensor output;
  std::vector<std::size_t> argmax;  // flat input index of each output cell
};

/// Non-overlapping window x window max pooling over [K,H,W].
PoolResult maxpool(const Tensor& t, std::size_t window);

/// W [c,d] times x [d] plus b [c].
Tensor dense(const Tensor& x, const Tensor& weights, const Tensor& bias);

/// [C,H,W] -> [C], mean over each channel.
Tensor channel_mean(const Tensor& x);

Tensor softmax(const Tensor& logits);

Real softmax_cross_entropy(const Tensor& logits, std::size_t label);

Real cosine_similarity(const Tensor& u, const Tensor& v);

/// Gradient of cosine_similarity with respect to u (zero inside the epsilon guard).
Tensor cosine_similarity_grad(const Tensor& u, const Tensor& v);

Real sum_squares(const Tensor& t);

}  // namespace nesybicor::kernels
