#pragma once

// Convolution and pointwise kernels used by the network.
//
// The production kernels split work into fixed pixel chunks (independent of
// the thread count) and run them under OpenMP; every output element is
// produced by exactly one chunk with a fixed summation order, so results
// are bit-identical for any number of threads. Weight-gradient partials are
// reduced in chunk order. The `reference` namespace holds plain serial loop
// versions used as test oracles and benchmark baselines.
//
// Convolutions are stride 1, "same" padding (k/2 zeros), odd kernel size.
// Weights are [out][in][k][k], biases [out].

#include <span>

#include "dmgnet/tensor.hpp"

namespace dmgnet::kernels {

template <typename T>
void conv2d_forward(const Tensor<T>& in, std::span<const T> weight, std::span<const T> bias, int out_channels,
                    int ksize, Tensor<T>& out);

/// Accumulates into dweight/dbias; overwrites *din when non-null.
template <typename T>
void conv2d_backward(const Tensor<T>& in, std::span<const T> weight, const Tensor<T>& dout, int ksize,
                     std::span<T> dweight, std::span<T> dbias, Tensor<T>* din);

template <typename T>
void avg_pool2_forward(const Tensor<T>& in, Tensor<T>& out);
template <typename T>
void avg_pool2_backward(const Tensor<T>& dout, Tensor<T>& din);

template <typename T>
void upsample2_forward(const Tensor<T>& in, Tensor<T>& out);
/// Overwrites din (half resolution) with the sum of the four children.
template <typename T>
void upsample2_backward(const Tensor<T>& dout, Tensor<T>& din);

/// x * sigmoid(x)
template <typename T>
void silu_forward(const Tensor<T>& in, Tensor<T>& out);
/// dx = dy * d/dx silu(x), using the saved pre-activation x.
template <typename T>
void silu_backward(const Tensor<T>& pre, const Tensor<T>& dout, Tensor<T>& din);

template <typename T>
void sigmoid_forward(const Tensor<T>& in, Tensor<T>& out);

/// Channel concatenation [a; b] and its split.
template <typename T>
void concat_channels(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& out);
template <typename T>
void split_channels(const Tensor<T>& in, int first_channels, Tensor<T>& a, Tensor<T>& b);

namespace reference {

template <typename T>
void conv2d_forward(const Tensor<T>& in, std::span<const T> weight, std::span<const T> bias, int out_channels,
                    int ksize, Tensor<T>& out);

template <typename T>
void conv2d_backward(const Tensor<T>& in, std::span<const T> weight, const Tensor<T>& dout, int ksize,
                     std::span<T> dweight, std::span<T> dbias, Tensor<T>* din);

}  // namespace reference

}  // namespace dmgnet::kernels
