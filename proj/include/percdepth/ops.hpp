#pragma once

#include <string>
#include <vector>

#include "percdepth/tensor.hpp"

// Batched NCHW kernels with TensorFlow "same" padding semantics.
namespace percdepth::ops {

enum class Activation { linear, relu, elu, leaky_relu, tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

inline constexpr Real kLeakySlope = Real(0.2);
inline constexpr Real kEluAlpha = Real(1.0);
inline constexpr Real kNormEps = Real(1e-5);

struct Padding {
  int out = 0;
  int before = 0;  // zero rows/cols added before the first input element
};

// out = ceil(in / stride); total padding split floor-before, remainder after.
Padding same_padding(int in, int kernel, int stride);

// weight: [cout, cin, k, k]; bias: cout entries or empty.
Tensor conv2d(const Tensor& x, const Tensor& weight, std::span<const Real> bias, int stride);
// Gradient w.r.t. the convolution input.
Tensor conv2d_backward_data(const Tensor& grad_out, const Tensor& weight, const Shape& x_shape,
                            int stride);
// Accumulates weight (and, if non-empty, bias) gradients.
void conv2d_backward_params(const Tensor& x, const Tensor& grad_out, int stride,
                            Tensor& grad_weight, std::span<Real> grad_bias);

Tensor activate(const Tensor& x, Activation a);
// grad_in = grad_out * act'(x); `y` is activate(x, a).
Tensor activate_backward(const Tensor& x, const Tensor& y, const Tensor& grad_out, Activation a);
// True for activations whose derivative is piecewise constant.
bool is_piecewise_linear(Activation a);

struct NormStats {
  std::vector<Real> mean;
  std::vector<Real> inv_std;
};

// Per-sample, per-channel normalization followed by scale/shift.
Tensor instance_norm(const Tensor& x, std::span<const Real> scale, std::span<const Real> shift,
                     NormStats* stats);
Tensor instance_norm_backward(const Tensor& x, const NormStats& stats,
                              std::span<const Real> scale, const Tensor& grad_out,
                              std::span<Real> grad_scale, std::span<Real> grad_shift);

// 3x3 stride 2 max pooling by default; padded cells never win.
Tensor max_pool(const Tensor& x, int kernel, int stride, std::vector<int>* argmax);
Tensor max_pool_backward(const Shape& x_shape, const std::vector<int>& argmax,
                         const Tensor& grad_out);

Tensor upsample_nearest(const Tensor& x, int factor);
Tensor upsample_nearest_backward(const Tensor& grad_out, int factor);

Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& grad, int channels_a, Tensor& grad_a, Tensor& grad_b);

}  // namespace percdepth::ops
