#pragma once

#include <vector>

#include "percdepth/tensor.hpp"

// Deterministic structure-only view of an RGB image: grayscale, brightness
// adaptive gamma, then a Gaussian high-pass in the Fourier domain.
namespace percdepth::filters {

// Channel weights applied to [0,255] input; the result is divided by 255.
// The blue weight 0.144 deliberately differs from BT.601 (0.114).
struct GrayWeights {
  double r = 0.299;
  double g = 0.587;
  double b = 0.144;

  void validate() const;
};

struct FilterConfig {
  double sigma = 4.0;
  double mean_clamp_eps = 1e-3;
  GrayWeights weights{};

  void validate() const;
};

// [n,3,h,w] in [0,255] -> [n,1,h,w].
Tensor to_grayscale(const Tensor& rgb, const GrayWeights& w = {});

// Gamma exponent -0.3 * 2.303 / ln(mean), mean clamped to [eps, 1 - eps].
double gamma_exponent(double mean_gray, double mean_clamp_eps = 1e-3);

// Per image: clamp to [0,1], then raise to gamma_exponent(mean of the clamped image).
Tensor auto_gamma(const Tensor& gray, double mean_clamp_eps = 1e-3);

// Row-major d1 x d2 matrix 1 - exp(-|(i,j) - (d1/2, d2/2)|^2 / (2 sigma^2)).
std::vector<double> gaussian_highpass_mask(int d1, int d2, double sigma);

// Re(IFFT(ishift(shift(FFT(x)) * H))) per channel plane. Unnormalized forward
// transform, 1/(d1 d2) on the inverse.
Tensor highpass_filter(const Tensor& img, double sigma);

// highpass_filter(auto_gamma(to_grayscale(rgb))).
Tensor psi(const Tensor& rgb, const FilterConfig& cfg = {});

// Vector-Jacobian product of psi at `rgb`: returns d<grad_out, psi(rgb)>/d rgb.
// The high-pass stage is self-adjoint for real inputs, so its adjoint reuses
// highpass_filter.
Tensor psi_backward(const Tensor& rgb, const Tensor& grad_out, const FilterConfig& cfg = {});

}  // namespace percdepth::filters
