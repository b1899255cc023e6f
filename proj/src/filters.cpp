#include "percdepth/filters.hpp"

#include <cmath>
#include <complex>

#include "fft.hpp"

namespace percdepth::filters {
namespace {

constexpr double kGammaNumerator = -0.3 * 2.303;

// Pixels this dark get their gamma derivative evaluated at the floor;
// c^(gamma-1) diverges at 0 when gamma < 1.
constexpr double kDerivativeFloor = 1e-4;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void check_eps(double eps) {
  if (!(eps > 0.0 && eps < 0.5)) {
    throw ParameterError("mean_clamp_eps must lie in (0, 0.5), got " + std::to_string(eps));
  }
}

}  // namespace

void GrayWeights::validate() const {
  if (r < 0 || g < 0 || b < 0) throw ParameterError("grayscale weights must be non-negative");
}

void FilterConfig::validate() const {
  if (!(sigma > 0)) throw ParameterError("sigma must be positive");
  check_eps(mean_clamp_eps);
  weights.validate();
}

Tensor to_grayscale(const Tensor& rgb, const GrayWeights& w) {
  if (rgb.c() != 3) {
    throw ShapeError("to_grayscale expects 3 channels, got " + std::to_string(rgb.c()));
  }
  w.validate();
  Tensor out(rgb.n(), 1, rgb.h(), rgb.w());
  const std::size_t plane = rgb.shape().plane();
  for (int i = 0; i < rgb.n(); ++i) {
    const Real* r = rgb.plane(i, 0);
    const Real* g = rgb.plane(i, 1);
    const Real* b = rgb.plane(i, 2);
    Real* o = out.plane(i, 0);
    for (std::size_t p = 0; p < plane; ++p) {
      o[p] = static_cast<Real>((w.r * r[p] + w.g * g[p] + w.b * b[p]) / 255.0);
    }
  }
  return out;
}

double gamma_exponent(double mean_gray, double mean_clamp_eps) {
  check_eps(mean_clamp_eps);
  const double m = std::clamp(mean_gray, mean_clamp_eps, 1.0 - mean_clamp_eps);
  return kGammaNumerator / std::log(m);
}

Tensor auto_gamma(const Tensor& gray, double mean_clamp_eps) {
  Tensor out(gray.shape());
  for (int i = 0; i < gray.n(); ++i) {
    auto src = gray.sample(i);
    auto dst = out.sample(i);
    double total = 0;
    for (Real v : src) total += clamp01(v);
    const double gamma = gamma_exponent(total / static_cast<double>(src.size()), mean_clamp_eps);
    for (std::size_t p = 0; p < src.size(); ++p) {
      dst[p] = static_cast<Real>(std::pow(clamp01(src[p]), gamma));
    }
  }
  return out;
}

std::vector<double> gaussian_highpass_mask(int d1, int d2, double sigma) {
  if (!(sigma > 0)) throw ParameterError("sigma must be positive");
  if (d1 < 2 || d2 < 2) throw ShapeError("high-pass mask needs d1, d2 >= 2");
  std::vector<double> mask(static_cast<std::size_t>(d1) * d2);
  const int ci = d1 / 2;
  const int cj = d2 / 2;
  const double denom = 2.0 * sigma * sigma;
  for (int i = 0; i < d1; ++i) {
    for (int j = 0; j < d2; ++j) {
      const double r2 = static_cast<double>((i - ci) * (i - ci) + (j - cj) * (j - cj));
      mask[static_cast<std::size_t>(i) * d2 + j] = 1.0 - std::exp(-r2 / denom);
    }
  }
  return mask;
}

Tensor highpass_filter(const Tensor& img, double sigma) {
  const int d1 = img.h();
  const int d2 = img.w();
  const auto mask = gaussian_highpass_mask(d1, d2, sigma);
  const std::size_t plane = img.shape().plane();
  // Spectrum index u sits at (u + d/2) mod d after the centering shift.
  std::vector<double> unshifted(plane);
  for (int u = 0; u < d1; ++u) {
    const int su = (u + d1 / 2) % d1;
    for (int v = 0; v < d2; ++v) {
      const int sv = (v + d2 / 2) % d2;
      unshifted[static_cast<std::size_t>(u) * d2 + v] = mask[static_cast<std::size_t>(su) * d2 + sv];
    }
  }

  Tensor out(img.shape());
  std::vector<std::complex<double>> buf(plane);
  const double inv_n = 1.0 / static_cast<double>(plane);
  for (int i = 0; i < img.n(); ++i) {
    for (int ch = 0; ch < img.c(); ++ch) {
      const Real* src = img.plane(i, ch);
      for (std::size_t p = 0; p < plane; ++p) buf[p] = {static_cast<double>(src[p]), 0.0};
      detail::fft2d(buf, d1, d2, false);
      for (std::size_t p = 0; p < plane; ++p) buf[p] *= unshifted[p];
      detail::fft2d(buf, d1, d2, true);
      Real* dst = out.plane(i, ch);
      for (std::size_t p = 0; p < plane; ++p) dst[p] = static_cast<Real>(buf[p].real() * inv_n);
    }
  }
  return out;
}

Tensor psi(const Tensor& rgb, const FilterConfig& cfg) {
  cfg.validate();
  return highpass_filter(auto_gamma(to_grayscale(rgb, cfg.weights), cfg.mean_clamp_eps), cfg.sigma);
}

Tensor psi_backward(const Tensor& rgb, const Tensor& grad_out, const FilterConfig& cfg) {
  cfg.validate();
  const Tensor gray = to_grayscale(rgb, cfg.weights);
  require_same_shape(gray, grad_out, "psi_backward");
  const Tensor grad_gamma_out = highpass_filter(grad_out, cfg.sigma);

  Tensor grad_rgb(rgb.shape());
  const std::size_t plane = gray.shape().plane();
  std::vector<double> grad_gray(plane);
  for (int i = 0; i < gray.n(); ++i) {
    const Real* g = gray.plane(i, 0);
    const Real* ga = grad_gamma_out.plane(i, 0);

    double total = 0;
    for (std::size_t p = 0; p < plane; ++p) total += clamp01(g[p]);
    const double raw_mean = total / static_cast<double>(plane);
    const double eps = cfg.mean_clamp_eps;
    const double m = std::clamp(raw_mean, eps, 1.0 - eps);
    const double gamma = kGammaNumerator / std::log(m);
    const bool mean_active = raw_mean > eps && raw_mean < 1.0 - eps;

    // d gamma / d mean, times the sum over pixels of ga * c^gamma * ln c.
    double mean_coupling = 0;
    if (mean_active) {
      const double lm = std::log(m);
      const double dgamma_dm = -kGammaNumerator / (m * lm * lm);
      double acc = 0;
      for (std::size_t p = 0; p < plane; ++p) {
        const double c = clamp01(g[p]);
        if (c > 0) acc += ga[p] * std::pow(c, gamma) * std::log(c);
      }
      mean_coupling = dgamma_dm * acc / static_cast<double>(plane);
    }

    for (std::size_t p = 0; p < plane; ++p) {
      const double v = g[p];
      if (v <= 0.0 || v >= 1.0) {
        grad_gray[p] = 0.0;
        continue;
      }
      const double c = std::max(v, kDerivativeFloor);
      grad_gray[p] = gamma * std::pow(c, gamma - 1.0) * ga[p] + mean_coupling;
    }

    const double wr = cfg.weights.r / 255.0;
    const double wg = cfg.weights.g / 255.0;
    const double wb = cfg.weights.b / 255.0;
    Real* r = grad_rgb.plane(i, 0);
    Real* gg = grad_rgb.plane(i, 1);
    Real* b = grad_rgb.plane(i, 2);
    for (std::size_t p = 0; p < plane; ++p) {
      r[p] = static_cast<Real>(wr * grad_gray[p]);
      gg[p] = static_cast<Real>(wg * grad_gray[p]);
      b[p] = static_cast<Real>(wb * grad_gray[p]);
    }
  }
  return grad_rgb;
}

}  // namespace percdepth::filters
