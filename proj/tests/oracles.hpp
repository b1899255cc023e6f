#pragma once

// Independent reference computations used only by tests.

#include <cmath>
#include <complex>
#include <algorithm>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "percdepth/tensor.hpp"

namespace oracle {

using percdepth::Real;
using percdepth::Tensor;

// Gaussian high-pass by brute-force 2D DFT, evaluated straight from the
// definition: centered spectrum index (u - d1/2, v - d2/2) weighted by
// 1 - exp(-r^2 / (2 sigma^2)), then inverse DFT, real part.
inline std::vector<double> direct_highpass(const std::vector<double>& img, int d1, int d2,
                                           double sigma) {
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<std::complex<double>> spec(static_cast<std::size_t>(d1) * d2);
  for (int u = 0; u < d1; ++u) {
    for (int v = 0; v < d2; ++v) {
      std::complex<double> acc = 0;
      for (int y = 0; y < d1; ++y) {
        for (int x = 0; x < d2; ++x) {
          const double ang = -two_pi * (double(u) * y / d1 + double(v) * x / d2);
          acc += img[y * d2 + x] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
      }
      // Frequency u lands at centered position (u + d1/2) mod d1.
      const int cu = (u + d1 / 2) % d1 - d1 / 2;
      const int cv = (v + d2 / 2) % d2 - d2 / 2;
      const double r2 = double(cu) * cu + double(cv) * cv;
      spec[u * d2 + v] = acc * (1.0 - std::exp(-r2 / (2.0 * sigma * sigma)));
    }
  }
  std::vector<double> out(img.size());
  for (int y = 0; y < d1; ++y) {
    for (int x = 0; x < d2; ++x) {
      std::complex<double> acc = 0;
      for (int u = 0; u < d1; ++u) {
        for (int v = 0; v < d2; ++v) {
          const double ang = two_pi * (double(u) * y / d1 + double(v) * x / d2);
          acc += spec[u * d2 + v] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
      }
      out[y * d2 + x] = acc.real() / (double(d1) * d2);
    }
  }
  return out;
}

// Central difference of `f` w.r.t. one scalar, restoring it afterwards.
inline double central_difference(const std::function<double()>& f, Real& x, double h) {
  const Real saved = x;
  x = static_cast<Real>(saved + h);
  const double hi = static_cast<double>(x) - saved;
  const double fp = f();
  x = static_cast<Real>(saved - h);
  const double lo = saved - static_cast<double>(x);
  const double fm = f();
  x = saved;
  return (fp - fm) / (hi + lo);
}

// Interval of finite-difference slopes of f in x, for a claimed slope g.
// The one-sided Richardson slopes bound the derivative on smooth
// coordinates and span the subgradients across a kink. The interval is
// widened by the rounding noise of f, measured from evaluations a few ulps
// away from x with the linear trend g * dx removed; each slope combines
// four evaluations with weights summing to 10 / h.
inline std::pair<double, double> slope_interval(const std::function<double()>& f, Real& x, double h, double g) {
  const Real saved = x;
  const double f0 = f();
  auto slope = [&](double off) {
    x = static_cast<Real>(saved + off);
    const double step = static_cast<double>(x) - saved;
    const double v = f();
    return (v - f0) / step;
  };
  const double right = 2 * slope(h / 2) - slope(h);
  const double left = 2 * slope(-h / 2) - slope(-h);
  double noise = 0;
  Real up = saved, down = saved;
  for (int k = 0; k < 3; ++k) {
    up = std::nextafter(up, std::numeric_limits<Real>::infinity());
    down = std::nextafter(down, -std::numeric_limits<Real>::infinity());
    for (Real at : {up, down}) {
      x = at;
      noise = std::max(noise, std::abs(f() - f0 - g * (static_cast<double>(at) - saved)));
    }
  }
  x = saved;
  const double widen = 10 * noise / h;
  return {std::min(left, right) - widen, std::max(left, right) + widen};
}

// Norm-wise relative error between two gradient samples.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double den = std::max(std::sqrt(std::max(na, nb)), 1e-12);
  return std::sqrt(num) / den;
}

inline Tensor random_tensor(percdepth::Shape s, std::mt19937_64& rng, double lo = -1,
                            double hi = 1) {
  Tensor t(s);
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.values()) v = static_cast<Real>(d(rng));
  return t;
}

}  // namespace oracle
