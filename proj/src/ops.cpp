#include "percdepth/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <limits>

namespace percdepth::ops {
namespace {

using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

struct ConvGeom {
  int cin, h, w, k, s;
  Padding py, px;
  int rows() const { return cin * k * k; }
  int cols() const { return py.out * px.out; }
};

ConvGeom geometry(const Shape& x, int k, int s) {
  return {x.c, x.h, x.w, k, s, same_padding(x.h, k, s), same_padding(x.w, k, s)};
}

bool is_identity_geom(const ConvGeom& g) { return g.k == 1 && g.s == 1; }

// col[(ci*k + ky)*k + kx][oy*ow + ox] = x[ci, oy*s + ky - py, ox*s + kx - px]
void im2col(const Real* x, const ConvGeom& g, Real* col) {
  const int oh = g.py.out;
  const int ow = g.px.out;
  for (int ci = 0; ci < g.cin; ++ci) {
    const Real* plane = x + static_cast<std::size_t>(ci) * g.h * g.w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        Real* row = col + ((static_cast<std::size_t>(ci) * g.k + ky) * g.k + kx) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.s + ky - g.py.before;
          Real* dst = row + static_cast<std::size_t>(oy) * ow;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + ow, Real(0));
            continue;
          }
          const Real* src = plane + static_cast<std::size_t>(iy) * g.w;
          const int off = kx - g.px.before;
          if (g.s == 1) {
            const int lo = std::max(0, -off);
            const int hi = std::min(ow, g.w - off);
            std::fill(dst, dst + lo, Real(0));
            if (hi > lo) std::copy(src + lo + off, src + hi + off, dst + lo);
            std::fill(dst + std::max(hi, lo), dst + ow, Real(0));
          } else {
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * g.s + off;
              dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : Real(0);
            }
          }
        }
      }
    }
  }
}

void col2im(const Real* col, const ConvGeom& g, Real* x) {
  const int oh = g.py.out;
  const int ow = g.px.out;
  for (int ci = 0; ci < g.cin; ++ci) {
    Real* plane = x + static_cast<std::size_t>(ci) * g.h * g.w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const Real* row = col + ((static_cast<std::size_t>(ci) * g.k + ky) * g.k + kx) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.s + ky - g.py.before;
          if (iy < 0 || iy >= g.h) continue;
          const Real* src = row + static_cast<std::size_t>(oy) * ow;
          Real* dst = plane + static_cast<std::size_t>(iy) * g.w;
          const int off = kx - g.px.before;
          if (g.s == 1) {
            const int lo = std::max(0, -off);
            const int hi = std::min(ow, g.w - off);
            for (int ox = lo; ox < hi; ++ox) dst[ox + off] += src[ox];
          } else {
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * g.s + off;
              if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
            }
          }
        }
      }
    }
  }
}

AlignedVector<Real>& scratch() {
  thread_local AlignedVector<Real> buf;
  return buf;
}

void check_weight(const Tensor& x, const Tensor& weight) {
  if (weight.c() != x.c() || weight.h() != weight.w()) {
    throw ShapeError("conv2d: weight " + to_string(weight.shape()) + " does not fit input " +
                     to_string(x.shape()));
  }
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::relu: return "ReLU";
    case Activation::elu: return "ELU";
    case Activation::leaky_relu: return "LReLU";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "linear" || s.empty()) return Activation::linear;
  if (s == "ReLU") return Activation::relu;
  if (s == "ELU") return Activation::elu;
  if (s == "LReLU") return Activation::leaky_relu;
  if (s == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + s + "'");
}

Padding same_padding(int in, int kernel, int stride) {
  Padding p;
  p.out = (in + stride - 1) / stride;
  const int total = std::max((p.out - 1) * stride + kernel - in, 0);
  p.before = total / 2;
  return p;
}

Tensor conv2d(const Tensor& x, const Tensor& weight, std::span<const Real> bias, int stride) {
  check_weight(x, weight);
  const ConvGeom g = geometry(x.shape(), weight.h(), stride);
  const int cout = weight.n();
  Tensor out(x.n(), cout, g.py.out, g.px.out);
  ConstMapMat wmat(weight.data(), cout, g.rows());
  auto& col = scratch();
  for (int i = 0; i < x.n(); ++i) {
    const Real* src = x.plane(i, 0);
    if (!is_identity_geom(g)) {
      col.resize(static_cast<std::size_t>(g.rows()) * g.cols());
      im2col(src, g, col.data());
      src = col.data();
    }
    MapMat omat(out.plane(i, 0), cout, g.cols());
    omat.noalias() = wmat * ConstMapMat(src, g.rows(), g.cols());
    if (!bias.empty()) {
      for (int co = 0; co < cout; ++co) omat.row(co).array() += bias[co];
    }
  }
  return out;
}

Tensor conv2d_backward_data(const Tensor& grad_out, const Tensor& weight, const Shape& x_shape,
                            int stride) {
  const ConvGeom g = geometry(x_shape, weight.h(), stride);
  if (grad_out.c() != weight.n() || grad_out.h() != g.py.out || grad_out.w() != g.px.out) {
    throw ShapeError("conv2d_backward_data: gradient " + to_string(grad_out.shape()));
  }
  Tensor dx(x_shape);
  ConstMapMat wmat(weight.data(), weight.n(), g.rows());
  auto& col = scratch();
  for (int i = 0; i < x_shape.n; ++i) {
    ConstMapMat dy(grad_out.plane(i, 0), weight.n(), g.cols());
    if (is_identity_geom(g)) {
      MapMat(dx.plane(i, 0), g.rows(), g.cols()).noalias() = wmat.transpose() * dy;
      continue;
    }
    col.resize(static_cast<std::size_t>(g.rows()) * g.cols());
    MapMat cmat(col.data(), g.rows(), g.cols());
    cmat.noalias() = wmat.transpose() * dy;
    col2im(col.data(), g, dx.plane(i, 0));
  }
  return dx;
}

void conv2d_backward_params(const Tensor& x, const Tensor& grad_out, int stride,
                            Tensor& grad_weight, std::span<Real> grad_bias) {
  const ConvGeom g = geometry(x.shape(), grad_weight.h(), stride);
  const int cout = grad_weight.n();
  MapMat dw(grad_weight.data(), cout, g.rows());
  auto& col = scratch();
  for (int i = 0; i < x.n(); ++i) {
    ConstMapMat dy(grad_out.plane(i, 0), cout, g.cols());
    const Real* src = x.plane(i, 0);
    if (!is_identity_geom(g)) {
      col.resize(static_cast<std::size_t>(g.rows()) * g.cols());
      im2col(src, g, col.data());
      src = col.data();
    }
    dw.noalias() += dy * ConstMapMat(src, g.rows(), g.cols()).transpose();
    if (!grad_bias.empty()) {
      for (int co = 0; co < cout; ++co) grad_bias[co] += dy.row(co).sum();
    }
  }
}

Tensor activate(const Tensor& x, Activation a) {
  Tensor y(x.shape());
  auto in = x.values();
  auto out = y.values();
  const std::size_t n = in.size();
  switch (a) {
    case Activation::linear:
      std::copy(in.begin(), in.end(), out.begin());
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < n; ++i) out[i] = in[i] > 0 ? in[i] : Real(0);
      break;
    case Activation::elu:
      for (std::size_t i = 0; i < n; ++i) out[i] = in[i] > 0 ? in[i] : kEluAlpha * std::expm1(in[i]);
      break;
    case Activation::leaky_relu:
      for (std::size_t i = 0; i < n; ++i) out[i] = in[i] > 0 ? in[i] : kLeakySlope * in[i];
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(in[i]);
      break;
  }
  return y;
}

Tensor activate_backward(const Tensor& x, const Tensor& y, const Tensor& grad_out, Activation a) {
  Tensor g(x.shape());
  auto in = x.values();
  auto out = y.values();
  auto go = grad_out.values();
  auto gi = g.values();
  const std::size_t n = in.size();
  switch (a) {
    case Activation::linear:
      std::copy(go.begin(), go.end(), gi.begin());
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < n; ++i) gi[i] = in[i] > 0 ? go[i] : Real(0);
      break;
    case Activation::elu:
      for (std::size_t i = 0; i < n; ++i) gi[i] = in[i] > 0 ? go[i] : go[i] * (out[i] + kEluAlpha);
      break;
    case Activation::leaky_relu:
      for (std::size_t i = 0; i < n; ++i) gi[i] = in[i] > 0 ? go[i] : kLeakySlope * go[i];
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < n; ++i) gi[i] = go[i] * (Real(1) - out[i] * out[i]);
      break;
  }
  return g;
}

bool is_piecewise_linear(Activation a) {
  return a == Activation::linear || a == Activation::relu || a == Activation::leaky_relu;
}

Tensor instance_norm(const Tensor& x, std::span<const Real> scale, std::span<const Real> shift,
                     NormStats* stats) {
  Tensor y(x.shape());
  const std::size_t plane = x.shape().plane();
  if (stats) {
    stats->mean.assign(static_cast<std::size_t>(x.n()) * x.c(), 0);
    stats->inv_std.assign(static_cast<std::size_t>(x.n()) * x.c(), 0);
  }
  for (int i = 0; i < x.n(); ++i) {
    for (int ch = 0; ch < x.c(); ++ch) {
      const Real* src = x.plane(i, ch);
      double m = 0;
      for (std::size_t p = 0; p < plane; ++p) m += src[p];
      m /= static_cast<double>(plane);
      double v = 0;
      for (std::size_t p = 0; p < plane; ++p) v += (src[p] - m) * (src[p] - m);
      v /= static_cast<double>(plane);
      const double inv = 1.0 / std::sqrt(v + kNormEps);
      const double a = scale[ch] * inv;
      const double b = shift[ch] - a * m;
      Real* dst = y.plane(i, ch);
      for (std::size_t p = 0; p < plane; ++p) dst[p] = static_cast<Real>(a * src[p] + b);
      if (stats) {
        stats->mean[i * x.c() + ch] = static_cast<Real>(m);
        stats->inv_std[i * x.c() + ch] = static_cast<Real>(inv);
      }
    }
  }
  return y;
}

Tensor instance_norm_backward(const Tensor& x, const NormStats& stats,
                              std::span<const Real> scale, const Tensor& grad_out,
                              std::span<Real> grad_scale, std::span<Real> grad_shift) {
  Tensor dx(x.shape());
  const std::size_t plane = x.shape().plane();
  const double count = static_cast<double>(plane);
  for (int i = 0; i < x.n(); ++i) {
    for (int ch = 0; ch < x.c(); ++ch) {
      const Real* src = x.plane(i, ch);
      const Real* dy = grad_out.plane(i, ch);
      const double m = stats.mean[i * x.c() + ch];
      const double inv = stats.inv_std[i * x.c() + ch];
      double sum_dy = 0;
      double sum_dy_xhat = 0;
      for (std::size_t p = 0; p < plane; ++p) {
        const double xhat = (src[p] - m) * inv;
        sum_dy += dy[p];
        sum_dy_xhat += dy[p] * xhat;
      }
      if (!grad_scale.empty()) grad_scale[ch] += static_cast<Real>(sum_dy_xhat);
      if (!grad_shift.empty()) grad_shift[ch] += static_cast<Real>(sum_dy);
      const double gamma = scale[ch];
      Real* dst = dx.plane(i, ch);
      for (std::size_t p = 0; p < plane; ++p) {
        const double xhat = (src[p] - m) * inv;
        dst[p] = static_cast<Real>(gamma * inv / count *
                                   (count * dy[p] - sum_dy - xhat * sum_dy_xhat));
      }
    }
  }
  return dx;
}

Tensor max_pool(const Tensor& x, int kernel, int stride, std::vector<int>* argmax) {
  const Padding py = same_padding(x.h(), kernel, stride);
  const Padding px = same_padding(x.w(), kernel, stride);
  Tensor y(x.n(), x.c(), py.out, px.out);
  if (argmax) argmax->assign(y.size(), 0);
  std::size_t idx = 0;
  for (int i = 0; i < x.n(); ++i) {
    for (int ch = 0; ch < x.c(); ++ch) {
      const Real* src = x.plane(i, ch);
      Real* dst = y.plane(i, ch);
      for (int oy = 0; oy < py.out; ++oy) {
        for (int ox = 0; ox < px.out; ++ox, ++idx) {
          Real best = -std::numeric_limits<Real>::infinity();
          int best_at = -1;
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = oy * stride + ky - py.before;
            if (iy < 0 || iy >= x.h()) continue;
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = ox * stride + kx - px.before;
              if (ix < 0 || ix >= x.w()) continue;
              const Real v = src[iy * x.w() + ix];
              if (best_at < 0 || v > best) {
                best = v;
                best_at = iy * x.w() + ix;
              }
            }
          }
          dst[oy * px.out + ox] = best;
          if (argmax) (*argmax)[idx] = best_at;
        }
      }
    }
  }
  return y;
}

Tensor max_pool_backward(const Shape& x_shape, const std::vector<int>& argmax,
                         const Tensor& grad_out) {
  Tensor dx(x_shape);
  const std::size_t out_plane = grad_out.shape().plane();
  std::size_t idx = 0;
  for (int i = 0; i < grad_out.n(); ++i) {
    for (int ch = 0; ch < grad_out.c(); ++ch) {
      const Real* dy = grad_out.plane(i, ch);
      Real* dst = dx.plane(i, ch);
      for (std::size_t p = 0; p < out_plane; ++p, ++idx) dst[argmax[idx]] += dy[p];
    }
  }
  return dx;
}

Tensor upsample_nearest(const Tensor& x, int factor) {
  Tensor y(x.n(), x.c(), x.h() * factor, x.w() * factor);
  for (int i = 0; i < x.n(); ++i) {
    for (int ch = 0; ch < x.c(); ++ch) {
      const Real* src = x.plane(i, ch);
      Real* dst = y.plane(i, ch);
      for (int oy = 0; oy < y.h(); ++oy) {
        const Real* row = src + (oy / factor) * x.w();
        Real* out = dst + oy * y.w();
        for (int ox = 0; ox < y.w(); ++ox) out[ox] = row[ox / factor];
      }
    }
  }
  return y;
}

Tensor upsample_nearest_backward(const Tensor& grad_out, int factor) {
  Tensor dx(grad_out.n(), grad_out.c(), grad_out.h() / factor, grad_out.w() / factor);
  for (int i = 0; i < grad_out.n(); ++i) {
    for (int ch = 0; ch < grad_out.c(); ++ch) {
      const Real* src = grad_out.plane(i, ch);
      Real* dst = dx.plane(i, ch);
      for (int oy = 0; oy < grad_out.h(); ++oy) {
        Real* row = dst + (oy / factor) * dx.w();
        const Real* in = src + oy * grad_out.w();
        for (int ox = 0; ox < grad_out.w(); ++ox) row[ox / factor] += in[ox];
      }
    }
  }
  return dx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
    throw ShapeError("concat: " + to_string(a.shape()) + " with " + to_string(b.shape()));
  }
  Tensor y(a.n(), a.c() + b.c(), a.h(), a.w());
  for (int i = 0; i < a.n(); ++i) {
    auto sa = a.sample(i);
    auto sb = b.sample(i);
    Real* dst = y.plane(i, 0);
    dst = std::copy(sa.begin(), sa.end(), dst);
    std::copy(sb.begin(), sb.end(), dst);
  }
  return y;
}

void split_channels(const Tensor& grad, int channels_a, Tensor& grad_a, Tensor& grad_b) {
  grad_a = Tensor(grad.n(), channels_a, grad.h(), grad.w());
  grad_b = Tensor(grad.n(), grad.c() - channels_a, grad.h(), grad.w());
  for (int i = 0; i < grad.n(); ++i) {
    auto s = grad.sample(i);
    const std::size_t na = grad_a.shape().sample();
    std::copy(s.begin(), s.begin() + na, grad_a.plane(i, 0));
    std::copy(s.begin() + na, s.end(), grad_b.plane(i, 0));
  }
}

}  // namespace percdepth::ops
