#include "percdepth/tensor.hpp"

#include <cmath>

namespace percdepth {

std::string to_string(const Shape& s) {
  return "[" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) +
         "," + std::to_string(s.w) + "]";
}

Tensor Tensor::slice(int i) const { return slice(i, 1); }

Tensor Tensor::slice(int begin, int count) const {
  if (begin < 0 || count < 0 || begin + count > shape_.n) {
    throw ShapeError("slice out of range");
  }
  Tensor out(count, shape_.c, shape_.h, shape_.w);
  std::copy_n(data_.begin() + begin * shape_.sample(), count * shape_.sample(), out.data());
  return out;
}

void Tensor::set_sample(int i, const Tensor& src) {
  if (src.n() != 1 || src.c() != c() || src.h() != h() || src.w() != w()) {
    throw ShapeError("set_sample: " + to_string(src.shape()) + " into " + to_string(shape_));
  }
  std::copy(src.data_.begin(), src.data_.end(), data_.begin() + i * shape_.sample());
}

Tensor Tensor::stack(std::span<const Tensor> samples) {
  if (samples.empty()) return {};
  Shape s = samples.front().shape();
  int total = 0;
  for (const auto& t : samples) {
    if (t.c() != s.c || t.h() != s.h || t.w() != s.w) {
      throw ShapeError("stack: inconsistent sample shapes");
    }
    total += t.n();
  }
  Tensor out(total, s.c, s.h, s.w);
  Real* dst = out.data();
  for (const auto& t : samples) dst = std::copy(t.data_.begin(), t.data_.end(), dst);
  return out;
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  out += b;
  return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a;
  auto o = out.values();
  auto v = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= v[i];
  return out;
}

Tensor operator*(Real s, const Tensor& a) {
  Tensor out = a;
  for (auto& v : out.values()) v *= s;
  return out;
}

Tensor& operator+=(Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto o = a.values();
  auto v = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += v[i];
  return a;
}

double sum(const Tensor& t) {
  double s = 0;
  for (Real v : t.values()) s += v;
  return s;
}

double mean(const Tensor& t) { return t.empty() ? 0.0 : sum(t) / static_cast<double>(t.size()); }

double max_abs(const Tensor& t) {
  double m = 0;
  for (Real v : t.values()) m = std::max(m, std::abs(static_cast<double>(v)));
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0;
  auto va = a.values();
  auto vb = b.values();
  for (std::size_t i = 0; i < va.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(va[i]) - static_cast<double>(vb[i])));
  }
  return m;
}

bool all_finite(const Tensor& t) {
  for (Real v : t.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace percdepth
