#pragma once

#include <algorithm>
#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "percdepth/error.hpp"

namespace percdepth {

#ifdef PERCDEPTH_DOUBLE
using Real = double;
#else
using Real = float;
#endif

// Fixed 64-byte alignment: vectorized kernels peel loops by address, so a
// stable alignment keeps floating-point results independent of the heap.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

template <class T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t sample() const { return static_cast<std::size_t>(c) * h * w; }

  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

// Dense NCHW tensor. Images are stored with n == 1; batches stack along n.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = 0)
      : shape_(shape), data_(shape.size(), fill) {}
  Tensor(int n, int c, int h, int w, Real fill = 0)
      : Tensor(Shape{n, c, h, w}, fill) {}

  const Shape& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Real* data() { return data_.data(); }
  const Real* data() const { return data_.data(); }
  std::span<Real> values() { return data_; }
  std::span<const Real> values() const { return data_; }

  std::span<Real> sample(int i) {
    return {data_.data() + i * shape_.sample(), shape_.sample()};
  }
  std::span<const Real> sample(int i) const {
    return {data_.data() + i * shape_.sample(), shape_.sample()};
  }
  Real* plane(int i, int ch) {
    return data_.data() + (static_cast<std::size_t>(i) * shape_.c + ch) * shape_.plane();
  }
  const Real* plane(int i, int ch) const {
    return data_.data() + (static_cast<std::size_t>(i) * shape_.c + ch) * shape_.plane();
  }

  Real& at(int i, int ch, int y, int x) {
    return data_[((static_cast<std::size_t>(i) * shape_.c + ch) * shape_.h + y) * shape_.w + x];
  }
  Real at(int i, int ch, int y, int x) const {
    return data_[((static_cast<std::size_t>(i) * shape_.c + ch) * shape_.h + y) * shape_.w + x];
  }

  void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

  // Copies sample `i` out as a single-sample tensor.
  Tensor slice(int i) const;
  // Copies samples [begin, begin + count).
  Tensor slice(int begin, int count) const;
  void set_sample(int i, const Tensor& src);

  static Tensor stack(std::span<const Tensor> samples);

 private:
  Shape shape_;
  AlignedVector<Real> data_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

// Elementwise helpers used by losses and tests.
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(Real s, const Tensor& a);
Tensor& operator+=(Tensor& a, const Tensor& b);

double sum(const Tensor& t);
double mean(const Tensor& t);
double max_abs(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& t);

}  // namespace percdepth
