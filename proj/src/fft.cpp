#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>
#include <tuple>

namespace percdepth::detail {
namespace {

struct Plan {
  fftw_plan plan = nullptr;
  ~Plan() {
    if (plan) fftw_destroy_plan(plan);
  }
};

struct Buffer {
  fftw_complex* ptr = nullptr;
  explicit Buffer(std::size_t n) : ptr(fftw_alloc_complex(n)) {}
  ~Buffer() { fftw_free(ptr); }
  Buffer(const Buffer&) = delete;
  Buffer& operator=(const Buffer&) = delete;
};

// Planner calls are not thread-safe in FFTW; executing a cached plan on
// fresh aligned buffers is.
std::mutex planner_mutex;

fftw_plan get_plan(int d1, int d2, bool inverse) {
  static std::map<std::tuple<int, int, bool>, std::unique_ptr<Plan>> cache;
  std::lock_guard lock(planner_mutex);
  auto key = std::make_tuple(d1, d2, inverse);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second->plan;
  Buffer scratch(static_cast<std::size_t>(d1) * d2);
  auto p = std::make_unique<Plan>();
  p->plan = fftw_plan_dft_2d(d1, d2, scratch.ptr, scratch.ptr,
                             inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
  fftw_plan raw = p->plan;
  cache.emplace(key, std::move(p));
  return raw;
}

}  // namespace

void fft2d(std::vector<std::complex<double>>& data, int d1, int d2, bool inverse) {
  const std::size_t n = static_cast<std::size_t>(d1) * d2;
  fftw_plan plan = get_plan(d1, d2, inverse);
  Buffer buf(n);
  auto* src = reinterpret_cast<fftw_complex*>(data.data());
  for (std::size_t i = 0; i < n; ++i) {
    buf.ptr[i][0] = src[i][0];
    buf.ptr[i][1] = src[i][1];
  }
  fftw_execute_dft(plan, buf.ptr, buf.ptr);
  for (std::size_t i = 0; i < n; ++i) {
    src[i][0] = buf.ptr[i][0];
    src[i][1] = buf.ptr[i][1];
  }
}

}  // namespace percdepth::detail
