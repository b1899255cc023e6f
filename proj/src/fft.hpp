#pragma once

#include <complex>
#include <vector>

namespace percdepth::detail {

// In-place 2D DFT on a row-major d1 x d2 complex buffer. Forward is
// unnormalized; inverse applies no scaling (callers divide by d1 * d2).
void fft2d(std::vector<std::complex<double>>& data, int d1, int d2, bool inverse);

}  // namespace percdepth::detail
