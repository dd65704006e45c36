#pragma once

#include <complex>
#include <vector>

namespace turbsyn {

// Minimal wrapper over FFTW double-precision c2c transforms. Plans are
// created per call with FFTW_ESTIMATE (deterministic, no wisdom state) and
// guarded by FFTW's planner lock internally.
//
// Conventions: forward = sum_x f(x) e^{-i2pi kx/N} (unnormalized),
// inverse = sum_k F(k) e^{+i2pi kx/N} (unnormalized).
void fft2(const std::complex<double>* in, std::complex<double>* out, int height,
          int width, bool inverse);

std::vector<std::complex<double>> fft2(const std::vector<std::complex<double>>& in,
                                       int height, int width, bool inverse);

}  // namespace turbsyn
