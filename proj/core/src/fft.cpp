#include "turbsyn/fft.hpp"

#include <map>
#include <mutex>

#include <fftw3.h>

namespace turbsyn {

namespace {

// One cached plan per (height, width, direction). Plans are created with
// FFTW_UNALIGNED so they can execute on any caller buffer via the
// new-array interface; creation is serialized (FFTW planner is not
// thread-safe), execution is concurrent.
struct PlanCache {
  std::mutex mu;
  std::map<std::tuple<int, int, bool>, fftw_plan> plans;

  fftw_plan get(int height, int width, bool inverse) {
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_tuple(height, width, inverse);
    auto it = plans.find(key);
    if (it != plans.end()) return it->second;
    std::vector<std::complex<double>> a(static_cast<size_t>(height) * width);
    std::vector<std::complex<double>> b(a.size());
    fftw_plan p = fftw_plan_dft_2d(
        height, width, reinterpret_cast<fftw_complex*>(a.data()),
        reinterpret_cast<fftw_complex*>(b.data()),
        inverse ? FFTW_BACKWARD : FFTW_FORWARD,
        FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans.emplace(key, p);
    return p;
  }
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

}  // namespace

void fft2(const std::complex<double>* in, std::complex<double>* out, int height,
          int width, bool inverse) {
  fftw_plan plan = plan_cache().get(height, width, inverse);
  fftw_execute_dft(
      plan,
      reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in)),
      reinterpret_cast<fftw_complex*>(out));
}

std::vector<std::complex<double>> fft2(const std::vector<std::complex<double>>& in,
                                       int height, int width, bool inverse) {
  std::vector<std::complex<double>> out(in.size());
  fft2(in.data(), out.data(), height, width, inverse);
  return out;
}

}  // namespace turbsyn
