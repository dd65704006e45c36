#include <benchmark/benchmark.h>

#include "turbsyn/bessel.hpp"
#include "turbsyn/covariance.hpp"
#include "turbsyn/degrade.hpp"
#include "turbsyn/field_synthesis.hpp"
#include "turbsyn/psf.hpp"

using namespace turbsyn;

namespace {

static void BM_BesselColumn(benchmark::State& state) {
  double x = 0.0;
  double col[16];
  for (auto _ : state) {
    x += 0.37;
    if (x > 200.0) x = 0.1;
    bessel_j_column(9, x, col);
    benchmark::DoNotOptimize(col[5]);
  }
}
BENCHMARK(BM_BesselColumn);

static void BM_TripleIntegral(benchmark::State& state) {
  double s = state.range(0) / 10.0;
  for (auto _ : state) {
    double v = bessel_triple_integral(2, 2, 2, s, 2.9e-4);
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_TripleIntegral)->Arg(0)->Arg(10)->Arg(100)->Arg(400);

static void BM_PhaseToPsf(benchmark::State& state) {
  ZernikeBasis pupil = evaluate_basis(static_cast<int>(state.range(0)));
  std::vector<double> a(kNumModes, 0.0);
  a[3] = 0.8;
  a[7] = -0.4;
  a[12] = 0.3;
  for (auto _ : state) {
    Psf psf = phase_to_psf(a, pupil, 67);
    benchmark::DoNotOptimize(psf.kernel[0]);
  }
}
BENCHMARK(BM_PhaseToPsf)->Arg(128)->Arg(256);

static void BM_SampleField(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  std::vector<double> psd(static_cast<size_t>(n) * n, 1.0);
  SeedField seed = make_seed(n, n, 1, 2, 4);
  for (auto _ : state) {
    Grid g = sample_field(psd, seed);
    benchmark::DoNotOptimize(g.data[0]);
  }
}
BENCHMARK(BM_SampleField)->Arg(64)->Arg(256);

static void BM_ScatterBlur(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  PsfBasis basis;
  basis.side = 33;
  basis.rank = 100;
  basis.native_fwhm = 2.0;
  basis.mean.assign(33 * 33, 0.0);
  basis.mean[16 * 33 + 16] = 1.0;
  basis.psi.assign(100, std::vector<double>(33 * 33, 0.0));
  for (int k = 0; k < 100; ++k) basis.psi[k][k] = 1e-3;
  BlurOperator op(basis, n, n);

  Grid img(n, n, 0.5);
  BetaMaps beta;
  beta.width = n;
  beta.height = n;
  beta.rank = 100;
  beta.planes.assign(100,
                     std::vector<float>(static_cast<size_t>(n) * n, 1e-4f));
  for (auto _ : state) {
    Grid out = op.scatter(img, beta);
    benchmark::DoNotOptimize(out.data[0]);
  }
}
BENCHMARK(BM_ScatterBlur)->Arg(128)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
