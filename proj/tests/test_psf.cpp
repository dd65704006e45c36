#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "test_util.hpp"
#include "turbsyn/psf.hpp"
#include "turbsyn/rng.hpp"

using namespace turbsyn;

namespace {

const ZernikeBasis& test_pupil() {
  static const ZernikeBasis pupil = evaluate_basis(128);
  return pupil;
}

PsfDictionary small_dictionary(size_t count, uint64_t seed = 20240105) {
  DictionaryOptions opts;
  opts.side = 33;
  opts.pupil_grid = 128;
  opts.seed = seed;
  return build_dictionary(count, noll_covariance(), opts);
}

PsfBasis small_basis(const PsfDictionary& dict, int rank) {
  return fit_basis(dict, rank, test_pupil());
}

}  // namespace

TEST_CASE("zero aberration gives a symmetric, centered, unit-sum PSF") {
  Psf psf = phase_to_psf({}, test_pupil(), 33);
  CHECK(psf.sum() == doctest::Approx(1.0).epsilon(1e-6));

  int c = psf.side / 2;
  double peak = *std::max_element(psf.kernel.begin(), psf.kernel.end());
  CHECK(psf.at(c, c) == peak);

  double asym = 0.0;
  for (int y = 0; y < psf.side; ++y)
    for (int x = 0; x < psf.side; ++x) {
      asym = std::max(asym, std::abs(psf.at(x, y) -
                                     psf.at(psf.side - 1 - x, y)));
      asym = std::max(asym, std::abs(psf.at(x, y) -
                                     psf.at(x, psf.side - 1 - y)));
      asym = std::max(asym, std::abs(psf.at(x, y) - psf.at(y, x)));
    }
  CHECK(asym < 1e-6);
}

TEST_CASE("any coefficients give a unit-sum nonnegative kernel") {
  std::vector<double> a(kNumModes, 0.0);
  a[3] = 1.2;
  a[7] = -0.8;
  a[21] = 0.5;
  Psf psf = phase_to_psf(a, test_pupil(), 33);
  CHECK(psf.sum() == doctest::Approx(1.0).epsilon(1e-6));
  for (double v : psf.kernel) CHECK(v >= 0.0);
}

TEST_CASE("defocus strictly widens the PSF") {
  std::vector<double> a(kNumModes, 0.0);
  double prev = 0.0;
  for (double defocus : {0.5, 1.0, 2.0}) {
    a[3] = defocus;
    double fwhm = measure_fwhm(phase_to_psf(a, test_pupil(), 33));
    CHECK(fwhm > prev);
    prev = fwhm;
  }
}

TEST_CASE("tilt and piston coefficients do not change the PSF") {
  std::vector<double> a(kNumModes, 0.0);
  a[3] = 0.7;
  a[10] = -0.4;
  Psf base = phase_to_psf(a, test_pupil(), 33);
  a[0] = 5.0;
  a[1] = 2.5;
  a[2] = -3.0;
  Psf tilted = phase_to_psf(a, test_pupil(), 33);
  CHECK(base.kernel == tilted.kernel);
}

TEST_CASE("even or tiny sides are rejected") {
  CHECK_THROWS_AS(phase_to_psf({}, test_pupil(), 32), ConfigError);
  CHECK_THROWS_AS(phase_to_psf({}, test_pupil(), 1), ConfigError);
}

TEST_CASE("dictionary strengths stay in range and scale the blur") {
  PsfDictionary dict = small_dictionary(400);
  REQUIRE(dict.count() == 400);
  double weak_fwhm = 0.0, strong_fwhm = 0.0;
  int weak_n = 0, strong_n = 0;
  for (size_t i = 0; i < dict.count(); ++i) {
    CHECK(dict.d_over_r0[i] >= 0.1);
    CHECK(dict.d_over_r0[i] <= 12.0);
    Psf p;
    p.side = dict.side;
    p.kernel.assign(dict.sample(i).begin(), dict.sample(i).end());
    double f = measure_fwhm(p);
    if (dict.d_over_r0[i] <= 1.0) {
      weak_fwhm += f;
      ++weak_n;
    } else if (dict.d_over_r0[i] >= 6.0) {
      strong_fwhm += f;
      ++strong_n;
    }
  }
  REQUIRE(weak_n > 0);
  REQUIRE(strong_n > 0);
  CHECK(strong_fwhm / strong_n > weak_fwhm / weak_n);
}

TEST_CASE("empty dictionaries are rejected") {
  CHECK_THROWS_AS(small_dictionary(0), ConfigError);
}

TEST_CASE("full-rank PCA reconstructs training samples exactly") {
  PsfDictionary dict = small_dictionary(40);
  PsfBasis basis = small_basis(dict, 40);
  for (size_t i = 0; i < dict.count(); i += 7) {
    Psf p;
    p.side = dict.side;
    p.kernel.assign(dict.sample(i).begin(), dict.sample(i).end());
    std::vector<double> beta = project_coeffs(p, basis);
    std::vector<double> rec = basis.reconstruct(beta);
    double worst = 0.0;
    for (size_t k = 0; k < rec.size(); ++k)
      worst = std::max(worst, std::abs(rec[k] - p.kernel[k]));
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("rank above the sample count is rejected") {
  PsfDictionary dict = small_dictionary(20);
  CHECK_THROWS_AS(small_basis(dict, 21), ConfigError);
}

TEST_CASE("basis Gram matrix is the identity to 1e-8") {
  PsfDictionary dict = small_dictionary(300);
  PsfBasis basis = small_basis(dict, 40);
  for (int i = 0; i < basis.rank; ++i)
    for (int j = i; j < basis.rank; ++j) {
      double dot = 0.0;
      for (size_t p = 0; p < basis.psi[i].size(); ++p)
        dot += basis.psi[i][p] * basis.psi[j][p];
      CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-8);
    }
}

TEST_CASE("projection of the mean is zero; of mean+psi_3 is e_3") {
  PsfDictionary dict = small_dictionary(300);
  PsfBasis basis = small_basis(dict, 20);

  Psf mean;
  mean.side = basis.side;
  mean.kernel = basis.mean;
  std::vector<double> beta = project_coeffs(mean, basis);
  for (double b : beta) CHECK(std::abs(b) < 1e-10);

  Psf shifted = mean;
  for (size_t p = 0; p < shifted.kernel.size(); ++p)
    shifted.kernel[p] += basis.psi[2][p];
  beta = project_coeffs(shifted, basis);
  for (int k = 0; k < basis.rank; ++k)
    CHECK(beta[k] == doctest::Approx(k == 2 ? 1.0 : 0.0).epsilon(1e-8).scale(1.0));
}

TEST_CASE("holdout reconstruction error stays below the frozen threshold") {
  PsfDictionary dict = small_dictionary(1500);
  PsfBasis basis = small_basis(dict, 100);
  PsfDictionary holdout = small_dictionary(200, 777);
  std::vector<double> errs;
  for (size_t i = 0; i < holdout.count(); ++i) {
    Psf p;
    p.side = holdout.side;
    p.kernel.assign(holdout.sample(i).begin(), holdout.sample(i).end());
    std::vector<double> rec = basis.reconstruct(project_coeffs(p, basis));
    double num = 0.0, den = 0.0;
    for (size_t k = 0; k < rec.size(); ++k) {
      double d = rec[k] - p.kernel[k];
      num += d * d;
      den += p.kernel[k] * p.kernel[k];
    }
    errs.push_back(std::sqrt(num / den));
  }
  std::nth_element(errs.begin(), errs.begin() + errs.size() / 2, errs.end());
  CHECK(errs[errs.size() / 2] < 0.05);
}

TEST_CASE("diffraction FWHM scales with f-number and image width") {
  ImagingGeometry g;
  double base = diffraction_fwhm(g);
  CHECK(base > 0.0);
  CHECK(std::isfinite(base));
  // Regression anchor for the reference geometry (500 mm, F11, 0.5 m
  // scene at 600 m, 128 px): first computed value, pinned thereafter.
  CHECK(base == doctest::Approx(1.8244).epsilon(1e-3));

  ImagingGeometry g2 = g;
  g2.f_number = 2.0 * g.f_number;
  CHECK(diffraction_fwhm(g2) == doctest::Approx(2.0 * base).epsilon(1e-12));

  ImagingGeometry g3 = g;
  g3.image_width = 2 * g.image_width;
  CHECK(diffraction_fwhm(g3) == doctest::Approx(2.0 * base).epsilon(1e-12));
}

TEST_CASE("resize by 1 is the identity; by 1/2 halves the FWHM") {
  PsfDictionary dict = small_dictionary(300);
  PsfBasis basis = small_basis(dict, 30);

  PsfBasis same = resize_basis(basis, basis.native_fwhm);
  CHECK(same.side == basis.side);
  CHECK(same.mean == basis.mean);
  for (int k = 0; k < basis.rank; ++k) CHECK(same.psi[k] == basis.psi[k]);

  PsfBasis half = resize_basis(basis, 0.5 * basis.native_fwhm);
  CHECK(half.side == 17);
  CHECK(half.resized);

  // Diffraction representation after resizing.
  Psf diff = phase_to_psf({}, test_pupil(), basis.side, basis.pad_factor);
  std::vector<double> beta = project_coeffs(diff, basis);
  Psf rep;
  rep.side = half.side;
  rep.kernel = half.reconstruct(beta);
  CHECK(measure_fwhm(rep) ==
        doctest::Approx(0.5 * basis.native_fwhm).epsilon(0.05));

  // Mass approximately preserved by the resampling.
  double mass = 0.0;
  for (double v : half.mean) mass += v;
  CHECK(mass == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("extreme shrink clamps to a delta-like 3x3 kernel") {
  PsfDictionary dict = small_dictionary(300);
  PsfBasis basis = small_basis(dict, 30);
  PsfBasis tiny = resize_basis(basis, 0.05);
  CHECK(tiny.side == 3);
  double total = 0.0;
  for (double v : tiny.mean) total += v;
  CHECK(tiny.mean[4] / total > 0.9);  // center mass dominates
}

TEST_CASE("basis files round-trip through disk") {
  PsfDictionary dict = small_dictionary(100);
  PsfBasis basis = small_basis(dict, 10);
  namespace fs = std::filesystem;
  fs::path file = fs::temp_directory_path() / "turbsyn-basis-test.bin";
  save_basis(file, basis);
  PsfBasis loaded = load_basis(file);
  CHECK(loaded.side == basis.side);
  CHECK(loaded.rank == basis.rank);
  CHECK(loaded.pupil_grid == basis.pupil_grid);
  CHECK(loaded.pad_factor == basis.pad_factor);
  CHECK(loaded.native_fwhm == doctest::Approx(basis.native_fwhm));
  CHECK(loaded.explained_energy ==
        doctest::Approx(basis.explained_energy));
  double worst = 0.0;
  for (size_t p = 0; p < basis.mean.size(); ++p)
    worst = std::max(worst, std::abs(basis.mean[p] - loaded.mean[p]));
  for (int k = 0; k < basis.rank; ++k)
    for (size_t p = 0; p < basis.psi[k].size(); ++p)
      worst = std::max(worst, std::abs(basis.psi[k][p] - loaded.psi[k][p]));
  CHECK(worst < 1e-6);  // float32 payload
  CHECK(basis_file_hash(file) != 0);
  fs::remove(file);
}

TEST_CASE("oracle vs low-rank representation on fresh draws") {
  PsfDictionary dict = small_dictionary(1500);
  PsfBasis basis = small_basis(dict, 100);
  NollCovariance noll = noll_covariance();
  Rng rng(5150);
  std::vector<double> errs;
  for (int trial = 0; trial < 40; ++trial) {
    double strength = std::exp(rng.uniform(std::log(0.1), std::log(8.0)));
    double amp = std::pow(strength, 5.0 / 6.0);
    std::vector<double> g(kNumModes), a(kNumModes, 0.0);
    for (int k = 0; k < kNumModes; ++k) g[k] = rng.next_gaussian();
    for (int r = 0; r < kNumModes; ++r) {
      double s = 0.0;
      for (int c = 0; c <= r; ++c)
        s += noll.cholesky[static_cast<size_t>(r) * kNumModes + c] * g[c];
      a[r] = amp * s;
    }
    Psf p = phase_to_psf(a, test_pupil(), 33, basis.pad_factor);
    std::vector<double> rec = basis.reconstruct(project_coeffs(p, basis));
    double num = 0.0, den = 0.0;
    for (size_t k = 0; k < rec.size(); ++k) {
      double d = rec[k] - p.kernel[k];
      num += d * d;
      den += p.kernel[k] * p.kernel[k];
    }
    errs.push_back(std::sqrt(num / den));
  }
  std::nth_element(errs.begin(), errs.begin() + errs.size() / 2, errs.end());
  CHECK(errs[errs.size() / 2] < 0.05);
}
