#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "turbsyn/zernike.hpp"

using namespace turbsyn;
using namespace turbsyn::test;

TEST_CASE("noll_to_nm matches the stated low-order entries") {
  NollIndex j1 = noll_to_nm(1);
  CHECK(j1.n == 0);
  CHECK(j1.m == 0);
  CHECK(j1.trig == Trig::kNone);

  NollIndex j4 = noll_to_nm(4);
  CHECK(j4.n == 2);
  CHECK(j4.m == 0);

  NollIndex j11 = noll_to_nm(11);
  CHECK(j11.n == 4);
  CHECK(j11.m == 0);
}

TEST_CASE("Noll enumeration is a bijection against the closed-form oracle") {
  for (int j = 1; j <= kNumModes; ++j) {
    NollIndex idx = noll_to_nm(j);
    CHECK(idx.j == j);
    CHECK(idx.n >= idx.m);
    CHECK((idx.n - idx.m) % 2 == 0);
    int back = noll_j_oracle(idx.n, idx.m, idx.trig == Trig::kSin);
    CHECK(back == j);
  }
}

TEST_CASE("out-of-range Noll indices raise an index error") {
  CHECK_THROWS_AS(noll_to_nm(0), std::out_of_range);
  CHECK_THROWS_AS(noll_to_nm(37), std::out_of_range);
}

TEST_CASE("piston is constant 1 inside the mask") {
  ZernikeBasis basis = evaluate_basis(64);
  for (size_t p = 0; p < basis.mask.size(); ++p) {
    if (basis.mask[p])
      CHECK(basis.modes[0].data[p] == doctest::Approx(1.0).epsilon(1e-12));
    else
      CHECK(basis.modes[0].data[p] == 0.0);
  }
}

TEST_CASE("defocus value at the disk center is -sqrt(3)") {
  CHECK(zernike_value(noll_to_nm(4), 0.0, 0.3) ==
        doctest::Approx(-std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("defocus self inner product is 1 within quadrature tolerance") {
  ZernikeBasis basis = evaluate_basis(256);
  CHECK(basis.inner(4, 4) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("grid too small or odd is rejected") {
  CHECK_THROWS_AS(evaluate_basis(8), ConfigError);
  CHECK_THROWS_AS(evaluate_basis(33), ConfigError);
}

TEST_CASE("orthonormality residual decreases as the grid doubles") {
  double prev = 1e9;
  for (int grid : {64, 128, 256, 512}) {
    ZernikeBasis basis = evaluate_basis(grid);
    double worst = 0.0;
    for (int i = 1; i <= kNumModes; ++i)
      for (int j = i + 1; j <= kNumModes; ++j)
        worst = std::max(worst, std::abs(basis.inner(i, j)));
    CHECK(worst < prev);
    prev = worst;
  }
  CHECK(prev < 2e-3);
}

TEST_CASE("covariance zero pattern: mismatched azimuthal symmetry vanishes") {
  NollCovariance cov = noll_covariance();
  // Tilt (cos, m=1) vs oblique astigmatism (sin, m=2).
  CHECK(cov.at(2, 5) == 0.0);
  for (int i = 2; i <= kNumModes; ++i) {
    NollIndex a = noll_to_nm(i);
    for (int j = 2; j <= kNumModes; ++j) {
      NollIndex b = noll_to_nm(j);
      bool same_symmetry = (a.m == b.m) && (a.trig == b.trig);
      if (!same_symmetry) CHECK(cov.at(i, j) == 0.0);
      if (i == j) CHECK(cov.at(i, j) > 0.0);
    }
  }
}

TEST_CASE("covariance matrix is exactly symmetric") {
  NollCovariance cov = noll_covariance();
  for (int i = 1; i <= kNumModes; ++i)
    for (int j = 1; j <= kNumModes; ++j)
      CHECK(cov.at(i, j) == cov.at(j, i));
}

TEST_CASE("strength scaling follows the 5/3 power law") {
  CHECK(strength_scale(2.0) == doctest::Approx(std::pow(2.0, 5.0 / 3.0)));
  NollCovariance cov = noll_covariance();
  double scale = strength_scale(2.0);
  for (int i = 2; i <= kNumModes; ++i)
    for (int j = 2; j <= kNumModes; ++j)
      if (cov.at(i, j) != 0.0)
        CHECK((cov.at(i, j) * scale) / cov.at(i, j) ==
              doctest::Approx(scale).epsilon(1e-12));
}

TEST_CASE("Cholesky factor reproduces the matrix to 1e-10 relative") {
  NollCovariance cov = noll_covariance();
  double num = 0.0, den = 0.0;
  for (int i = 0; i < kNumModes; ++i) {
    for (int j = 0; j < kNumModes; ++j) {
      double r = 0.0;
      for (int k = 0; k < kNumModes; ++k)
        r += cov.cholesky[i * kNumModes + k] * cov.cholesky[j * kNumModes + k];
      double d = r - cov.matrix[i * kNumModes + j];
      num += d * d;
      den += cov.matrix[i * kNumModes + j] * cov.matrix[i * kNumModes + j];
    }
  }
  CHECK(std::sqrt(num / den) < 1e-10);
}

TEST_CASE("noll covariance entries match the spectral quadrature oracle") {
  // Same-symmetry pairs at s = 0; one global proportionality constant.
  NollCovariance cov = noll_covariance(kNumModes, 1e-3);
  double ref_ratio = 0.0;
  for (auto [i, j] : {std::pair{2, 2}, {4, 4}, {4, 11}, {2, 8}, {6, 6},
                      {5, 13}, {11, 22}}) {
    double oracle = spectral_covariance_oracle(i, j, 0.0, 0.0, 1e-3);
    double mine = cov.at(i, j);
    REQUIRE(mine != 0.0);
    double ratio = oracle / mine;
    if (ref_ratio == 0.0) {
      ref_ratio = ratio;
      CHECK(ratio > 0.0);
    } else {
      CHECK(ratio == doctest::Approx(ref_ratio).epsilon(5e-3));
    }
  }
}
