#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "turbsyn/bessel.hpp"
#include "turbsyn/image.hpp"

using namespace turbsyn;

TEST_CASE("bessel_j matches the standard library across orders and ranges") {
  double worst = 0.0;
  for (int n = 0; n <= 15; ++n) {
    for (double x = 0.0; x <= 300.0; x += 0.217) {
      double err = std::abs(bessel_j(n, x) - std::cyl_bessel_j(double(n), x));
      worst = std::max(worst, err);
    }
  }
  CHECK(worst < 5e-10);
}

TEST_CASE("bessel_j_column agrees with individual evaluations") {
  for (double x : {0.0, 0.02, 0.9, 4.7, 13.0, 40.0}) {
    double col[16];
    bessel_j_column(15, x, col);
    for (int n = 0; n <= 15; ++n)
      CHECK(std::abs(col[n] - std::cyl_bessel_j(double(n), x)) < 1e-10);
  }
}

TEST_CASE("zero separation kills the integrand for a > 0") {
  CHECK(bessel_triple_integral(2, 2, 2, 0.0, 1e-3) == 0.0);
  CHECK(bessel_triple_integral(1, 3, 5, 0.0, 1e-3) == 0.0);
  CHECK(bessel_triple_integral(0, 2, 2, 0.0, 1e-3) > 0.0);
}

TEST_CASE("self-convergence: doubling resolution moves the value < 1e-6") {
  QuadratureOptions coarse;
  QuadratureOptions fine;
  fine.resolution = 2;
  fine.rel_tol = 1e-10;
  for (double s : {0.0, 0.7, 3.0}) {
    double v1 = bessel_triple_integral(0, 2, 2, s, 1e-3, coarse);
    double v2 = bessel_triple_integral(0, 2, 2, s, 1e-3, fine);
    CHECK(std::abs(v1 - v2) <= 1e-6 * std::max(std::abs(v2), 1e-12));
  }
}

TEST_CASE("oscillatory decay: I -> 0 as s grows, monotone at the probes") {
  double k0 = 2.856e-4;
  double v5 = std::abs(bessel_triple_integral(2, 3, 3, 5.0, k0));
  double v10 = std::abs(bessel_triple_integral(2, 3, 3, 10.0, k0));
  double v20 = std::abs(bessel_triple_integral(2, 3, 3, 20.0, k0));
  CHECK(v5 > v10);
  CHECK(v10 > v20);
  CHECK(v20 < 0.2 * std::abs(bessel_triple_integral(2, 3, 3, 0.5, k0)));
}

TEST_CASE("k0 = 0 is rejected (divergent low-order integrals)") {
  CHECK_THROWS_AS(bessel_triple_integral(0, 2, 2, 0.0, 0.0), NumericError);
  CHECK_THROWS_AS(bessel_triple_integral(0, 2, 2, 1.0, -1e-3), NumericError);
}

TEST_CASE("panel-budget exhaustion reports a partial sum") {
  QuadratureOptions tiny;
  tiny.max_leaf_evals = 50;
  tiny.rel_tol = 1e-14;
  try {
    bessel_triple_integral(0, 2, 2, 12.0, 1e-4, tiny);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    std::string msg = e.what();
    CHECK(msg.find("partial=") != std::string::npos);
    CHECK(msg.find("error_bound=") != std::string::npos);
  }
}

TEST_CASE("determinism: identical inputs give bit-identical values") {
  double a = bessel_triple_integral(1, 2, 4, 2.345, 7.7e-4);
  double b = bessel_triple_integral(1, 2, 4, 2.345, 7.7e-4);
  CHECK(a == b);
}
