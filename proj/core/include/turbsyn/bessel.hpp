#pragma once

#include <vector>

namespace turbsyn {

// Bessel function of the first kind, J_n(x), n >= 0, x >= 0.
// Power series below x = 15, Hankel asymptotic expansion above; higher
// orders by forward recurrence (n <= x) or Miller's downward recurrence.
// Accurate to ~1e-11 absolute; roughly 50x faster than std::cyl_bessel_j
// in the mid-argument range, which dominates the covariance quadrature.
double bessel_j(int n, double x);

// Fills out[0..nmax] with J_0(x)..J_nmax(x) in one recurrence pass.
void bessel_j_column(int nmax, double x, double* out);

struct QuadratureOptions {
  double rel_tol = 1e-8;
  // Values below this are converged regardless of relative error; the
  // kernel integrals of interest sit at 1e-4..1e-1, so 1e-12 is noise.
  double abs_tol = 1e-12;
  // Initial panel density multiplier; 2 halves panel widths everywhere.
  int resolution = 1;
  // Truncate where 1/(x(x^2+k0)^2) falls below this fraction of its value
  // at x = 1 (the first Bessel-product lobe).
  double envelope_cutoff = 1e-12;
  long max_leaf_evals = 4'000'000;
};

// Integral of J_a(s x) J_b(x) J_c(x) / (x (x^2 + k0)^2) over x in (0, inf),
// truncated by the envelope rule and integrated with globally adaptive
// Simpson panels. Throws NumericError (message carries the partial sum and
// error bound) if the panel budget is exhausted before convergence.
double bessel_triple_integral(int a, int b, int c, double s, double k0,
                              const QuadratureOptions& opts = {});

}  // namespace turbsyn
