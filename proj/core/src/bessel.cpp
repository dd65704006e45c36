#include "turbsyn/bessel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "turbsyn/image.hpp"

namespace turbsyn {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kSeriesAsymptoticSwitch = 15.0;

// Power series around 0; usable up to x ~ 16 in double precision.
double j0_series(double x) {
  double q = 0.25 * x * x;
  double term = 1.0, sum = 1.0;
  for (int k = 1; k <= 64; ++k) {
    term *= -q / (static_cast<double>(k) * k);
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum) + 1e-300) break;
  }
  return sum;
}

double j1_series(double x) {
  double q = 0.25 * x * x;
  double term = 1.0, sum = 1.0;
  for (int k = 1; k <= 64; ++k) {
    term *= -q / (static_cast<double>(k) * (k + 1));
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum) + 1e-300) break;
  }
  return 0.5 * x * sum;
}

// Hankel asymptotic expansion for nu in {0, 1}, x >= ~15.
double j_asymptotic(int nu, double x) {
  double mu = 4.0 * nu * nu;
  double p = 1.0, q = 0.0;
  double term = 1.0;
  double prev_mag = 1e308;
  for (int k = 1; k <= 14; ++k) {
    term *= (mu - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (k * 8.0 * x);
    double mag = std::abs(term);
    if (mag >= prev_mag) break;  // divergent tail of the asymptotic series
    prev_mag = mag;
    int phase = (k % 4);
    // (-1)^{k/2} pattern folded into the two cosine/sine sums.
    if (phase == 1) q += term;
    else if (phase == 2) p -= term;
    else if (phase == 3) q -= term;
    else p += term;
    if (mag < 1e-17) break;
  }
  double omega = x - (2.0 * nu + 1.0) * kPi / 4.0;
  return std::sqrt(2.0 / (kPi * x)) * (p * std::cos(omega) - q * std::sin(omega));
}

double j0(double x) {
  return x < kSeriesAsymptoticSwitch ? j0_series(x) : j_asymptotic(0, x);
}
double j1(double x) {
  return x < kSeriesAsymptoticSwitch ? j1_series(x) : j_asymptotic(1, x);
}

void column_miller(int nmax, double x, double* out) {
  // Downward recurrence, normalized by J_0 + 2 sum J_{2k} = 1.
  int m = nmax + 24 + static_cast<int>(std::ceil(0.5 * x));
  if (m % 2) ++m;
  double jp = 0.0, jc = 1e-30;
  double norm = 0.0;
  for (int k = m; k >= 1; --k) {
    double jm = (2.0 * k / x) * jc - jp;
    jp = jc;
    jc = jm;
    if (k - 1 <= nmax) out[k - 1] = jc;
    if (((k - 1) % 2) == 0) norm += (k == 1 ? 1.0 : 2.0) * jc;
    if (std::abs(jc) > 1e250) {  // rescale to avoid overflow
      jc *= 1e-250;
      jp *= 1e-250;
      norm *= 1e-250;
      // Entries written so far are the high orders k-1..nmax.
      for (int i = std::max(0, k - 1); i <= nmax; ++i) out[i] *= 1e-250;
    }
  }
  for (int i = 0; i <= nmax; ++i) out[i] /= norm;
}

}  // namespace

void bessel_j_column(int nmax, double x, double* out) {
  if (x == 0.0) {
    out[0] = 1.0;
    for (int i = 1; i <= nmax; ++i) out[i] = 0.0;
    return;
  }
  if (nmax == 0) {
    out[0] = j0(x);
    return;
  }
  if (x >= nmax) {
    out[0] = j0(x);
    out[1] = j1(x);
    for (int k = 1; k < nmax; ++k)
      out[k + 1] = (2.0 * k / x) * out[k] - out[k - 1];
    return;
  }
  column_miller(nmax, x, out);
}

double bessel_j(int n, double x) {
  if (x == 0.0) return n == 0 ? 1.0 : 0.0;
  if (n == 0) return j0(x);
  if (n == 1) return j1(x);
  if (x >= n) {
    double jm = j0(x), jc = j1(x);
    for (int k = 1; k < n; ++k) {
      double jn = (2.0 * k / x) * jc - jm;
      jm = jc;
      jc = jn;
    }
    return jc;
  }
  std::vector<double> col(n + 1);
  column_miller(n, x, col.data());
  return col[n];
}

namespace {

struct TripleIntegrand {
  int a, b, c;
  double s, k0;
  int nmax;

  double operator()(double x) const {
    if (x <= 0.0) return 0.0;
    double col[20];
    bessel_j_column(nmax, x, col);
    double jb = col[b], jc = col[c];
    double ja = (a == 0 && s == 0.0) ? 1.0 : bessel_j(a, s * x);
    double d = x * x + k0;
    return ja * jb * jc / (x * d * d);
  }
};

struct Panel {
  double x0, x2;        // edges
  double f0, f1, f2;    // integrand at edges and midpoint
  double estimate;      // Simpson estimate
  double error;         // |S(fine) - S(coarse)| from last refinement
};

double simpson(double x0, double x2, double f0, double f1, double f2) {
  return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2);
}

}  // namespace

double bessel_triple_integral(int a, int b, int c, double s, double k0,
                              const QuadratureOptions& opts) {
  if (a < 0 || b < 0 || c < 0) throw NumericError("bessel orders must be >= 0");
  if (s < 0.0) throw NumericError("separation s must be >= 0");
  if (k0 <= 0.0)
    throw NumericError("k0 must be > 0 (integral diverges at k0 = 0)");
  if (s == 0.0 && a > 0) return 0.0;  // J_a(0) = 0 kills the integrand

  TripleIntegrand f{a, b, c, s, k0, std::max(b, c)};

  // Envelope-based truncation: solve x (x^2+k0)^2 = env_ref / cutoff.
  double env_ref = 1.0 / ((1.0 + k0) * (1.0 + k0));
  double x_max = std::pow(env_ref / opts.envelope_cutoff, 0.2);
  for (int it = 0; it < 40; ++it) {
    double d = x_max * x_max + k0;
    double g = 1.0 / (x_max * d * d);
    if (g <= opts.envelope_cutoff * env_ref * (1.0 + 1e-9)) break;
    x_max *= 1.05;
  }

  // Initial panels: geometric ladder through the small-x peak (scale
  // sqrt(k0)), then oscillation-resolving uniform panels.
  std::vector<double> edges;
  double x_small = std::min(1e-4, std::sqrt(k0) / 8.0);
  edges.push_back(0.0);
  for (double e = x_small; e < 1.0; e *= 1.6) edges.push_back(e);
  double wavelength = kPi / (1.0 + std::max(s, 1.0));
  double width = std::max(wavelength / opts.resolution, x_max / 2e5);
  for (double e = 1.0; e < x_max; e += width) edges.push_back(e);
  edges.push_back(x_max);

  std::vector<Panel> panels;
  panels.reserve(edges.size() + 256);
  long evals = 0;
  auto make_panel = [&](double x0, double x2) {
    double xm = 0.5 * (x0 + x2);
    Panel p;
    p.x0 = x0;
    p.x2 = x2;
    p.f0 = f(x0);
    p.f1 = f(xm);
    p.f2 = f(x2);
    evals += 3;
    p.estimate = simpson(x0, x2, p.f0, p.f1, p.f2);
    p.error = std::abs(p.estimate);  // refined below
    return p;
  };
  for (size_t i = 0; i + 1 < edges.size(); ++i)
    panels.push_back(make_panel(edges[i], edges[i + 1]));

  // Globally adaptive bisection: split the worst panel until the summed
  // error estimate meets the relative tolerance.
  auto refine = [&](Panel& p, Panel& right) {
    double xm = 0.5 * (p.x0 + p.x2);
    double xl = 0.5 * (p.x0 + xm), xr = 0.5 * (xm + p.x2);
    double fl = f(xl), fr = f(xr);
    evals += 2;
    Panel left{p.x0, xm, p.f0, fl, p.f1, 0.0, 0.0};
    left.estimate = simpson(left.x0, left.x2, left.f0, left.f1, left.f2);
    right = Panel{xm, p.x2, p.f1, fr, p.f2, 0.0, 0.0};
    right.estimate = simpson(right.x0, right.x2, right.f0, right.f1, right.f2);
    double fine = left.estimate + right.estimate;
    double err = std::abs(fine - p.estimate) / 15.0;
    left.error = right.error = 0.5 * err;
    p = left;
  };

  // First refinement pass gives every panel a real error estimate.
  {
    size_t n0 = panels.size();
    panels.resize(2 * n0);
    for (size_t i = n0; i-- > 0;) {
      Panel p = panels[i];
      Panel right;
      refine(p, right);
      panels[2 * i] = p;
      panels[2 * i + 1] = right;
    }
  }

  auto by_error = [&](size_t l, size_t r) {
    return panels[l].error < panels[r].error;
  };
  std::vector<size_t> heap(panels.size());
  for (size_t i = 0; i < heap.size(); ++i) heap[i] = i;
  std::make_heap(heap.begin(), heap.end(), by_error);

  double total = 0.0, total_err = 0.0, total_abs = 0.0;
  for (const Panel& p : panels) {
    total += p.estimate;
    total_err += p.error;
    total_abs += std::abs(p.estimate);
  }

  long since_resum = 0;
  for (;;) {
    // Near-total cancellation leaves |total| far below the integrand's
    // own magnitude; tolerances are taken against the larger scale.
    double scale = std::max({std::abs(total), 1e-6 * total_abs, 1e-14});
    if (total_err <= std::max(opts.rel_tol * scale, opts.abs_tol))
      return total;
    if (evals > opts.max_leaf_evals) {
      std::ostringstream msg;
      msg << "bessel_triple_integral(" << a << "," << b << "," << c
          << "; s=" << s << ", k0=" << k0
          << ") did not converge: partial=" << total
          << " error_bound=" << total_err << " evals=" << evals;
      throw NumericError(msg.str());
    }
    std::pop_heap(heap.begin(), heap.end(), by_error);
    size_t i = heap.back();
    heap.pop_back();

    total -= panels[i].estimate;
    total_err -= panels[i].error;
    total_abs -= std::abs(panels[i].estimate);
    Panel right;
    refine(panels[i], right);
    panels.push_back(right);
    total += panels[i].estimate + right.estimate;
    total_err += panels[i].error + right.error;
    total_abs += std::abs(panels[i].estimate) + std::abs(right.estimate);

    heap.push_back(i);
    std::push_heap(heap.begin(), heap.end(), by_error);
    heap.push_back(panels.size() - 1);
    std::push_heap(heap.begin(), heap.end(), by_error);

    // Incremental sums drift; refresh periodically.
    if (++since_resum >= 4096) {
      since_resum = 0;
      total = total_err = total_abs = 0.0;
      for (const Panel& p : panels) {
        total += p.estimate;
        total_err += p.error;
        total_abs += std::abs(p.estimate);
      }
    }
  }
}

}  // namespace turbsyn
