#include "turbsyn/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "turbsyn/steerable.hpp"

namespace turbsyn {

namespace {

void check_shapes(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ConfigError("metric inputs have different shapes");
  if (a.data.empty()) throw ConfigError("metric inputs are empty");
}

// Separable Gaussian smoothing with reflected borders.
Grid gaussian_smooth(const Grid& g, const std::vector<double>& taps) {
  int w = g.width, h = g.height;
  int half = static_cast<int>(taps.size()) / 2;
  Grid tmp(w, h), out(w, h);
  auto reflect = [](int i, int n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
    return std::clamp(i, 0, n - 1);
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int t = -half; t <= half; ++t)
        s += taps[t + half] * g.at(reflect(x + t, w), y);
      tmp.at(x, y) = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int t = -half; t <= half; ++t)
        s += taps[t + half] * tmp.at(x, reflect(y + t, h));
      out.at(x, y) = s;
    }
  return out;
}

std::vector<double> gaussian_taps(int size, double sigma) {
  std::vector<double> taps(size);
  int half = size / 2;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    double d = i - half;
    taps[i] = std::exp(-0.5 * d * d / (sigma * sigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

}  // namespace

double psnr(const Image& a, const Image& b, double peak) {
  check_shapes(a, b);
  if (!(peak > 0.0)) throw ConfigError("psnr: peak must be > 0");
  double mse = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double d = static_cast<double>(a.data[i]) - b.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.data.size());
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

double ssim(const Image& a, const Image& b, double peak) {
  check_shapes(a, b);
  Grid ga = channel_to_grid(to_luma(a), 0);
  Grid gb = channel_to_grid(to_luma(b), 0);

  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  auto taps = gaussian_taps(11, 1.5);

  Grid aa(ga.width, ga.height), bb(ga.width, ga.height),
      ab(ga.width, ga.height);
  for (size_t i = 0; i < ga.data.size(); ++i) {
    aa.data[i] = ga.data[i] * ga.data[i];
    bb.data[i] = gb.data[i] * gb.data[i];
    ab.data[i] = ga.data[i] * gb.data[i];
  }
  Grid mu_a = gaussian_smooth(ga, taps);
  Grid mu_b = gaussian_smooth(gb, taps);
  Grid s_aa = gaussian_smooth(aa, taps);
  Grid s_bb = gaussian_smooth(bb, taps);
  Grid s_ab = gaussian_smooth(ab, taps);

  double total = 0.0;
  for (size_t i = 0; i < ga.data.size(); ++i) {
    double ma = mu_a.data[i], mb = mu_b.data[i];
    double va = s_aa.data[i] - ma * ma;
    double vb = s_bb.data[i] - mb * mb;
    double cov = s_ab.data[i] - ma * mb;
    total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
             ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(ga.data.size());
}

double cw_ssim(const Image& a, const Image& b, const CwSsimOptions& opts) {
  check_shapes(a, b);
  if (a.width < 64 || a.height < 64)
    throw ConfigError("cw_ssim requires images of at least 64x64");
  Grid ga = channel_to_grid(to_luma(a), 0);
  Grid gb = channel_to_grid(to_luma(b), 0);

  auto bands_a = steerable_decompose(ga, opts.levels, opts.orientations);
  auto bands_b = steerable_decompose(gb, opts.levels, opts.orientations);

  double total = 0.0;
  long count = 0;
  for (int l = 0; l < opts.levels; ++l) {
    for (int o = 0; o < opts.orientations; ++o) {
      const ComplexSubband& sa = bands_a[l][o];
      const ComplexSubband& sb = bands_b[l][o];
      int win = std::min({opts.window, sa.width, sa.height});
      double band_total = 0.0;
      int band_count = 0;
      for (int y = 0; y + win <= sa.height; ++y) {
        for (int x = 0; x + win <= sa.width; ++x) {
          std::complex<double> cross{0.0, 0.0};
          double ea = 0.0, eb = 0.0;
          for (int wy = 0; wy < win; ++wy) {
            size_t row = static_cast<size_t>(y + wy) * sa.width + x;
            for (int wx = 0; wx < win; ++wx) {
              std::complex<double> va = sa.values[row + wx];
              std::complex<double> vb = sb.values[row + wx];
              cross += va * std::conj(vb);
              ea += std::norm(va);
              eb += std::norm(vb);
            }
          }
          band_total += (2.0 * std::abs(cross) + opts.stabilizer) /
                        (ea + eb + opts.stabilizer);
          ++band_count;
        }
      }
      // Pool over all windows (like the SSIM map mean); fine levels carry
      // their full window count.
      total += band_total;
      count += band_count;
    }
  }
  if (count == 0) throw ConfigError("cw_ssim: no usable subbands");
  return total / static_cast<double>(count);
}

double charbonnier(const Image& a, const Image& b, double epsilon) {
  check_shapes(a, b);
  if (!(epsilon > 0.0)) throw ConfigError("charbonnier: epsilon must be > 0");
  double sum = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double d = static_cast<double>(a.data[i]) - b.data[i];
    sum += std::sqrt(d * d + epsilon * epsilon);
  }
  return sum / static_cast<double>(a.data.size());
}

MetricReport evaluate_metrics(const Image& a, const Image& b, double peak,
                              double charbonnier_eps,
                              const CwSsimOptions& cw) {
  MetricReport r;
  r.psnr = psnr(a, b, peak);
  r.ssim = ssim(a, b, peak);
  r.cw_ssim = cw_ssim(a, b, cw);
  r.charbonnier = charbonnier(a, b, charbonnier_eps);
  return r;
}

double fitted_slope(const std::vector<double>& x,
                    const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw ConfigError("fitted_slope needs matching vectors of length >= 2");
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - mx) * (y[i] - my);
    den += (x[i] - mx) * (x[i] - mx);
  }
  if (den == 0.0) throw NumericError("fitted_slope: degenerate x values");
  return num / den;
}

}  // namespace turbsyn
