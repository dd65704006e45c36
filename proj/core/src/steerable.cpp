#include "turbsyn/steerable.hpp"

#include <cmath>

#include "turbsyn/fft.hpp"

namespace turbsyn {

namespace {

constexpr double kPi = 3.14159265358979323846;

int pad_to_multiple(int n, int m) { return ((n + m - 1) / m) * m; }

// Widths tuned so subband coefficients decorrelate within a couple of
// samples (white-noise pairs then score near zero under 7x7 windows).
constexpr double kRadialWidthOctaves = 1.1;
constexpr double kAngularExponent = 2.0;

double radial_window(double r, double center) {
  if (r <= 0.0) return 0.0;
  double t = std::log2(r / center) / kRadialWidthOctaves;
  if (t <= -1.0 || t >= 1.0) return 0.0;
  return std::cos(0.5 * kPi * t);
}

double angular_window(double theta, double center, int orientations) {
  (void)orientations;
  double d = std::remainder(theta - center, 2.0 * kPi);
  double c = std::cos(d);
  if (c <= 0.0) return 0.0;  // analytic half-plane
  return std::pow(c, kAngularExponent);
}

}  // namespace

std::vector<std::vector<ComplexSubband>> steerable_decompose(
    const Grid& image, int levels, int orientations) {
  if (levels < 1 || orientations < 1)
    throw ConfigError("steerable_decompose: bad level/orientation count");
  int mult = 1 << (levels - 1);
  int w = pad_to_multiple(image.width, mult);
  int h = pad_to_multiple(image.height, mult);
  int min_dim = std::min(w, h) >> (levels - 1);
  if (min_dim < 2)
    throw ConfigError("image too small for the level count");

  // Reflect-pad on the bottom/right edges.
  std::vector<std::complex<double>> buf(static_cast<size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    int sy = y < image.height ? y : 2 * image.height - 2 - y;
    sy = std::clamp(sy, 0, image.height - 1);
    for (int x = 0; x < w; ++x) {
      int sx = x < image.width ? x : 2 * image.width - 2 - x;
      sx = std::clamp(sx, 0, image.width - 1);
      buf[static_cast<size_t>(y) * w + x] = image.at(sx, sy);
    }
  }
  std::vector<std::complex<double>> spectrum = fft2(buf, h, w, false);

  std::vector<std::vector<ComplexSubband>> out(levels);
  std::vector<std::complex<double>> windowed(spectrum.size());
  for (int level = 1; level <= levels; ++level) {
    double band_center = kPi / (1 << level);
    int dec = 1 << (level - 1);
    int dw = w / dec, dh = h / dec;
    out[level - 1].resize(orientations);
    for (int o = 0; o < orientations; ++o) {
      double theta_o = kPi * o / orientations;
      for (int fy = 0; fy < h; ++fy) {
        double wy = 2.0 * kPi * (fy <= h / 2 ? fy : fy - h) / h;
        for (int fx = 0; fx < w; ++fx) {
          double wx = 2.0 * kPi * (fx <= w / 2 ? fx : fx - w) / w;
          double r = std::hypot(wx, wy);
          double win = radial_window(r, band_center);
          if (win != 0.0)
            win *= angular_window(std::atan2(wy, wx), theta_o, orientations);
          windowed[static_cast<size_t>(fy) * w + fx] =
              win != 0.0 ? spectrum[static_cast<size_t>(fy) * w + fx] * win
                         : std::complex<double>(0.0, 0.0);
        }
      }
      // Fold aliases onto the decimated grid, then a small inverse FFT.
      std::vector<std::complex<double>> folded(
          static_cast<size_t>(dw) * dh, {0.0, 0.0});
      for (int fy = 0; fy < h; ++fy)
        for (int fx = 0; fx < w; ++fx)
          folded[static_cast<size_t>(fy % dh) * dw + (fx % dw)] +=
              windowed[static_cast<size_t>(fy) * w + fx];

      ComplexSubband band;
      band.width = dw;
      band.height = dh;
      band.values = fft2(folded, dh, dw, true);
      double norm = 1.0 / (static_cast<double>(w) * h);
      for (auto& v : band.values) v *= norm;
      out[level - 1][o] = std::move(band);
    }
  }
  return out;
}

}  // namespace turbsyn
