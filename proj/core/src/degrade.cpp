#include "turbsyn/degrade.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <thread>

#include "turbsyn/fft.hpp"
#include "turbsyn/rng.hpp"

namespace turbsyn {

namespace {

constexpr double kPi = 3.14159265358979323846;

int next_fast_size(int n) {
  for (;; ++n) {
    int m = n;
    for (int f : {2, 3, 5})
      while (m % f == 0) m /= f;
    if (m == 1) return n;
  }
}

}  // namespace

double TiltField::mean_magnitude() const {
  double sum = 0.0;
  for (size_t i = 0; i < dx.data.size(); ++i)
    sum += std::hypot(dx.data[i], dy.data[i]);
  return sum / static_cast<double>(dx.data.size());
}

double tilt_scale(const ImagingGeometry& geom) {
  return 2.0 * geom.focal_length * geom.wavelength /
         (kPi * geom.aperture_diameter() * geom.sensor_pixel_pitch());
}

TiltField tilt_from_coeffs(const Grid& a2, const Grid& a3,
                           const ImagingGeometry& geom,
                           double c_tilt_override) {
  if (a2.width != a3.width || a2.height != a3.height)
    throw ConfigError("tilt_from_coeffs: field shapes differ");
  double c = c_tilt_override > 0.0 ? c_tilt_override : tilt_scale(geom);
  TiltField t;
  t.dx = a2;
  t.dy = a3;
  for (double& v : t.dx.data) v *= c;
  for (double& v : t.dy.data) v *= c;
  return t;
}

Grid warp(const Grid& image, const TiltField& tilt) {
  if (image.width != tilt.dx.width || image.height != tilt.dx.height)
    throw ConfigError("warp: image and tilt shapes differ");
  int w = image.width, h = image.height;
  Grid out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sx = x - tilt.dx.at(x, y);
      double sy = y - tilt.dy.at(x, y);
      sx = std::clamp(sx, 0.0, w - 1.0);
      sy = std::clamp(sy, 0.0, h - 1.0);
      int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
      int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      double fx = sx - x0, fy = sy - y0;
      out.at(x, y) = (1 - fy) * ((1 - fx) * image.at(x0, y0) +
                                 fx * image.at(x1, y0)) +
                     fy * ((1 - fx) * image.at(x0, y1) +
                           fx * image.at(x1, y1));
    }
  }
  return out;
}

Image warp(const Image& image, const TiltField& tilt) {
  Image out(image.width, image.height, image.channels);
  for (int c = 0; c < image.channels; ++c) {
    Grid g = channel_to_grid(image, c);
    grid_to_channel(warp(g, tilt), out, c);
  }
  return out;
}

BetaMaps project_beta_maps(const CoefficientFields& coeffs,
                           const PsfBasis& native_basis,
                           const ZernikeBasis& pupil, int block,
                           int threads) {
  if (native_basis.resized)
    throw ConfigError("beta projection requires the native basis");
  if (pupil.grid_size != native_basis.pupil_grid)
    throw ConfigError("pupil grid does not match the basis oracle");
  int w = coeffs.width, h = coeffs.height;
  int b = std::max(block, 1);

  BetaMaps maps;
  maps.width = w;
  maps.height = h;
  maps.rank = native_basis.rank;
  maps.block = b;
  maps.planes.assign(native_basis.rank,
                     std::vector<float>(static_cast<size_t>(w) * h));

  int blocks_x = (w + b - 1) / b;
  int blocks_y = (h + b - 1) / b;
  int total = blocks_x * blocks_y;

  std::atomic<int> next{0};
  unsigned hc = std::thread::hardware_concurrency();
  int workers = threads > 0 ? threads : static_cast<int>(std::max(1u, hc));
  workers = std::min(workers, total);
  std::vector<std::future<void>> jobs;
  for (int t = 0; t < workers; ++t) {
    jobs.push_back(std::async(std::launch::async, [&]() {
      std::vector<double> a(kNumModes, 0.0);
      for (;;) {
        int idx = next.fetch_add(1);
        if (idx >= total) return;
        int bx = idx % blocks_x, by = idx / blocks_x;
        int x0 = bx * b, y0 = by * b;
        int x1 = std::min(x0 + b, w), y1 = std::min(y0 + b, h);
        int cx = std::min(x0 + b / 2, w - 1);
        int cy = std::min(y0 + b / 2, h - 1);
        for (int j = 4; j <= kNumModes; ++j) a[j - 1] = coeffs.mode(j).at(cx, cy);
        Psf psf = phase_to_psf(a, pupil, native_basis.side,
                               native_basis.pad_factor);
        std::vector<double> beta = project_coeffs(psf, native_basis);
        for (int k = 0; k < maps.rank; ++k) {
          float v = static_cast<float>(beta[k]);
          for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x)
              maps.planes[k][static_cast<size_t>(y) * w + x] = v;
        }
      }
    }));
  }
  for (auto& j : jobs) j.get();
  return maps;
}

BlurOperator::BlurOperator(const PsfBasis& resized_basis, int image_width,
                           int image_height)
    : basis_(resized_basis), width_(image_width), height_(image_height) {
  pad_ = basis_.side / 2;
  fft_w_ = next_fast_size(width_ + 2 * pad_);
  fft_h_ = next_fast_size(height_ + 2 * pad_);

  size_t n = static_cast<size_t>(fft_w_) * fft_h_;
  kernel_spectra_.resize(basis_.rank + 1);
  sum_psi_.resize(basis_.rank);

  std::vector<std::complex<double>> buf(n);
  auto spectrum = [&](const std::vector<double>& kernel) {
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    int side = basis_.side, half = side / 2;
    for (int y = 0; y < side; ++y) {
      int fy = ((y - half) % fft_h_ + fft_h_) % fft_h_;
      for (int x = 0; x < side; ++x) {
        int fx = ((x - half) % fft_w_ + fft_w_) % fft_w_;
        buf[static_cast<size_t>(fy) * fft_w_ + fx] =
            kernel[static_cast<size_t>(y) * side + x];
      }
    }
    return fft2(buf, fft_h_, fft_w_, false);
  };

  kernel_spectra_[0] = spectrum(basis_.mean);
  for (double v : basis_.mean) sum_mean_ += v;
  for (int k = 0; k < basis_.rank; ++k) {
    kernel_spectra_[k + 1] = spectrum(basis_.psi[k]);
    double s = 0.0;
    for (double v : basis_.psi[k]) s += v;
    sum_psi_[k] = s;
  }
}

std::vector<double> BlurOperator::normalization(const BetaMaps& beta) const {
  size_t npix = static_cast<size_t>(width_) * height_;
  std::vector<double> norm(npix, sum_mean_);
  for (int k = 0; k < beta.rank; ++k) {
    if (sum_psi_[k] == 0.0) continue;
    const float* plane = beta.planes[k].data();
    for (size_t p = 0; p < npix; ++p) norm[p] += sum_psi_[k] * plane[p];
  }
  for (double& v : norm) {
    if (!(v > 1e-6)) v = 1e-6;  // degenerate reconstruction guard
    v = 1.0 / v;
  }
  return norm;
}

Grid BlurOperator::pad_reflect(const Grid& g) const {
  Grid out(fft_w_, fft_h_);
  for (int y = 0; y < height_ + 2 * pad_; ++y) {
    int sy = y - pad_;
    if (sy < 0) sy = -sy;                       // reflect
    if (sy >= height_) sy = 2 * height_ - 2 - sy;
    sy = std::clamp(sy, 0, height_ - 1);
    for (int x = 0; x < width_ + 2 * pad_; ++x) {
      int sx = x - pad_;
      if (sx < 0) sx = -sx;
      if (sx >= width_) sx = 2 * width_ - 2 - sx;
      sx = std::clamp(sx, 0, width_ - 1);
      out.at(x, y) = g.at(sx, sy);
    }
  }
  return out;
}

Grid BlurOperator::scatter(const Grid& image, const BetaMaps& beta) const {
  if (image.width != width_ || image.height != height_)
    throw ConfigError("scatter: image shape mismatch");
  if (beta.rank != basis_.rank)
    throw ConfigError("scatter: beta rank does not match basis rank");

  std::vector<double> norm = normalization(beta);
  size_t n = static_cast<size_t>(fft_w_) * fft_h_;
  std::vector<std::complex<double>> accum(n, {0.0, 0.0});
  std::vector<std::complex<double>> buf(n), spec(n);

  Grid weighted(width_, height_);
  for (int k = -1; k < beta.rank; ++k) {
    const float* plane = k >= 0 ? beta.planes[k].data() : nullptr;
    for (size_t p = 0; p < weighted.data.size(); ++p) {
      double w = norm[p] * (plane ? plane[p] : 1.0);
      weighted.data[p] = w * image.data[p];
    }
    Grid padded = pad_reflect(weighted);
    for (size_t p = 0; p < n; ++p) buf[p] = padded.data[p];
    fft2(buf.data(), spec.data(), fft_h_, fft_w_, false);
    const auto& kspec = kernel_spectra_[k + 1];
    for (size_t p = 0; p < n; ++p) accum[p] += spec[p] * kspec[p];
  }

  fft2(accum.data(), buf.data(), fft_h_, fft_w_, true);
  double scale = 1.0 / (static_cast<double>(fft_w_) * fft_h_);
  Grid out(width_, height_);
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x)
      out.at(x, y) =
          buf[static_cast<size_t>(y + pad_) * fft_w_ + (x + pad_)].real() *
          scale;
  return out;
}

Grid BlurOperator::gather(const Grid& image, const BetaMaps& beta) const {
  if (image.width != width_ || image.height != height_)
    throw ConfigError("gather: image shape mismatch");
  if (beta.rank != basis_.rank)
    throw ConfigError("gather: beta rank does not match basis rank");

  std::vector<double> norm = normalization(beta);
  size_t n = static_cast<size_t>(fft_w_) * fft_h_;
  Grid padded = pad_reflect(image);
  std::vector<std::complex<double>> buf(n), spec(n), conv(n);
  for (size_t p = 0; p < n; ++p) buf[p] = padded.data[p];
  fft2(buf.data(), spec.data(), fft_h_, fft_w_, false);

  double scale = 1.0 / (static_cast<double>(fft_w_) * fft_h_);
  Grid out(width_, height_);
  for (int k = -1; k < beta.rank; ++k) {
    const auto& kspec = kernel_spectra_[k + 1];
    for (size_t p = 0; p < n; ++p) buf[p] = spec[p] * kspec[p];
    fft2(buf.data(), conv.data(), fft_h_, fft_w_, true);
    const float* plane = k >= 0 ? beta.planes[k].data() : nullptr;
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        size_t p = static_cast<size_t>(y) * width_ + x;
        double w = norm[p] * (plane ? plane[p] : 1.0);
        out.at(x, y) +=
            w *
            conv[static_cast<size_t>(y + pad_) * fft_w_ + (x + pad_)].real() *
            scale;
      }
    }
  }
  return out;
}

Image scatter_blur(const Image& image, const BetaMaps& beta,
                   const BlurOperator& op) {
  Image out(image.width, image.height, image.channels);
  for (int c = 0; c < image.channels; ++c)
    grid_to_channel(op.scatter(channel_to_grid(image, c), beta), out, c);
  return out;
}

Image gather_blur(const Image& image, const BetaMaps& beta,
                  const BlurOperator& op) {
  Image out(image.width, image.height, image.channels);
  for (int c = 0; c < image.channels; ++c)
    grid_to_channel(op.gather(channel_to_grid(image, c), beta), out, c);
  return out;
}

DegradedFrameSet degrade_frame(const Image& clean,
                               const CoefficientFields& coeffs,
                               const PsfBasis& native_basis,
                               const BlurOperator& blur,
                               const ZernikeBasis& pupil,
                               const ImagingGeometry& geom,
                               const DegradeOptions& opts) {
  if (clean.width != coeffs.width || clean.height != coeffs.height)
    throw ConfigError("degrade_frame: image and coefficient shapes differ");

  DegradedFrameSet out;
  out.clean = clean;
  out.tilt = tilt_from_coeffs(coeffs.mode(2), coeffs.mode(3), geom,
                              opts.c_tilt_override);
  out.d_bar = out.tilt.mean_magnitude();
  out.tilt_only = warp(clean, out.tilt);

  BetaMaps beta = project_beta_maps(coeffs, native_basis, pupil,
                                    opts.beta_block, opts.projection_threads);
  out.full = scatter_blur(out.tilt_only, beta, blur);

  if (opts.noise_sigma > 0.0) {
    Rng rng = make_stream(opts.master_seed, opts.video_id,
                          static_cast<uint64_t>(opts.frame_index), 0,
                          StreamTag::kImageNoise);
    for (float& v : out.full.data)
      v += static_cast<float>(opts.noise_sigma * rng.next_gaussian());
  }
  if (opts.clamp_output) {
    for (float& v : out.full.data) v = std::clamp(v, 0.0f, 1.0f);
    for (float& v : out.tilt_only.data) v = std::clamp(v, 0.0f, 1.0f);
  }
  if (opts.keep_beta) out.beta = std::move(beta);
  return out;
}

}  // namespace turbsyn
