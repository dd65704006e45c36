#include "turbsyn/field_synthesis.hpp"

#include <cmath>

#include "turbsyn/fft.hpp"

namespace turbsyn {

SeedField make_seed(int width, int height, uint64_t master_seed,
                    uint64_t video_id, int mode) {
  SeedField s;
  s.width = width;
  s.height = height;
  s.frame_index = 0;
  s.values.resize(static_cast<size_t>(width) * height);
  Rng rng = make_stream(master_seed, video_id, 0, mode, StreamTag::kSeedInit);
  for (auto& v : s.values) {
    double re = rng.next_gaussian();
    double im = rng.next_gaussian();
    v = {re, im};
  }
  return s;
}

TemporalChain TemporalChain::start(double alpha, int width, int height,
                                   uint64_t master_seed, uint64_t video_id,
                                   int mode) {
  if (alpha < 0.0 || alpha > 1.0)
    throw ConfigError("temporal alpha must be in [0, 1], got " +
                      std::to_string(alpha));
  TemporalChain c;
  c.alpha = alpha;
  c.master_seed = master_seed;
  c.video_id = video_id;
  c.mode = mode;
  c.seed = make_seed(width, height, master_seed, video_id, mode);
  return c;
}

const SeedField& TemporalChain::advance() {
  ++seed.frame_index;
  if (alpha == 1.0) return seed;  // frozen turbulence, seed unchanged
  double keep = alpha;
  double innov = std::sqrt(1.0 - alpha * alpha);
  Rng rng = make_stream(master_seed, video_id,
                        static_cast<uint64_t>(seed.frame_index), mode,
                        StreamTag::kSeedInnovation);
  for (auto& v : seed.values) {
    double re = keep * v.real() + innov * rng.next_gaussian();
    double im = keep * v.imag() + innov * rng.next_gaussian();
    v = {re, im};
  }
  return seed;
}

Grid sample_field(const std::vector<double>& psd, const SeedField& seed) {
  Grid out(seed.width, seed.height);
  if (psd.empty()) return out;
  if (psd.size() != seed.values.size())
    throw ConfigError("sample_field: PSD and seed shapes differ");

  size_t n = psd.size();
  bool all_zero = true;
  std::vector<std::complex<double>> spec(n);
  for (size_t i = 0; i < n; ++i) {
    if (psd[i] < 0.0) throw NumericError("sample_field: negative PSD entry");
    if (psd[i] > 0.0) all_zero = false;
    spec[i] = std::sqrt(psd[i]) * seed.values[i];
  }
  if (all_zero) return out;

  std::vector<std::complex<double>> field(n);
  fft2(spec.data(), field.data(), seed.height, seed.width, true);
  double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (size_t i = 0; i < n; ++i) out.data[i] = field[i].real() * norm;
  return out;
}

CoefficientFields mix_modes(std::vector<Grid> fields,
                            const std::vector<double>& cholesky_lower) {
  if (fields.size() != kNumModes)
    throw ConfigError("mix_modes expects 36 fields");
  size_t npix = fields[0].size();
  for (const Grid& g : fields)
    if (g.size() != npix) throw ConfigError("mix_modes: field shape mismatch");

  CoefficientFields out;
  out.width = fields[0].width;
  out.height = fields[0].height;
  out.a.assign(kNumModes, Grid(out.width, out.height));
  for (int i = 0; i < kNumModes; ++i) {
    Grid& dst = out.a[i];
    for (int k = 0; k <= i; ++k) {
      double l = cholesky_lower[static_cast<size_t>(i) * kNumModes + k];
      if (l == 0.0) continue;
      const double* src = fields[k].data.data();
      double* d = dst.data.data();
      for (size_t p = 0; p < npix; ++p) d[p] += l * src[p];
    }
  }
  return out;
}

FieldSynthesizer::FieldSynthesizer(const CovarianceField& field,
                                   uint64_t master_seed, uint64_t video_id,
                                   double temporal_alpha,
                                   double strength_scale)
    : field_(field), scaled_cholesky_(field.cholesky()) {
  if (!(strength_scale > 0.0))
    throw ConfigError("strength_scale must be > 0");
  if (strength_scale != 1.0) {
    double amp = std::sqrt(strength_scale);
    for (double& v : scaled_cholesky_) v *= amp;
  }
  chains_.reserve(kNumModes - 1);
  for (int mode = 2; mode <= kNumModes; ++mode)
    chains_.push_back(TemporalChain::start(temporal_alpha,
                                           field.geometry().image_width,
                                           field.geometry().image_height,
                                           master_seed, video_id, mode));
}

CoefficientFields FieldSynthesizer::next_frame() {
  int w = field_.geometry().image_width;
  int h = field_.geometry().image_height;
  std::vector<Grid> v(kNumModes, Grid(w, h));
  for (int mode = 2; mode <= kNumModes; ++mode) {
    TemporalChain& chain = chains_[mode - 2];
    const SeedField& seed = frame_ == 0 ? chain.seed : chain.advance();
    v[mode - 1] = sample_field(field_.unit_psd(mode), seed);
  }
  ++frame_;
  return mix_modes(std::move(v), scaled_cholesky_);
}

}  // namespace turbsyn
