#pragma once

#include <complex>
#include <vector>

#include "turbsyn/covariance.hpp"
#include "turbsyn/image.hpp"
#include "turbsyn/rng.hpp"

namespace turbsyn {

// Complex white-noise seed for one mode's random field; real and
// imaginary parts i.i.d. standard normal at frame 0.
struct SeedField {
  int width = 0;
  int height = 0;
  int frame_index = 0;
  std::vector<std::complex<double>> values;
};

SeedField make_seed(int width, int height, uint64_t master_seed,
                    uint64_t video_id, int mode);

// AR(1) chain over the seed: n_t = alpha n_{t-1} + sqrt(1-alpha^2) eps_t.
// The marginal distribution is preserved for any alpha in [0, 1].
struct TemporalChain {
  double alpha = 0.0;
  uint64_t master_seed = 0;
  uint64_t video_id = 0;
  int mode = 0;
  SeedField seed;

  static TemporalChain start(double alpha, int width, int height,
                             uint64_t master_seed, uint64_t video_id,
                             int mode);
  // Advances to the next frame and returns the new seed.
  const SeedField& advance();
};

// v = Re(IFFT(sqrt(S) n)) / sqrt(HW); with a unit-normalized PSD the
// output field has unit pixel variance and the PSD's autocorrelation.
// An all-zero (or empty) PSD yields a zero field.
Grid sample_field(const std::vector<double>& psd, const SeedField& seed);

// Per-frame Zernike coefficient fields (rad), modes 1..36; piston is
// identically zero.
struct CoefficientFields {
  int width = 0;
  int height = 0;
  std::vector<Grid> a;  // index mode-1

  const Grid& mode(int j) const { return a[j - 1]; }
};

// a' = L v per pixel; L is the lower-triangular 36x36 factor.
CoefficientFields mix_modes(std::vector<Grid> fields,
                            const std::vector<double>& cholesky_lower);

// Drives the 36 per-mode AR(1) chains for one video and produces the
// mixed coefficient fields frame by frame. Frames are sequentially
// dependent; one synthesizer must not be shared across threads.
class FieldSynthesizer {
 public:
  // strength_scale multiplies the zero-separation covariance (linear in
  // Cn^2), letting one precomputed field serve a family of strengths.
  FieldSynthesizer(const CovarianceField& field, uint64_t master_seed,
                   uint64_t video_id, double temporal_alpha,
                   double strength_scale = 1.0);

  CoefficientFields next_frame();
  int frame_index() const { return frame_; }

 private:
  const CovarianceField& field_;
  std::vector<TemporalChain> chains_;  // modes 2..36
  std::vector<double> scaled_cholesky_;
  int frame_ = 0;
};

}  // namespace turbsyn
