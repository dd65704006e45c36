#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "turbsyn/field_synthesis.hpp"
#include "turbsyn/geometry.hpp"
#include "turbsyn/image.hpp"
#include "turbsyn/psf.hpp"

namespace turbsyn {

// Per-pixel displacement in pixels. Positive displacement moves content
// toward +x/+y: warp samples the source at x - d(x).
struct TiltField {
  Grid dx;
  Grid dy;

  double mean_magnitude() const;  // d-bar, recomputed on call
};

// Tilt-to-pixel scale: 2 f lambda / (pi D pitch) pixels per radian of
// Zernike tilt coefficient.
double tilt_scale(const ImagingGeometry& geom);

TiltField tilt_from_coeffs(const Grid& a2, const Grid& a3,
                           const ImagingGeometry& geom,
                           double c_tilt_override = 0.0);

// Backward warp with bilinear interpolation and clamped borders.
Image warp(const Image& image, const TiltField& tilt);
Grid warp(const Grid& image, const TiltField& tilt);

// Spatially varying blur weights: rank planes of H*W floats (beta), plus
// the per-pixel normalization making each reconstructed kernel sum to 1.
struct BetaMaps {
  int width = 0;
  int height = 0;
  int rank = 0;
  int block = 1;                    // granularity used to compute them
  std::vector<std::vector<float>> planes;  // rank x (H*W)

  float at(int k, int x, int y) const {
    return planes[k][static_cast<size_t>(y) * width + x];
  }
};

// Projects the per-pixel (or per-block) oracle PSF onto the native basis.
// block = 0 or 1 computes beta at every pixel; block = B shares the
// block-center beta across each BxB tile. threads = 0 uses all cores.
BetaMaps project_beta_maps(const CoefficientFields& coeffs,
                           const PsfBasis& native_basis,
                           const ZernikeBasis& pupil, int block,
                           int threads = 0);

// Cached kernel spectra for FFT-domain spatially varying convolution with
// a fixed (resized) basis and image size.
class BlurOperator {
 public:
  BlurOperator(const PsfBasis& resized_basis, int image_width,
               int image_height);

  // O = sum_k psi_k (x) conv (beta_k . I): weights taken at the source
  // pixel (scattering form). Reflection boundary handling.
  Grid scatter(const Grid& image, const BetaMaps& beta) const;
  // O = sum_k beta_k . (psi_k conv I): weights at the destination pixel
  // (gathering form, retained as a comparison oracle).
  Grid gather(const Grid& image, const BetaMaps& beta) const;

  const PsfBasis& basis() const { return basis_; }

 private:
  std::vector<double> normalization(const BetaMaps& beta) const;
  Grid pad_reflect(const Grid& g) const;

  PsfBasis basis_;
  int width_, height_;
  int pad_, fft_w_, fft_h_;
  // Spectra of mean + psi_k, kernel centered at the origin.
  std::vector<std::vector<std::complex<double>>> kernel_spectra_;
  double sum_mean_ = 0.0;
  std::vector<double> sum_psi_;
};

Image scatter_blur(const Image& image, const BetaMaps& beta,
                   const BlurOperator& op);
Image gather_blur(const Image& image, const BetaMaps& beta,
                  const BlurOperator& op);

struct DegradeOptions {
  double noise_sigma = 0.0;
  int beta_block = 0;       // 0/1 = per-pixel beta
  bool clamp_output = true;
  double c_tilt_override = 0.0;
  uint64_t master_seed = 0;  // noise stream key
  uint64_t video_id = 0;
  int frame_index = 0;
  bool keep_beta = false;
  int projection_threads = 0;  // 0 = all cores
};

struct DegradedFrameSet {
  Image full;
  Image tilt_only;
  Image clean;
  TiltField tilt;
  double d_bar = 0.0;
  BetaMaps beta;  // populated when keep_beta is set
};

// Full degradation of one frame: tilt warp from modes 2-3, scattering
// blur through the resized basis with per-pixel/block beta, then
// Gaussian sensor noise, clamped to [0, 1].
DegradedFrameSet degrade_frame(const Image& clean,
                               const CoefficientFields& coeffs,
                               const PsfBasis& native_basis,
                               const BlurOperator& blur,
                               const ZernikeBasis& pupil,
                               const ImagingGeometry& geom,
                               const DegradeOptions& opts = {});

}  // namespace turbsyn
