#pragma once

#include <memory>
#include <vector>

#include "turbsyn/bessel.hpp"
#include "turbsyn/geometry.hpp"
#include "turbsyn/zernike.hpp"

namespace turbsyn {

// Angular-case selector for the spectral kernel, determined by the trig
// types of the two modes:
//   kSameTrig  - both m > 0, both cosine or both sine
//   kMixedTrig - both m > 0, one cosine one sine
//   kCosZero   - exactly one m = 0, the other cosine
//   kSinZero   - exactly one m = 0, the other sine
//   kBothZero  - both m = 0
enum class AngularCase {
  kSameTrig = 1,
  kMixedTrig = 2,
  kCosZero = 3,
  kSinZero = 4,
  kBothZero = 5,
};

AngularCase angular_case(const NollIndex& i, const NollIndex& j);

// Decomposition of the kernel into its two radial terms:
//   f_ij(s, phi) = sign1 * trig1(harm1 * phi) * I_{a1, n_i+1, n_j+1}(2s)
//               + sign2 * trig2(harm2 * phi) * I_{a2, n_i+1, n_j+1}(2s)
// with a1 = m_i + m_j and a2 = |m_i - m_j|. Signs follow from the i^m
// factors of the Zernike Fourier transforms; the second term is absent
// (sign2 = 0) whenever it would duplicate the first.
struct KernelTerms {
  int a1 = 0, a2 = 0;
  int b = 0, c = 0;       // n_i + 1, n_j + 1
  double sign1 = 0.0, sign2 = 0.0;
  int harm1 = 0, harm2 = 0;
  bool trig1_is_cos = true, trig2_is_cos = true;
  double angular1(double phi) const;
  double angular2(double phi) const;
};

KernelTerms kernel_terms(const NollIndex& i, const NollIndex& j);

// Dimensionless mode-pair correlation kernel at separation (s, phi); s in
// units of the aperture diameter, phi from the +x image axis.
double takato_kernel(int i, int j, double s, double phi, double k0_scaled,
                     const QuadratureOptions& opts = {});

// Strength prefactor 0.00969 k^2 2^{14/3} pi^{2/3} R^{5/3}
// sqrt((n_i+1)(n_j+1)), units m^{2/3} (yields rad^2 against Cn^2 dz).
double covariance_prefactor(const ImagingGeometry& geom, int i, int j);

// Transverse cone-axis separation at path position z, in units of the
// local cone diameter, for two image points separated by |delta_object|
// on the object plane (pinhole geometry; grows as z/(L-z) toward the
// object at z = L).
double cone_separation(const ImagingGeometry& geom, double delta_object,
                       double z);

// E[a_i(x) a_j(x')] in rad^2 for an image-plane pixel displacement
// (dx, dy), integrated over the Cn^2 profile with path weight
// ((L-z)/L)^{5/3}. Reference implementation (direct quadrature per node).
double path_covariance(const ImagingGeometry& geom, const CnProfile& profile,
                       int i, int j, double dx_pixels, double dy_pixels,
                       const QuadratureOptions& opts = {});

// 36x36 covariance matrix at zero separation (rad^2), piston row/column
// deflated to identity; this is what cross-mode mixing factors.
std::vector<double> path_covariance_matrix(const ImagingGeometry& geom,
                                           const CnProfile& profile,
                                           const QuadratureOptions& opts = {});

struct CovarianceBuildOptions {
  QuadratureOptions quad;
  // Radial interpolation table resolution for the per-pixel fill.
  int table_points_per_decade = 40;
  double table_u_min = 1e-3;
  double table_u_cap = 2000.0;
  // Stop extending a table once |I| has stayed below this fraction of
  // |I(0)| + tail for a few samples (correlation decayed).
  double decay_stop_rel = 1e-4;
  int threads = 0;  // 0 = hardware concurrency
};

// Per-mode spatial statistics for one geometry/profile, ready for
// FFT sampling. Autocorrelation maps are stored in FFT layout (zero
// displacement at index 0, wrap-around halves) and quantized to float32
// so that rebuilding and cache-loading yield bit-identical state.
class CovarianceField {
 public:
  CovarianceField(ImagingGeometry geom, CnProfile profile,
                  std::vector<std::vector<float>> autocorr,
                  std::vector<double> s0_matrix);

  const ImagingGeometry& geometry() const { return geom_; }
  const CnProfile& profile() const { return profile_; }

  // Mode autocorrelation map (rad^2), FFT layout, float32-quantized.
  const std::vector<float>& autocorrelation(int mode) const {
    return autocorr_[mode - 1];
  }
  // Unit-variance sampling PSD for a mode: nonnegative, normalized so the
  // synthesized field has unit pixel variance. Zero map for piston.
  const std::vector<double>& unit_psd(int mode) const {
    return unit_psd_[mode - 1];
  }
  // Zero-separation covariance matrix (rad^2), piston-deflated.
  const std::vector<double>& s0_matrix() const { return s0_matrix_; }
  // Lower-triangular Cholesky factor of s0_matrix.
  const std::vector<double>& cholesky() const { return cholesky_; }

  double s0(int i, int j) const {
    return s0_matrix_[static_cast<size_t>(i - 1) * kNumModes + (j - 1)];
  }
  int width() const { return geom_.image_width; }
  int height() const { return geom_.image_height; }
  // Most negative PSD value encountered before clamping (diagnostic).
  double psd_clamp_floor() const { return psd_clamp_floor_; }

 private:
  ImagingGeometry geom_;
  CnProfile profile_;
  std::vector<std::vector<float>> autocorr_;
  std::vector<std::vector<double>> unit_psd_;
  std::vector<double> s0_matrix_;
  std::vector<double> cholesky_;
  double psd_clamp_floor_ = 0.0;
};

CovarianceField build_covariance_field(const ImagingGeometry& geom,
                                       const CnProfile& profile,
                                       const CovarianceBuildOptions& opts = {});

// Full autocorrelation map for an arbitrary mode pair (test/analysis
// surface; the synthesis path only consumes the per-mode diagonal maps).
Grid build_pair_map(const ImagingGeometry& geom, const CnProfile& profile,
                    int i, int j, const CovarianceBuildOptions& opts = {});

// Lower-triangular Cholesky with piston deflation; throws NumericError
// with an eigenvalue diagnostic if the matrix is not positive
// semidefinite beyond roundoff.
std::vector<double> deflated_cholesky(std::vector<double> matrix, int n);

}  // namespace turbsyn
