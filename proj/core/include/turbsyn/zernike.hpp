#pragma once

#include <cstdint>
#include <vector>

#include "turbsyn/image.hpp"

namespace turbsyn {

inline constexpr int kNumModes = 36;

enum class Trig { kNone, kCos, kSin };

// One entry of the Noll enumeration. m is the azimuthal order (>= 0); the
// sine/cosine assignment follows Noll's convention: even j carries the
// cosine term, odd j the sine term.
struct NollIndex {
  int j = 1;
  int n = 0;
  int m = 0;
  Trig trig = Trig::kNone;

  int signed_m() const { return trig == Trig::kSin ? -m : m; }
};

// Noll index -> (n, m, trig). Throws std::out_of_range outside 1..36.
NollIndex noll_to_nm(int j);

// Zernike polynomial value at polar (rho, theta), Noll normalization
// (unit mean-square over the disk).
double zernike_value(const NollIndex& idx, double rho, double theta);

// The 36 modes sampled on a square grid covering [-1, 1]^2 at pixel
// centers, zero outside the aperture mask.
struct ZernikeBasis {
  int grid_size = 0;
  std::vector<Grid> modes;     // index j-1
  std::vector<uint8_t> mask;   // row-major, 1 inside the unit disk
  size_t mask_area = 0;

  // Mean of Z_i * Z_j over the mask; ~delta_ij by orthonormality.
  double inner(int ji, int jj) const;
};

// grid_size must be even and >= 16 (quadrature unreliable below).
ZernikeBasis evaluate_basis(int grid_size);

// Single-aperture covariance of the Zernike coefficients at D/r0 = 1,
// piston row/column deflated to identity before the Cholesky factor.
// Entries couple only modes of equal azimuthal order and trig type.
struct NollCovariance {
  int num_modes = kNumModes;
  double k0_scaled = 0.0;
  std::vector<double> matrix;    // row-major num_modes^2, rad^2 at D/r0 = 1
  std::vector<double> cholesky;  // lower-triangular L, matrix = L L^T

  double at(int ji, int jj) const {  // 1-based Noll indices
    return matrix[static_cast<size_t>(ji - 1) * num_modes + (jj - 1)];
  }
};

inline constexpr double kDefaultK0Scaled = 1e-3;

// Covariance scale factor at turbulence strength D/r0.
double strength_scale(double d_over_r0);

NollCovariance noll_covariance(int num_modes = kNumModes,
                               double k0_scaled = kDefaultK0Scaled);

}  // namespace turbsyn
