#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "turbsyn/geometry.hpp"
#include "turbsyn/zernike.hpp"

namespace turbsyn {

// Normalized incoherent point spread function on an odd-sided grid.
struct Psf {
  int side = 0;
  std::vector<double> kernel;

  double at(int x, int y) const {
    return kernel[static_cast<size_t>(y) * side + x];
  }
  double sum() const;
};

// |F{ mask exp(-i sum_{j>=4} a_j Z_j) }|^2, centered, cropped to `side`
// and normalized to unit sum. Tilt (and piston) coefficients are ignored
// by construction. `coeffs` is indexed by Noll mode: coeffs[j-1], any
// length up to 36.
Psf phase_to_psf(std::span<const double> coeffs, const ZernikeBasis& pupil,
                 int side, int pad_factor = 2);

// FWHM in pixels from half-maximum crossings along the four axis
// directions through the peak.
double measure_fwhm(const Psf& psf);

struct PsfDictionary {
  int side = 0;
  int pupil_grid = 0;   // oracle settings the samples were rendered with
  int pad_factor = 0;
  std::vector<float> psfs;             // count x side^2, row-major
  std::vector<double> d_over_r0;       // strength of each sample
  std::vector<std::vector<double>> coeffs;  // Zernike vectors (36 each)

  size_t count() const { return d_over_r0.size(); }
  std::span<const float> sample(size_t i) const {
    size_t n = static_cast<size_t>(side) * side;
    return {psfs.data() + i * n, n};
  }
};

struct DictionaryOptions {
  int side = 67;
  // Pupil 128 with 4x padding gives a diffraction FWHM near 4.2 px, so
  // the basis stays well sampled down to half-size resizes.
  int pupil_grid = 128;
  int pad_factor = 4;
  double strength_lo = 0.1;
  double strength_hi = 12.0;
  uint64_t seed = 20240105;
  int threads = 0;
};

// Random PSFs with Zernike vectors ~ N(0, R (D/r0)^{5/3}), D/r0
// log-uniform over [strength_lo, strength_hi].
PsfDictionary build_dictionary(size_t count, const NollCovariance& noll,
                               const DictionaryOptions& opts = {});

// Low-rank PSF basis: mean plus `rank` orthonormal principal components.
struct PsfBasis {
  int side = 0;
  int rank = 0;
  int pupil_grid = 128;  // oracle settings matching the dictionary
  int pad_factor = 4;
  std::vector<double> mean;
  std::vector<std::vector<double>> psi;
  double native_fwhm = 0.0;      // N_d of the diffraction representation
  double explained_energy = 0.0;
  bool resized = false;

  std::vector<double> reconstruct(std::span<const double> beta) const;
};

PsfBasis fit_basis(const PsfDictionary& dict, int rank,
                   const ZernikeBasis& pupil);

// beta_k = <psf - mean, psi_k>; psf side must match the (native) basis.
std::vector<double> project_coeffs(const Psf& psf, const PsfBasis& basis);

// Diffraction-limited FWHM on the sensor, in pixels.
double diffraction_fwhm(const ImagingGeometry& geom);

// Rescales every kernel by N_0 / N_d with mass-preserving resampling;
// side rounded to odd, clamped to >= 3 (delta-like kernel below that).
PsfBasis resize_basis(const PsfBasis& basis, double n0);

// Versioned binary basis file (float32 payload).
void save_basis(const std::filesystem::path& file, const PsfBasis& basis);
PsfBasis load_basis(const std::filesystem::path& file);
uint64_t basis_file_hash(const std::filesystem::path& file);

}  // namespace turbsyn
