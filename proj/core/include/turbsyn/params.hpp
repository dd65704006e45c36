#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "turbsyn/degrade.hpp"
#include "turbsyn/field_synthesis.hpp"
#include "turbsyn/geometry.hpp"
#include "turbsyn/rng.hpp"
#include "turbsyn/zernike.hpp"

namespace turbsyn {

enum class Modality { kDynamic, kStatic };
enum class StrengthLevel { kWeak = 0, kMedium = 1, kStrong = 2 };

const char* to_string(Modality m);
const char* to_string(StrengthLevel s);
Modality modality_from_string(const std::string& s);

// One row of the sampling table: continuous ranges plus the discrete
// F-number set. Cn^2 bounds are absolute (m^{-2/3}).
struct ParameterRow {
  double distance_lo, distance_hi;
  double focal_lo, focal_hi;
  std::vector<double> f_numbers;
  double scene_lo, scene_hi;
  double cn2_lo, cn2_hi;
};

struct ParameterTable {
  std::vector<ParameterRow> dynamic_rows;
  std::vector<ParameterRow> static_rows;
  double alpha_dynamic_lo = 0.3, alpha_dynamic_hi = 0.95;
  double alpha_static_lo = 0.2, alpha_static_hi = 0.9;

  const std::vector<ParameterRow>& rows(Modality m) const {
    return m == Modality::kDynamic ? dynamic_rows : static_rows;
  }

  static const ParameterTable& builtin();
  static ParameterTable load(const std::filesystem::path& json_file);
  void save(const std::filesystem::path& json_file) const;
};

struct TurbulenceParams {
  Modality modality = Modality::kDynamic;
  int table_row = 0;
  double distance = 0.0;       // m
  double focal_length = 0.0;   // m
  double f_number = 0.0;
  double scene_width = 0.0;    // m
  double cn2 = 0.0;            // m^{-2/3}
  double temporal_alpha = 0.0;

  // Derived once the imaging context is known.
  double r0 = 0.0;
  double d_over_r0 = 0.0;
  int kernel_size = 0;          // k_b, odd pixels
  double expected_d_bar = 0.0;  // pixels

  ImagingGeometry to_geometry(int image_width, int image_height,
                              double wavelength = 525e-9,
                              double k0 = 1e-3) const;
};

// Draws one tuple from an equiprobable table row; derived fields are
// filled by derive_params.
TurbulenceParams sample_params(Modality modality, Rng& rng,
                               const ParameterTable& table =
                                   ParameterTable::builtin());

// Spherical-wave Fried parameter with the ((L-z)/L)^{5/3} path weight.
// Zero turbulence yields r0 = +inf (and D/r0 = 0).
double fried_parameter(const CnProfile& profile, const ImagingGeometry& geom);

// k_b = round_odd(basis support x N_0/N_d x optional strength scaling),
// clamped to >= 3.
int select_kernel_size(const ImagingGeometry& geom, double d_over_r0,
                       double basis_native_fwhm, int basis_side,
                       bool strength_scaling = false);

// Fills r0, D/r0, kernel size and the expected mean tilt displacement.
void derive_params(TurbulenceParams& params, const ImagingGeometry& geom,
                   const NollCovariance& noll, double basis_native_fwhm,
                   int basis_side, bool strength_scaling = false);

// Criterion-table strength lookup. The Weak band is unreachable for
// k_b >= 31 (and for D/r0 > 8 at mid kernel sizes); those cells resolve
// by the Medium/Strong displacement rule only.
StrengthLevel classify_strength(int k_b, double d_over_r0, double d_bar);

// blur = k_b * mean_x sqrt(sum_{i=start..36} a_{x,i}^2); the published
// index range starts at 3 (which is a tilt mode) and is kept verbatim,
// with index_start = 4 available as the alternative reading.
double blur_score(const CoefficientFields& coeffs, int k_b,
                  int index_start = 3);

// Mean Euclidean displacement magnitude in pixels.
double tilt_score(const TiltField& tilt);

// Quota bookkeeping for strength-balanced dataset assembly.
class QuotaSampler {
 public:
  QuotaSampler(std::array<int, 3> quotas, int max_attempts_per_item = 100)
      : quotas_(quotas), max_attempts_(max_attempts_per_item) {}

  bool has_room(StrengthLevel level) const {
    return filled_[static_cast<int>(level)] < quotas_[static_cast<int>(level)];
  }
  // Accept if the bucket has room; returns success.
  bool try_accept(StrengthLevel level) {
    int i = static_cast<int>(level);
    if (filled_[i] >= quotas_[i]) return false;
    ++filled_[i];
    return true;
  }
  bool all_full() const {
    for (int i = 0; i < 3; ++i)
      if (filled_[i] < quotas_[i]) return false;
    return true;
  }
  int filled(StrengthLevel level) const {
    return filled_[static_cast<int>(level)];
  }
  int max_attempts() const { return max_attempts_; }

 private:
  std::array<int, 3> quotas_;
  std::array<int, 3> filled_{0, 0, 0};
  int max_attempts_;
};

}  // namespace turbsyn
