#pragma once

#include <utility>
#include <vector>

#include "turbsyn/image.hpp"

namespace turbsyn {

// Long-range imaging geometry. Distances in meters, wavelength in meters,
// k0 (outer-scale parameter) in cycles per meter.
struct ImagingGeometry {
  double path_length = 600.0;
  double focal_length = 0.5;
  double f_number = 11.0;
  double wavelength = 525e-9;
  double scene_width = 0.5;
  int image_width = 128;
  int image_height = 128;
  double k0 = 1e-3;

  double aperture_diameter() const { return focal_length / f_number; }
  double aperture_radius() const { return 0.5 * aperture_diameter(); }
  double wavenumber() const { return kTau / wavelength; }
  // Dimensionless outer-scale parameter entering the spectral kernel.
  double k0_scaled() const { return kTau * aperture_radius() * k0; }
  // Object-plane footprint of one image pixel.
  double object_pixel_pitch() const { return scene_width / image_width; }
  // Sensor-plane pixel pitch under the thin-lens magnification f/L.
  double sensor_pixel_pitch() const {
    return object_pixel_pitch() * focal_length / path_length;
  }

  void validate() const;

 private:
  static constexpr double kTau = 6.283185307179586476925286766559;
};

// Turbulence strength profile along the path: Riemann nodes (z, Cn^2(z))
// with uniform segment width path_length / nodes.size(). z is measured
// from the aperture (z = 0) toward the object plane (z = path_length).
struct CnProfile {
  double path_length = 0.0;
  std::vector<std::pair<double, double>> nodes;

  double segment_width() const {
    return path_length / static_cast<double>(nodes.size());
  }

  // Midpoint-rule nodes for a constant-strength path.
  static CnProfile constant(double path_length, double cn2, int segments);
  // One node carrying the whole path weight (segment width L); with
  // z = L/2 this is the delta-slice reduction L Cn^2 delta(z - L/2).
  static CnProfile single_slab(double path_length, double z, double cn2);

  void validate() const;

  // Path-weighted integral sum_seg ((L-z)/L)^{5/3} Cn2(z) dz.
  double weighted_integral() const;
};

}  // namespace turbsyn
