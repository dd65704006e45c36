#include "turbsyn/params.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "turbsyn/psf.hpp"

namespace turbsyn {

namespace {
constexpr double kCn2Unit = 1e-14;  // table entries are in 1e-14 m^{-2/3}
}

const char* to_string(Modality m) {
  return m == Modality::kDynamic ? "dynamic" : "static";
}

const char* to_string(StrengthLevel s) {
  switch (s) {
    case StrengthLevel::kWeak: return "weak";
    case StrengthLevel::kMedium: return "medium";
    default: return "strong";
  }
}

Modality modality_from_string(const std::string& s) {
  if (s == "dynamic") return Modality::kDynamic;
  if (s == "static") return Modality::kStatic;
  throw ConfigError("unknown modality: " + s);
}

const ParameterTable& ParameterTable::builtin() {
  static const ParameterTable table = [] {
    ParameterTable t;
    auto row = [](double d0, double d1, double f0, double f1,
                  std::vector<double> fn, double s0, double s1, double c0,
                  double c1) {
      return ParameterRow{d0, d1, f0, f1, std::move(fn),
                          s0, s1, c0 * kCn2Unit, c1 * kCn2Unit};
    };
    t.dynamic_rows = {
        row(30, 100, 0.1, 0.3, {2.8, 4}, 2, 4, 50, 300),
        row(30, 100, 0.1, 0.3, {2.8, 4, 5.6}, 4, 20, 200, 1000),
        row(100, 200, 0.2, 0.5, {2.8, 4, 5.6}, 2, 4, 5, 50),
        row(100, 200, 0.2, 0.5, {2.8, 4, 5.6}, 4, 20, 20, 100),
        row(200, 400, 0.3, 0.5, {5.6, 8}, 2, 6, 2, 30),
        row(200, 400, 0.3, 0.5, {4, 5.6, 8}, 6, 20, 10, 40),
        row(400, 600, 0.4, 0.75, {8, 11}, 3, 7, 1, 20),
        row(400, 600, 0.4, 0.75, {5.6, 8, 11}, 7, 20, 10, 30),
        row(600, 800, 0.6, 0.8, {8, 11}, 4, 8, 1, 15),
        row(600, 800, 0.6, 0.8, {8, 11}, 8, 20, 2, 20),
        row(800, 1000, 0.8, 1.0, {11, 16}, 4, 8, 0.5, 10),
        row(800, 1000, 0.8, 1.0, {8, 11, 16}, 8, 20, 1, 20),
    };
    t.static_rows = {
        row(200, 400, 1.0, 2.0, {8, 11}, 0.2, 0.5, 3, 7),
        row(200, 400, 1.0, 2.0, {5.6, 8, 11}, 0.5, 1.0, 6, 30),
        row(400, 600, 1.0, 2.5, {8, 11, 16}, 0.4, 0.8, 2, 6),
        row(400, 600, 1.0, 2.5, {5.6, 8, 11}, 0.8, 1.5, 6, 30),
        row(600, 800, 1.0, 3.0, {11, 16}, 0.5, 1.2, 2, 5),
        row(600, 800, 1.0, 3.0, {8, 11}, 1.2, 2.0, 5, 30),
    };
    return t;
  }();
  return table;
}

namespace {

nlohmann::json row_to_json(const ParameterRow& r) {
  return {{"distance_m", {r.distance_lo, r.distance_hi}},
          {"focal_length_m", {r.focal_lo, r.focal_hi}},
          {"f_number_set", r.f_numbers},
          {"scene_width_m", {r.scene_lo, r.scene_hi}},
          {"cn2_1e-14", {r.cn2_lo / kCn2Unit, r.cn2_hi / kCn2Unit}}};
}

ParameterRow row_from_json(const nlohmann::json& j) {
  ParameterRow r;
  r.distance_lo = j.at("distance_m").at(0);
  r.distance_hi = j.at("distance_m").at(1);
  r.focal_lo = j.at("focal_length_m").at(0);
  r.focal_hi = j.at("focal_length_m").at(1);
  r.f_numbers = j.at("f_number_set").get<std::vector<double>>();
  r.scene_lo = j.at("scene_width_m").at(0);
  r.scene_hi = j.at("scene_width_m").at(1);
  r.cn2_lo = j.at("cn2_1e-14").at(0).get<double>() * kCn2Unit;
  r.cn2_hi = j.at("cn2_1e-14").at(1).get<double>() * kCn2Unit;
  return r;
}

}  // namespace

ParameterTable ParameterTable::load(const std::filesystem::path& json_file) {
  std::ifstream is(json_file);
  if (!is) throw IoError("cannot open parameter table " + json_file.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("parameter table parse error: " + std::string(e.what()));
  }
  if (j.value("version", 0) != 1)
    throw ConfigError("unsupported parameter table version");
  ParameterTable t;
  for (const auto& r : j.at("dynamic_rows")) t.dynamic_rows.push_back(row_from_json(r));
  for (const auto& r : j.at("static_rows")) t.static_rows.push_back(row_from_json(r));
  t.alpha_dynamic_lo = j.at("temporal_alpha_dynamic").at(0);
  t.alpha_dynamic_hi = j.at("temporal_alpha_dynamic").at(1);
  t.alpha_static_lo = j.at("temporal_alpha_static").at(0);
  t.alpha_static_hi = j.at("temporal_alpha_static").at(1);
  if (t.dynamic_rows.empty() || t.static_rows.empty())
    throw ConfigError("parameter table has empty row sets");
  return t;
}

void ParameterTable::save(const std::filesystem::path& json_file) const {
  nlohmann::json j;
  j["version"] = 1;
  j["temporal_alpha_dynamic"] = {alpha_dynamic_lo, alpha_dynamic_hi};
  j["temporal_alpha_static"] = {alpha_static_lo, alpha_static_hi};
  j["dynamic_rows"] = nlohmann::json::array();
  for (const auto& r : dynamic_rows) j["dynamic_rows"].push_back(row_to_json(r));
  j["static_rows"] = nlohmann::json::array();
  for (const auto& r : static_rows) j["static_rows"].push_back(row_to_json(r));
  std::ofstream os(json_file);
  if (!os) throw IoError("cannot write parameter table " + json_file.string());
  os << j.dump(2) << "\n";
}

ImagingGeometry TurbulenceParams::to_geometry(int image_width,
                                              int image_height,
                                              double wavelength,
                                              double k0) const {
  ImagingGeometry g;
  g.path_length = distance;
  g.focal_length = focal_length;
  g.f_number = f_number;
  g.wavelength = wavelength;
  g.scene_width = scene_width;
  g.image_width = image_width;
  g.image_height = image_height;
  g.k0 = k0;
  g.validate();
  return g;
}

TurbulenceParams sample_params(Modality modality, Rng& rng,
                               const ParameterTable& table) {
  const auto& rows = table.rows(modality);
  if (rows.empty()) throw ConfigError("parameter table has no rows");
  size_t row = rng.next_below(rows.size());
  const ParameterRow& r = rows[row];

  TurbulenceParams p;
  p.modality = modality;
  p.table_row = static_cast<int>(row);
  p.distance = rng.uniform(r.distance_lo, r.distance_hi);
  p.focal_length = rng.uniform(r.focal_lo, r.focal_hi);
  p.f_number = r.f_numbers[rng.next_below(r.f_numbers.size())];
  p.scene_width = rng.uniform(r.scene_lo, r.scene_hi);
  p.cn2 = rng.uniform(r.cn2_lo, r.cn2_hi);
  p.temporal_alpha =
      modality == Modality::kDynamic
          ? rng.uniform(table.alpha_dynamic_lo, table.alpha_dynamic_hi)
          : rng.uniform(table.alpha_static_lo, table.alpha_static_hi);
  return p;
}

double fried_parameter(const CnProfile& profile, const ImagingGeometry& geom) {
  double weighted = profile.weighted_integral();
  if (weighted <= 0.0) return std::numeric_limits<double>::infinity();
  double k = geom.wavenumber();
  return std::pow(0.423 * k * k * weighted, -3.0 / 5.0);
}

int select_kernel_size(const ImagingGeometry& geom, double d_over_r0,
                       double basis_native_fwhm, int basis_side,
                       bool strength_scaling) {
  double ratio = diffraction_fwhm(geom) / basis_native_fwhm;
  double scale = 1.0;
  if (strength_scaling && d_over_r0 > 1.0) scale = std::sqrt(d_over_r0);
  double k = ratio * basis_side * scale;
  int odd = static_cast<int>(std::lround(k));
  if (odd % 2 == 0) odd += (k >= odd) ? 1 : -1;
  return std::max(3, odd);
}

void derive_params(TurbulenceParams& params, const ImagingGeometry& geom,
                   const NollCovariance& noll, double basis_native_fwhm,
                   int basis_side, bool strength_scaling) {
  CnProfile profile = CnProfile::constant(geom.path_length, params.cn2, 100);
  params.r0 = fried_parameter(profile, geom);
  params.d_over_r0 = std::isinf(params.r0)
                         ? 0.0
                         : geom.aperture_diameter() / params.r0;
  params.kernel_size = select_kernel_size(geom, params.d_over_r0,
                                          basis_native_fwhm, basis_side,
                                          strength_scaling);
  // E|d| for a 2-D Gaussian displacement: sigma sqrt(pi/2) per the
  // chi distribution with two equal components.
  double var_tilt = noll.at(2, 2) * strength_scale(params.d_over_r0);
  params.expected_d_bar = tilt_scale(geom) * std::sqrt(var_tilt) *
                          std::sqrt(1.5707963267948966);  // sqrt(pi/2)
}

StrengthLevel classify_strength(int k_b, double d_over_r0, double d_bar) {
  if (k_b < 3 || k_b % 2 == 0)
    throw ConfigError("k_b must be odd and >= 3, got " + std::to_string(k_b));
  if (d_bar < 0.0) throw ConfigError("d_bar must be >= 0");

  if (k_b <= 17 || (k_b <= 29 && d_over_r0 < 2.0)) {
    if (d_bar < 0.5) return StrengthLevel::kWeak;
    if (d_bar <= 1.0) return StrengthLevel::kMedium;
    return StrengthLevel::kStrong;
  }
  if (k_b <= 29 && d_over_r0 <= 8.0) {
    if (d_bar < 0.2) return StrengthLevel::kWeak;
    if (d_bar <= 0.4) return StrengthLevel::kMedium;
    return StrengthLevel::kStrong;
  }
  // k_b >= 31, or mid-size kernels with D/r0 > 8: Weak is unreachable.
  return d_bar <= 0.2 ? StrengthLevel::kMedium : StrengthLevel::kStrong;
}

double blur_score(const CoefficientFields& coeffs, int k_b, int index_start) {
  if (index_start < 2 || index_start > kNumModes)
    throw ConfigError("blur_score index_start out of range");
  size_t npix = static_cast<size_t>(coeffs.width) * coeffs.height;
  double sum = 0.0;
  for (size_t p = 0; p < npix; ++p) {
    double sq = 0.0;
    for (int j = index_start; j <= kNumModes; ++j) {
      double a = coeffs.a[j - 1].data[p];
      sq += a * a;
    }
    sum += std::sqrt(sq);
  }
  return k_b * sum / static_cast<double>(npix);
}

double tilt_score(const TiltField& tilt) { return tilt.mean_magnitude(); }

}  // namespace turbsyn
