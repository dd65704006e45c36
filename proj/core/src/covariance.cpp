#include "turbsyn/covariance.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <future>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "turbsyn/fft.hpp"

namespace turbsyn {

namespace {

constexpr double kPi = 3.14159265358979323846;

int parity_sign(int e) { return (e % 2 == 0) ? 1 : -1; }

}  // namespace

void ImagingGeometry::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw ConfigError(std::string("geometry: ") + name + " must be > 0");
  };
  positive(path_length, "path_length");
  positive(focal_length, "focal_length");
  positive(f_number, "f_number");
  positive(wavelength, "wavelength");
  positive(scene_width, "scene_width");
  positive(k0, "k0");
  if (image_width < 8 || image_height < 8)
    throw ConfigError("geometry: image size must be at least 8x8");
  if (focal_length >= path_length)
    throw ConfigError("geometry: focal length must be below path length");
}

CnProfile CnProfile::constant(double path_length, double cn2, int segments) {
  if (segments < 1) throw ConfigError("CnProfile: segments must be >= 1");
  CnProfile p;
  p.path_length = path_length;
  p.nodes.reserve(segments);
  double dz = path_length / segments;
  for (int k = 0; k < segments; ++k)
    p.nodes.emplace_back((k + 0.5) * dz, cn2);
  return p;
}

CnProfile CnProfile::single_slab(double path_length, double z, double cn2) {
  CnProfile p;
  p.path_length = path_length;
  p.nodes.emplace_back(z, cn2);
  return p;
}

void CnProfile::validate() const {
  if (nodes.empty()) throw ConfigError("CnProfile: empty profile");
  if (!(path_length > 0.0)) throw ConfigError("CnProfile: path length <= 0");
  double prev = -1.0;
  for (const auto& [z, cn2] : nodes) {
    if (z < 0.0 || z > path_length)
      throw ConfigError("CnProfile: node outside [0, L]");
    if (z <= prev) throw ConfigError("CnProfile: nodes must be increasing");
    if (cn2 < 0.0) throw ConfigError("CnProfile: Cn^2 must be >= 0");
    prev = z;
  }
}

double CnProfile::weighted_integral() const {
  validate();
  double dz = segment_width();
  double sum = 0.0;
  for (const auto& [z, cn2] : nodes)
    sum += std::pow((path_length - z) / path_length, 5.0 / 3.0) * cn2;
  return sum * dz;
}

AngularCase angular_case(const NollIndex& i, const NollIndex& j) {
  if (i.m == 0 && j.m == 0) return AngularCase::kBothZero;
  if (i.m == 0 || j.m == 0) {
    Trig t = i.m == 0 ? j.trig : i.trig;
    return t == Trig::kCos ? AngularCase::kCosZero : AngularCase::kSinZero;
  }
  return i.trig == j.trig ? AngularCase::kSameTrig : AngularCase::kMixedTrig;
}

double KernelTerms::angular1(double phi) const {
  double arg = harm1 * phi;
  return trig1_is_cos ? std::cos(arg) : std::sin(arg);
}

double KernelTerms::angular2(double phi) const {
  double arg = harm2 * phi;
  return trig2_is_cos ? std::cos(arg) : std::sin(arg);
}

// Harmonic decomposition of the product of the two modes' angular parts,
// multiplied by the spectral phase factors i^{m_j - m_i} (-i)^{M} from the
// Fourier representation of the aperture integrals. These factors make the
// kernel exactly antisymmetric under (i <-> j, s -> -s) for odd m_i + m_j.
KernelTerms kernel_terms(const NollIndex& i, const NollIndex& j) {
  KernelTerms t;
  t.b = i.n + 1;
  t.c = j.n + 1;
  t.a1 = i.m + j.m;
  t.a2 = std::abs(i.m - j.m);
  t.harm1 = t.a1;
  t.harm2 = t.a2;

  double base = parity_sign((i.n - i.m) / 2 + (j.n - j.m) / 2);
  // i^{m_j - m_i} (-i)^{M} for M = m_i + m_j resp. |m_i - m_j|.
  double f_plus = parity_sign(i.m);
  double f_minus = (i.m >= j.m) ? parity_sign(i.m - j.m) : 1.0;

  switch (angular_case(i, j)) {
    case AngularCase::kBothZero:
      t.sign1 = base;
      t.trig1_is_cos = true;
      t.sign2 = 0.0;
      break;
    case AngularCase::kCosZero:
      t.sign1 = base * f_plus * std::sqrt(2.0);
      t.trig1_is_cos = true;
      t.sign2 = 0.0;
      break;
    case AngularCase::kSinZero:
      t.sign1 = base * f_plus * std::sqrt(2.0);
      t.trig1_is_cos = false;
      t.sign2 = 0.0;
      break;
    case AngularCase::kSameTrig: {
      bool sin_pair = (i.trig == Trig::kSin);
      t.sign1 = base * f_plus * (sin_pair ? -1.0 : 1.0);
      t.trig1_is_cos = true;
      t.sign2 = base * f_minus;
      t.trig2_is_cos = true;
      if (t.a2 == t.a1) t.sign2 = 0.0;  // same harmonic would double count
      break;
    }
    case AngularCase::kMixedTrig: {
      t.sign1 = base * f_plus;
      t.trig1_is_cos = false;
      // sin((m_sin - m_cos) psi) = sgn * sin(|m-| psi).
      int diff = (i.trig == Trig::kSin) ? (i.m - j.m) : (j.m - i.m);
      double sgn = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
      t.sign2 = base * f_minus * sgn;
      t.trig2_is_cos = false;
      break;
    }
  }
  return t;
}

double takato_kernel(int i, int j, double s, double phi, double k0_scaled,
                     const QuadratureOptions& opts) {
  if (i < 2 || i > kNumModes || j < 2 || j > kNumModes)
    throw std::out_of_range("takato_kernel: mode indices must be in 2..36");
  NollIndex ni = noll_to_nm(i), nj = noll_to_nm(j);
  KernelTerms t = kernel_terms(ni, nj);
  double value = 0.0;
  if (t.sign1 != 0.0) {
    double ang = t.angular1(phi);
    if (ang != 0.0)
      value += t.sign1 * ang *
               bessel_triple_integral(t.a1, t.b, t.c, 2.0 * s, k0_scaled, opts);
  }
  if (t.sign2 != 0.0) {
    double ang = t.angular2(phi);
    if (ang != 0.0)
      value += t.sign2 * ang *
               bessel_triple_integral(t.a2, t.b, t.c, 2.0 * s, k0_scaled, opts);
  }
  return value;
}

double covariance_prefactor(const ImagingGeometry& geom, int i, int j) {
  NollIndex ni = noll_to_nm(i), nj = noll_to_nm(j);
  double k = geom.wavenumber();
  double r = geom.aperture_radius();
  return 0.00969 * k * k * std::pow(2.0, 14.0 / 3.0) *
         std::pow(kPi, 2.0 / 3.0) * std::pow(r, 5.0 / 3.0) *
         std::sqrt((ni.n + 1.0) * (nj.n + 1.0));
}

double cone_separation(const ImagingGeometry& geom, double delta_object,
                       double z) {
  double remaining = geom.path_length - z;
  if (remaining <= 0.0) return std::numeric_limits<double>::infinity();
  return delta_object * z / (geom.aperture_diameter() * remaining);
}

namespace {

double path_weight(const ImagingGeometry& geom, double z) {
  return std::pow((geom.path_length - z) / geom.path_length, 5.0 / 3.0);
}

}  // namespace

double path_covariance(const ImagingGeometry& geom, const CnProfile& profile,
                       int i, int j, double dx_pixels, double dy_pixels,
                       const QuadratureOptions& opts) {
  geom.validate();
  profile.validate();
  if (profile.path_length != geom.path_length)
    throw ConfigError("profile path length disagrees with geometry");

  double pitch = geom.object_pixel_pitch();
  double delta = std::hypot(dx_pixels, dy_pixels) * pitch;
  double phi = std::atan2(dy_pixels, dx_pixels);
  double k0s = geom.k0_scaled();

  double dz = profile.segment_width();
  double sum = 0.0;
  for (const auto& [z, cn2] : profile.nodes) {
    double w = path_weight(geom, z);
    if (w == 0.0 || cn2 == 0.0) continue;
    double s = cone_separation(geom, delta, z);
    sum += w * cn2 * takato_kernel(i, j, s, phi, k0s, opts);
  }
  return covariance_prefactor(geom, i, j) * sum * dz;
}

std::vector<double> path_covariance_matrix(const ImagingGeometry& geom,
                                           const CnProfile& profile,
                                           const QuadratureOptions& opts) {
  geom.validate();
  profile.validate();
  double k0s = geom.k0_scaled();
  // At zero separation only the a = 0 radial term survives; cache the
  // distinct I_{0,b,c}(0) values.
  std::map<std::pair<int, int>, double> i0;
  auto i0_of = [&](int b, int c) {
    auto key = std::minmax(b, c);
    auto it = i0.find(key);
    if (it != i0.end()) return it->second;
    double v = bessel_triple_integral(0, key.first, key.second, 0.0, k0s, opts);
    i0.emplace(key, v);
    return v;
  };

  double weighted = profile.weighted_integral();
  std::vector<double> m(kNumModes * kNumModes, 0.0);
  for (int i = 2; i <= kNumModes; ++i) {
    for (int j = i; j <= kNumModes; ++j) {
      NollIndex ni = noll_to_nm(i), nj = noll_to_nm(j);
      KernelTerms t = kernel_terms(ni, nj);
      double f0 = 0.0;
      if (t.sign1 != 0.0 && t.a1 == 0 && t.trig1_is_cos)
        f0 += t.sign1 * i0_of(t.b, t.c);
      if (t.sign2 != 0.0 && t.a2 == 0 && t.trig2_is_cos)
        f0 += t.sign2 * i0_of(t.b, t.c);
      double v = covariance_prefactor(geom, i, j) * weighted * f0;
      m[(i - 1) * kNumModes + (j - 1)] = v;
      m[(j - 1) * kNumModes + (i - 1)] = v;
    }
  }
  m[0] = 1.0;  // piston deflation
  return m;
}

std::vector<double> deflated_cholesky(std::vector<double> matrix, int n) {
  Eigen::MatrixXd r(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) r(i, j) = matrix[i * n + j];
  // Deflate piston regardless of what the caller left there.
  r.row(0).setZero();
  r.col(0).setZero();
  r(0, 0) = 1.0;

  Eigen::LLT<Eigen::MatrixXd> llt(r);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r);
    double max_ev = eig.eigenvalues().maxCoeff();
    double min_ev = eig.eigenvalues().minCoeff();
    if (min_ev < -1e-10 * std::max(max_ev, 1.0)) {
      std::ostringstream msg;
      msg << "covariance matrix not positive semidefinite after piston "
             "deflation: min eigenvalue "
          << min_ev << ", max " << max_ev;
      throw NumericError(msg.str());
    }
    // Clamp roundoff negatives and refactor.
    Eigen::VectorXd ev = eig.eigenvalues().cwiseMax(0.0);
    Eigen::MatrixXd fixed =
        eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
    llt.compute(fixed + 1e-14 * max_ev * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() != Eigen::Success)
      throw NumericError("Cholesky failed on clamped covariance matrix");
  }
  Eigen::MatrixXd l = llt.matrixL();
  std::vector<double> out(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) out[i * n + j] = l(i, j);
  return out;
}

// ---------------------------------------------------------------------------
// Radial interpolation tables and the per-pixel map fill.

namespace {

struct TripleKey {
  int a, b, c;  // b <= c
  bool operator<(const TripleKey& o) const {
    return std::tie(a, b, c) < std::tie(o.a, o.b, o.c);
  }
};

// I_{a,b,c}(u) sampled at u = 0 plus a log-spaced grid; linear
// interpolation in log u, zero beyond the decayed tail.
struct RadialTable {
  std::vector<double> u;  // u[0] = 0
  std::vector<double> v;
  double u_min = 0.0, log_step = 0.0;

  double eval(double uu) const {
    if (uu <= 0.0) return v[0];
    if (uu <= u_min) {
      // Linear blend between the exact u = 0 value and the first sample.
      return v[0] + (v[1] - v[0]) * (uu / u_min);
    }
    double pos = std::log(uu / u_min) / log_step + 1.0;
    size_t i = static_cast<size_t>(pos);
    if (i + 1 >= u.size()) return 0.0;  // decayed tail
    double frac = pos - static_cast<double>(i);
    return v[i] + (v[i + 1] - v[i]) * frac;
  }
};

RadialTable build_radial_table(const TripleKey& key, double k0s, double u_need,
                               const CovarianceBuildOptions& opts) {
  RadialTable t;
  t.u_min = opts.table_u_min;
  t.log_step = std::log(10.0) / opts.table_points_per_decade;
  double u_cap = std::min(opts.table_u_cap, std::max(u_need, 4.0 * t.u_min));

  t.u.push_back(0.0);
  t.v.push_back(
      bessel_triple_integral(key.a, key.b, key.c, 0.0, k0s, opts.quad));
  double ref = std::abs(t.v[0]);

  int below = 0;
  for (int k = 0;; ++k) {
    double uu = t.u_min * std::exp(k * t.log_step);
    if (uu > u_cap * (1.0 + 1e-12)) break;
    double vv =
        bessel_triple_integral(key.a, key.b, key.c, uu, k0s, opts.quad);
    t.u.push_back(uu);
    t.v.push_back(vv);
    ref = std::max(ref, std::abs(vv));
    if (uu > 4.0 && std::abs(vv) < opts.decay_stop_rel * ref) {
      if (++below >= 6) break;  // sustained decay; zero beyond
    } else {
      below = 0;
    }
  }
  return t;
}

int worker_count(const CovarianceBuildOptions& opts) {
  if (opts.threads > 0) return opts.threads;
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Torus displacement for FFT-layout maps.
inline int signed_displacement(int idx, int n) {
  return idx <= n / 2 ? idx : idx - n;
}

struct PairFillResult {
  std::vector<double> map;  // row-major H*W
};

// Fills the autocorrelation map for mode pair (i, j) from radial tables.
PairFillResult fill_pair_map(
    const ImagingGeometry& geom, const CnProfile& profile, int i, int j,
    const std::map<TripleKey, std::shared_ptr<const RadialTable>>& tables,
    int height, int width) {
  NollIndex ni = noll_to_nm(i), nj = noll_to_nm(j);
  KernelTerms t = kernel_terms(ni, nj);
  const RadialTable* t1 =
      t.sign1 != 0.0
          ? tables.at({t.a1, std::min(t.b, t.c), std::max(t.b, t.c)}).get()
          : nullptr;
  const RadialTable* t2 =
      t.sign2 != 0.0
          ? tables.at({t.a2, std::min(t.b, t.c), std::max(t.b, t.c)}).get()
          : nullptr;

  double prefactor = covariance_prefactor(geom, i, j);
  double dz = profile.segment_width();
  double pitch = geom.object_pixel_pitch();
  double inv_d = 1.0 / geom.aperture_diameter();

  // Per-node coefficients and geometric gains.
  std::vector<double> coef, gain;
  coef.reserve(profile.nodes.size());
  gain.reserve(profile.nodes.size());
  for (const auto& [z, cn2] : profile.nodes) {
    double w = path_weight(geom, z) * cn2;
    if (w == 0.0) continue;
    double remaining = geom.path_length - z;
    coef.push_back(w * dz);
    gain.push_back(z / remaining);
  }

  PairFillResult out;
  out.map.assign(static_cast<size_t>(height) * width, 0.0);
  for (int iy = 0; iy < height; ++iy) {
    double dy = signed_displacement(iy, height);
    for (int ix = 0; ix < width; ++ix) {
      double dx = signed_displacement(ix, width);
      double s_base = std::hypot(dx, dy) * pitch * inv_d;
      double phi = std::atan2(dy, dx);
      double p1 = 0.0, p2 = 0.0;
      for (size_t n = 0; n < coef.size(); ++n) {
        double u = 2.0 * s_base * gain[n];
        if (t1) p1 += coef[n] * t1->eval(u);
        if (t2) p2 += coef[n] * t2->eval(u);
      }
      double value = 0.0;
      if (t1) value += t.sign1 * t.angular1(phi) * p1;
      if (t2) value += t.sign2 * t.angular2(phi) * p2;
      out.map[static_cast<size_t>(iy) * width + ix] = prefactor * value;
    }
  }
  return out;
}

double max_table_u(const ImagingGeometry& geom, const CnProfile& profile,
                   int height, int width) {
  double pitch = geom.object_pixel_pitch();
  double smax = std::hypot(width / 2.0, height / 2.0) * pitch /
                geom.aperture_diameter();
  double gmax = 0.0;
  for (const auto& [z, cn2] : profile.nodes) {
    (void)cn2;
    double remaining = geom.path_length - z;
    if (remaining > 0.0) gmax = std::max(gmax, z / remaining);
  }
  return 2.0 * smax * gmax;
}

// Process-wide memo: tables depend only on (triple, k0, tolerances,
// u-range bucket), so repeated builds (segment studies, warm runs in one
// process) reuse them. Values are identical to a fresh build.
struct TableMemo {
  std::mutex mu;
  std::map<std::string, std::shared_ptr<const RadialTable>> entries;
};

TableMemo& table_memo() {
  static TableMemo memo;
  return memo;
}

std::string memo_key(const TripleKey& key, double k0s, double u_bucket,
                     const CovarianceBuildOptions& opts) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d:%d:%d|%.17g|%.17g|%d|%.17g|%.17g|%.17g|%d",
                key.a, key.b, key.c, k0s, u_bucket,
                opts.table_points_per_decade, opts.table_u_min,
                opts.table_u_cap, opts.decay_stop_rel, opts.quad.resolution);
  return buf;
}

std::map<TripleKey, std::shared_ptr<const RadialTable>> build_tables(
    const ImagingGeometry& geom, const std::vector<TripleKey>& keys,
    double u_need, const CovarianceBuildOptions& opts) {
  // Bucket the needed range so near-identical requests share tables.
  double u_bucket = opts.table_u_cap;
  if (u_need < opts.table_u_cap) {
    u_bucket = 4.0;
    while (u_bucket < u_need) u_bucket *= 2.0;
  }

  std::map<TripleKey, std::shared_ptr<const RadialTable>> tables;
  std::mutex mu;
  std::vector<std::future<void>> jobs;
  std::atomic<size_t> next{0};
  int workers = std::min<int>(worker_count(opts), static_cast<int>(keys.size()));
  for (int w = 0; w < std::max(workers, 1); ++w) {
    jobs.push_back(std::async(std::launch::async, [&]() {
      for (;;) {
        size_t k = next.fetch_add(1);
        if (k >= keys.size()) return;
        std::string id = memo_key(keys[k], geom.k0_scaled(), u_bucket, opts);
        std::shared_ptr<const RadialTable> table;
        {
          std::lock_guard<std::mutex> lock(table_memo().mu);
          auto it = table_memo().entries.find(id);
          if (it != table_memo().entries.end()) table = it->second;
        }
        if (!table) {
          table = std::make_shared<const RadialTable>(build_radial_table(
              keys[k], geom.k0_scaled(), u_bucket, opts));
          std::lock_guard<std::mutex> lock(table_memo().mu);
          table_memo().entries.emplace(id, table);
        }
        std::lock_guard<std::mutex> lock(mu);
        tables.emplace(keys[k], std::move(table));
      }
    }));
  }
  for (auto& j : jobs) j.get();
  return tables;
}

}  // namespace

CovarianceField::CovarianceField(ImagingGeometry geom, CnProfile profile,
                                 std::vector<std::vector<float>> autocorr,
                                 std::vector<double> s0_matrix)
    : geom_(std::move(geom)),
      profile_(std::move(profile)),
      autocorr_(std::move(autocorr)),
      s0_matrix_(std::move(s0_matrix)) {
  int h = geom_.image_height, w = geom_.image_width;
  size_t npix = static_cast<size_t>(h) * w;
  unit_psd_.assign(kNumModes, {});
  cholesky_ = deflated_cholesky(s0_matrix_, kNumModes);

  std::vector<std::complex<double>> buf(npix), spec(npix);
  for (int mode = 1; mode <= kNumModes; ++mode) {
    const auto& map = autocorr_[mode - 1];
    double peak = 0.0;
    for (float v : map) peak = std::max(peak, std::abs(static_cast<double>(v)));
    if (peak == 0.0) continue;  // piston or zero-strength mode

    for (size_t n = 0; n < npix; ++n) buf[n] = map[n];
    fft2(buf.data(), spec.data(), h, w, false);

    std::vector<double> psd(npix);
    double most_negative = 0.0, sum = 0.0, max_s = 0.0;
    for (size_t n = 0; n < npix; ++n) {
      double v = spec[n].real();
      most_negative = std::min(most_negative, v);
      max_s = std::max(max_s, v);
      psd[n] = v > 0.0 ? v : 0.0;
      sum += psd[n];
    }
    psd_clamp_floor_ = std::min(psd_clamp_floor_, most_negative);
    if (most_negative < -0.20 * max_s)
      throw NumericError("PSD of mode " + std::to_string(mode) +
                         " has large negative lobes (" +
                         std::to_string(most_negative / max_s) + " of peak)");
    if (sum <= 0.0) continue;
    // Unit theoretical pixel variance for the sampled field.
    double scale = static_cast<double>(npix) / sum;
    for (double& v : psd) v *= scale;
    unit_psd_[mode - 1] = std::move(psd);
  }
}

CovarianceField build_covariance_field(const ImagingGeometry& geom,
                                       const CnProfile& profile,
                                       const CovarianceBuildOptions& opts) {
  geom.validate();
  profile.validate();
  if (profile.path_length != geom.path_length)
    throw ConfigError("profile path length disagrees with geometry");

  int h = geom.image_height, w = geom.image_width;

  // Distinct radial tables across the 35 diagonal pairs.
  std::vector<TripleKey> keys;
  for (int mode = 2; mode <= kNumModes; ++mode) {
    NollIndex nm = noll_to_nm(mode);
    KernelTerms t = kernel_terms(nm, nm);
    if (t.sign1 != 0.0) keys.push_back({t.a1, t.b, t.c});
    if (t.sign2 != 0.0) keys.push_back({t.a2, t.b, t.c});
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end(),
                         [](const TripleKey& l, const TripleKey& r) {
                           return !(l < r) && !(r < l);
                         }),
             keys.end());

  double u_need = max_table_u(geom, profile, h, w);
  auto tables = build_tables(geom, keys, u_need, opts);

  // Per-mode map fill, parallel over modes.
  std::vector<std::vector<float>> maps(kNumModes);
  maps[0].assign(static_cast<size_t>(h) * w, 0.0f);  // piston carries nothing
  {
    std::atomic<int> next{2};
    std::vector<std::future<void>> jobs;
    int workers = worker_count(opts);
    for (int t = 0; t < workers; ++t) {
      jobs.push_back(std::async(std::launch::async, [&]() {
        for (;;) {
          int mode = next.fetch_add(1);
          if (mode > kNumModes) return;
          PairFillResult r =
              fill_pair_map(geom, profile, mode, mode, tables, h, w);
          std::vector<float> q(r.map.size());
          for (size_t n = 0; n < r.map.size(); ++n)
            q[n] = static_cast<float>(r.map[n]);
          maps[mode - 1] = std::move(q);
        }
      }));
    }
    for (auto& j : jobs) j.get();
  }

  std::vector<double> s0 = path_covariance_matrix(geom, profile, opts.quad);
  return CovarianceField(geom, profile, std::move(maps), std::move(s0));
}

Grid build_pair_map(const ImagingGeometry& geom, const CnProfile& profile,
                    int i, int j, const CovarianceBuildOptions& opts) {
  geom.validate();
  profile.validate();
  NollIndex ni = noll_to_nm(i), nj = noll_to_nm(j);
  KernelTerms t = kernel_terms(ni, nj);
  std::vector<TripleKey> keys;
  if (t.sign1 != 0.0) keys.push_back({t.a1, std::min(t.b, t.c), std::max(t.b, t.c)});
  if (t.sign2 != 0.0) keys.push_back({t.a2, std::min(t.b, t.c), std::max(t.b, t.c)});
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end(),
                         [](const TripleKey& l, const TripleKey& r) {
                           return !(l < r) && !(r < l);
                         }),
             keys.end());
  int h = geom.image_height, w = geom.image_width;
  auto tables = build_tables(geom, keys, max_table_u(geom, profile, h, w), opts);
  PairFillResult r = fill_pair_map(geom, profile, i, j, tables, h, w);
  Grid g(w, h);
  g.data = std::move(r.map);
  return g;
}

NollCovariance noll_covariance(int num_modes, double k0_scaled) {
  if (num_modes != kNumModes)
    throw ConfigError("noll_covariance: only 36 modes supported");
  // Structure matrix: s = 0 kernel values scaled so that multiplying by
  // (D/r0)^{5/3} reproduces the absolute path covariance. The constant
  // folds the 0.00969 spectral prefactor against the 0.423 of the Fried
  // integral; 2^{14/3} R^{5/3} / (D^{5/3} 0.423) leaves 2^3.
  double constant = 0.00969 * 8.0 * std::pow(kPi, 2.0 / 3.0) / 0.423;

  QuadratureOptions quad;
  std::map<std::pair<int, int>, double> i0;
  auto i0_of = [&](int b, int c) {
    auto key = std::minmax(b, c);
    auto it = i0.find(key);
    if (it != i0.end()) return it->second;
    double v = bessel_triple_integral(0, key.first, key.second, 0.0, k0_scaled,
                                      quad);
    i0.emplace(key, v);
    return v;
  };

  NollCovariance cov;
  cov.num_modes = num_modes;
  cov.k0_scaled = k0_scaled;
  cov.matrix.assign(static_cast<size_t>(num_modes) * num_modes, 0.0);
  for (int i = 2; i <= num_modes; ++i) {
    for (int j = i; j <= num_modes; ++j) {
      NollIndex ni = noll_to_nm(i), nj = noll_to_nm(j);
      KernelTerms t = kernel_terms(ni, nj);
      double f0 = 0.0;
      if (t.sign1 != 0.0 && t.a1 == 0 && t.trig1_is_cos)
        f0 += t.sign1 * i0_of(t.b, t.c);
      if (t.sign2 != 0.0 && t.a2 == 0 && t.trig2_is_cos)
        f0 += t.sign2 * i0_of(t.b, t.c);
      if (f0 == 0.0) continue;
      double v = constant * std::sqrt((ni.n + 1.0) * (nj.n + 1.0)) * f0;
      cov.matrix[(i - 1) * static_cast<size_t>(num_modes) + (j - 1)] = v;
      cov.matrix[(j - 1) * static_cast<size_t>(num_modes) + (i - 1)] = v;
    }
  }
  cov.matrix[0] = 1.0;
  cov.cholesky = deflated_cholesky(cov.matrix, num_modes);
  return cov;
}

}  // namespace turbsyn
