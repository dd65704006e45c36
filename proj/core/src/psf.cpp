#include "turbsyn/psf.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <future>
#include <thread>

#include <Eigen/Dense>

#include "turbsyn/fft.hpp"
#include "turbsyn/rng.hpp"

namespace turbsyn {

namespace {

constexpr double kAiryFwhmFactor = 1.029;  // FWHM of the Airy core, lambda F#

int worker_count(int requested) {
  if (requested > 0) return requested;
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

int round_to_odd(double v) {
  int n = static_cast<int>(std::lround(v));
  if (n % 2 == 0) {
    // Choose the nearer odd neighbor.
    n += (v >= n) ? 1 : -1;
  }
  return n;
}

}  // namespace

double Psf::sum() const {
  double s = 0.0;
  for (double v : kernel) s += v;
  return s;
}

Psf phase_to_psf(std::span<const double> coeffs, const ZernikeBasis& pupil,
                 int side, int pad_factor) {
  if (side % 2 == 0 || side < 3)
    throw ConfigError("PSF side must be odd and >= 3");
  if (pad_factor < 1) throw ConfigError("pad_factor must be >= 1");
  for (double a : coeffs)
    if (!std::isfinite(a)) throw ConfigError("non-finite Zernike coefficient");

  int n = pupil.grid_size;
  int p = n * pad_factor;
  if (side > p) throw ConfigError("PSF side exceeds padded pupil grid");

  std::vector<std::complex<double>> field(static_cast<size_t>(p) * p);
  size_t max_mode = std::min<size_t>(coeffs.size(), kNumModes);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      size_t pix = static_cast<size_t>(y) * n + x;
      if (!pupil.mask[pix]) continue;
      double phase = 0.0;
      for (size_t j = 4; j <= max_mode; ++j) {  // tilt/piston excluded
        double a = coeffs[j - 1];
        if (a != 0.0) phase += a * pupil.modes[j - 1].data[pix];
      }
      field[static_cast<size_t>(y) * p + x] =
          std::polar(1.0, -phase);
    }
  }

  std::vector<std::complex<double>> spec(field.size());
  fft2(field.data(), spec.data(), p, p, false);

  // Crop around the DC peak, which fftshift places at (p/2, p/2).
  Psf psf;
  psf.side = side;
  psf.kernel.resize(static_cast<size_t>(side) * side);
  int half = side / 2;
  int center = p / 2;
  double total = 0.0;
  for (int y = 0; y < side; ++y) {
    int sy = (center + y - half) % p;  // fftshift via index arithmetic
    int uy = (sy - center + p) % p;
    for (int x = 0; x < side; ++x) {
      int sx = (center + x - half) % p;
      int ux = (sx - center + p) % p;
      double v = std::norm(spec[static_cast<size_t>(uy) * p + ux]);
      psf.kernel[static_cast<size_t>(y) * side + x] = v;
      total += v;
    }
  }
  if (total <= 0.0) throw NumericError("degenerate PSF (zero energy)");
  for (double& v : psf.kernel) v /= total;
  return psf;
}

double measure_fwhm(const Psf& psf) {
  // Half-maximum crossings along the four axis directions from the peak.
  int side = psf.side;
  int px = 0, py = 0;
  double peak = -1.0;
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      if (psf.at(x, y) > peak) {
        peak = psf.at(x, y);
        px = x;
        py = y;
      }
  double half = 0.5 * peak;

  auto radius = [&](int dx, int dy) {
    double prev = peak;
    for (int step = 1;; ++step) {
      int x = px + dx * step, y = py + dy * step;
      if (x < 0 || x >= side || y < 0 || y >= side)
        return static_cast<double>(step - 1);
      double v = psf.at(x, y);
      if (v <= half) {
        double frac = (prev - half) / std::max(prev - v, 1e-300);
        return step - 1 + frac;
      }
      prev = v;
    }
  };
  double rx = radius(1, 0) + radius(-1, 0);
  double ry = radius(0, 1) + radius(0, -1);
  return 0.5 * (rx + ry);
}

PsfDictionary build_dictionary(size_t count, const NollCovariance& noll,
                               const DictionaryOptions& opts) {
  if (count == 0) throw ConfigError("dictionary count must be >= 1");
  if (opts.strength_lo <= 0.0 || opts.strength_hi < opts.strength_lo)
    throw ConfigError("invalid D/r0 range");

  ZernikeBasis pupil = evaluate_basis(opts.pupil_grid);
  size_t n = static_cast<size_t>(opts.side) * opts.side;

  PsfDictionary dict;
  dict.side = opts.side;
  dict.pupil_grid = opts.pupil_grid;
  dict.pad_factor = opts.pad_factor;
  dict.psfs.resize(count * n);
  dict.d_over_r0.resize(count);
  dict.coeffs.assign(count, std::vector<double>(kNumModes, 0.0));

  double log_lo = std::log(opts.strength_lo);
  double log_hi = std::log(opts.strength_hi);

  std::atomic<size_t> next{0};
  std::vector<std::future<void>> jobs;
  int workers = worker_count(opts.threads);
  for (int w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&]() {
      std::vector<double> g(kNumModes), a(kNumModes);
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= count) return;
        Rng rng = make_stream(opts.seed, i, 0, 0, StreamTag::kDictionary);
        double strength = std::exp(rng.uniform(log_lo, log_hi));
        double amp = std::pow(strength, 5.0 / 6.0);
        for (int k = 0; k < kNumModes; ++k) g[k] = rng.next_gaussian();
        for (int r = 0; r < kNumModes; ++r) {
          double s = 0.0;
          for (int c = 0; c <= r; ++c)
            s += noll.cholesky[static_cast<size_t>(r) * kNumModes + c] * g[c];
          a[r] = amp * s;
        }
        a[0] = 0.0;
        Psf psf = phase_to_psf(a, pupil, opts.side, opts.pad_factor);
        dict.d_over_r0[i] = strength;
        dict.coeffs[i] = a;
        float* dst = dict.psfs.data() + i * n;
        for (size_t k = 0; k < n; ++k)
          dst[k] = static_cast<float>(psf.kernel[k]);
      }
    }));
  }
  for (auto& j : jobs) j.get();
  return dict;
}

std::vector<double> PsfBasis::reconstruct(std::span<const double> beta) const {
  if (beta.size() != static_cast<size_t>(rank))
    throw ConfigError("beta length does not match basis rank");
  std::vector<double> out = mean;
  for (int k = 0; k < rank; ++k) {
    double b = beta[k];
    if (b == 0.0) continue;
    const double* p = psi[k].data();
    for (size_t i = 0; i < out.size(); ++i) out[i] += b * p[i];
  }
  return out;
}

PsfBasis fit_basis(const PsfDictionary& dict, int rank,
                   const ZernikeBasis& pupil) {
  size_t count = dict.count();
  size_t dim = static_cast<size_t>(dict.side) * dict.side;
  if (rank < 1 || static_cast<size_t>(rank) > count)
    throw ConfigError("PCA rank must be in 1..sample count");

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (size_t i = 0; i < count; ++i) {
    auto s = dict.sample(i);
    for (size_t k = 0; k < dim; ++k) mean[k] += s[k];
  }
  mean /= static_cast<double>(count);

  // Covariance accumulated over sample blocks (dictionary stays float32).
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
  constexpr size_t kBlock = 512;
  Eigen::MatrixXd block(kBlock, dim);
  for (size_t start = 0; start < count; start += kBlock) {
    size_t rows = std::min(kBlock, count - start);
    for (size_t r = 0; r < rows; ++r) {
      auto s = dict.sample(start + r);
      for (size_t k = 0; k < dim; ++k) block(r, k) = s[k] - mean[k];
    }
    cov.selfadjointView<Eigen::Lower>().rankUpdate(
        block.topRows(rows).transpose(), 1.0);
  }
  cov = cov.selfadjointView<Eigen::Lower>();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success)
    throw NumericError("PCA eigendecomposition failed");

  double total = 0.0, kept = 0.0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i)
    total += std::max(eig.eigenvalues()[i], 0.0);

  PsfBasis basis;
  basis.side = dict.side;
  basis.rank = rank;
  basis.pupil_grid = dict.pupil_grid > 0 ? dict.pupil_grid : pupil.grid_size;
  basis.pad_factor = dict.pad_factor > 0 ? dict.pad_factor : 2;
  basis.mean.assign(mean.data(), mean.data() + dim);
  basis.psi.assign(rank, std::vector<double>(dim));
  for (int k = 0; k < rank; ++k) {
    Eigen::Index col = eig.eigenvalues().size() - 1 - k;  // descending
    kept += std::max(eig.eigenvalues()[col], 0.0);
    Eigen::VectorXd v = eig.eigenvectors().col(col);
    // Deterministic sign: largest-magnitude component positive.
    Eigen::Index imax;
    v.cwiseAbs().maxCoeff(&imax);
    if (v[imax] < 0.0) v = -v;
    std::copy(v.data(), v.data() + dim, basis.psi[k].begin());
  }
  basis.explained_energy = total > 0.0 ? kept / total : 1.0;

  if (pupil.grid_size != basis.pupil_grid)
    throw ConfigError("pupil grid does not match the dictionary oracle");

  // N_d: FWHM of the diffraction kernel as represented in the basis.
  Psf diffraction = phase_to_psf({}, pupil, dict.side, basis.pad_factor);
  std::vector<double> beta = project_coeffs(diffraction, basis);
  Psf rep;
  rep.side = dict.side;
  rep.kernel = basis.reconstruct(beta);
  basis.native_fwhm = measure_fwhm(rep);
  return basis;
}

std::vector<double> project_coeffs(const Psf& psf, const PsfBasis& basis) {
  if (psf.side != basis.side)
    throw ConfigError("PSF side does not match basis side");
  if (basis.resized)
    throw ConfigError("projection requires the native (unresized) basis");
  size_t dim = psf.kernel.size();
  std::vector<double> beta(basis.rank);
  for (int k = 0; k < basis.rank; ++k) {
    const double* p = basis.psi[k].data();
    double dot = 0.0;
    for (size_t i = 0; i < dim; ++i) dot += (psf.kernel[i] - basis.mean[i]) * p[i];
    beta[k] = dot;
  }
  return beta;
}

double diffraction_fwhm(const ImagingGeometry& geom) {
  geom.validate();
  double pitch = geom.sensor_pixel_pitch();
  if (!(pitch > 0.0)) throw ConfigError("degenerate geometry: zero pixel pitch");
  return kAiryFwhmFactor * geom.wavelength * geom.f_number / pitch;
}

namespace {

// Fourier fold/pad resize: the kernel is rolled so its center sits at the
// origin and the output is the exact point sampling of the input's
// trigonometric interpolant on the new odd grid (spectrum folding when
// shrinking, zero padding when enlarging). Well-sampled kernels rescale
// exactly by new_side / side; extreme shrinks tend to a delta, matching a
// point-sampled sensor.
std::vector<double> resample_kernel(const std::vector<double>& in, int side,
                                    int new_side) {
  size_t n_in = static_cast<size_t>(side) * side;
  size_t n_out = static_cast<size_t>(new_side) * new_side;
  int half_in = side / 2;

  std::vector<std::complex<double>> rolled(n_in);
  for (int y = 0; y < side; ++y) {
    int fy = ((y - half_in) % side + side) % side;
    for (int x = 0; x < side; ++x) {
      int fx = ((x - half_in) % side + side) % side;
      rolled[static_cast<size_t>(fy) * side + fx] =
          in[static_cast<size_t>(y) * side + x];
    }
  }
  std::vector<std::complex<double>> spec = fft2(rolled, side, side, false);

  // Centered frequency crop/pad; both sides odd so the window is
  // symmetric and the result stays real.
  int keep = side / 2;
  std::vector<std::complex<double>> spec_out(n_out, {0.0, 0.0});
  for (int ky = -keep; ky <= keep; ++ky) {
    int sy = (ky + side) % side;
    int dy = ((ky % new_side) + new_side) % new_side;
    for (int kx = -keep; kx <= keep; ++kx) {
      int sx = (kx + side) % side;
      int dx = ((kx % new_side) + new_side) % new_side;
      spec_out[static_cast<size_t>(dy) * new_side + dx] +=
          spec[static_cast<size_t>(sy) * side + sx];
    }
  }

  std::vector<std::complex<double>> back =
      fft2(spec_out, new_side, new_side, true);
  int half_out = new_side / 2;
  std::vector<double> out(n_out);
  // f(x_j)/rho_eff^2 with rho_eff = new_side/side collapses to 1/n_out.
  double scale = 1.0 / static_cast<double>(n_out);
  for (int y = 0; y < new_side; ++y) {
    int fy = ((y - half_out) % new_side + new_side) % new_side;
    for (int x = 0; x < new_side; ++x) {
      int fx = ((x - half_out) % new_side + new_side) % new_side;
      out[static_cast<size_t>(y) * new_side + x] =
          back[static_cast<size_t>(fy) * new_side + fx].real() * scale;
    }
  }
  return out;
}

}  // namespace

PsfBasis resize_basis(const PsfBasis& basis, double n0) {
  if (!(n0 > 0.0)) throw ConfigError("resize_basis: N_0 must be > 0");
  double ratio = n0 / basis.native_fwhm;
  if (std::abs(ratio - 1.0) < 1e-12) return basis;  // identity

  int new_side = std::max(3, round_to_odd(basis.side * ratio));
  if (new_side == basis.side) return basis;
  PsfBasis out;
  out.side = new_side;
  out.rank = basis.rank;
  out.pupil_grid = basis.pupil_grid;
  out.pad_factor = basis.pad_factor;
  // Fourier resize realizes exactly new_side/side.
  double eff_ratio = static_cast<double>(new_side) / basis.side;
  out.native_fwhm = basis.native_fwhm * eff_ratio;
  out.explained_energy = basis.explained_energy;
  out.resized = true;
  out.mean = resample_kernel(basis.mean, basis.side, new_side);
  out.psi.reserve(basis.psi.size());
  for (const auto& p : basis.psi)
    out.psi.push_back(resample_kernel(p, basis.side, new_side));
  return out;
}

namespace {
constexpr char kBasisMagic[8] = {'T', 'S', 'Y', 'N', 'P', 'S', 'F', '1'};
constexpr uint32_t kBasisVersion = 1;
}  // namespace

void save_basis(const std::filesystem::path& file, const PsfBasis& basis) {
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write basis file " + file.string());
  os.write(kBasisMagic, 8);
  auto pod = [&os](auto v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
  };
  pod(kBasisVersion);
  pod(static_cast<int32_t>(basis.side));
  pod(static_cast<int32_t>(basis.rank));
  pod(static_cast<int32_t>(basis.pupil_grid));
  pod(static_cast<int32_t>(basis.pad_factor));
  pod(basis.native_fwhm);
  pod(basis.explained_energy);
  pod(static_cast<uint8_t>(basis.resized ? 1 : 0));
  std::vector<float> buf(basis.mean.size());
  auto dump = [&](const std::vector<double>& v) {
    for (size_t i = 0; i < v.size(); ++i) buf[i] = static_cast<float>(v[i]);
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
  };
  dump(basis.mean);
  for (const auto& p : basis.psi) dump(p);
  if (!os) throw IoError("basis write failed: " + file.string());
}

PsfBasis load_basis(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IoError("cannot open basis file " + file.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kBasisMagic, 8) != 0)
    throw IoError("bad basis file magic: " + file.string());
  auto pod = [&is](auto& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof v);
  };
  uint32_t version;
  pod(version);
  if (version != kBasisVersion)
    throw IoError("unsupported basis file version");
  int32_t side, rank, pupil_grid, pad_factor;
  pod(side);
  pod(rank);
  pod(pupil_grid);
  pod(pad_factor);
  PsfBasis basis;
  basis.side = side;
  basis.rank = rank;
  basis.pupil_grid = pupil_grid;
  basis.pad_factor = pad_factor;
  pod(basis.native_fwhm);
  pod(basis.explained_energy);
  uint8_t resized;
  pod(resized);
  basis.resized = resized != 0;
  if (side < 3 || rank < 1) throw IoError("corrupt basis header");

  size_t dim = static_cast<size_t>(side) * side;
  std::vector<float> buf(dim);
  auto slurp = [&](std::vector<double>& v) {
    is.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(dim * sizeof(float)));
    v.resize(dim);
    for (size_t i = 0; i < dim; ++i) v[i] = buf[i];
  };
  slurp(basis.mean);
  basis.psi.resize(rank);
  for (auto& p : basis.psi) slurp(p);
  if (!is) throw IoError("truncated basis file: " + file.string());
  return basis;
}

uint64_t basis_file_hash(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IoError("cannot open " + file.string());
  uint64_t h = 0xcbf29ce484222325ull;
  char buf[65536];
  while (is.read(buf, sizeof buf) || is.gcount() > 0) {
    std::streamsize got = is.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
    if (!is) break;
  }
  return h;
}

}  // namespace turbsyn
