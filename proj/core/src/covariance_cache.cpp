#include "turbsyn/covariance_cache.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "turbsyn/rng.hpp"

namespace turbsyn {

namespace {

constexpr char kMagic[8] = {'T', 'S', 'Y', 'N', 'C', 'O', 'V', '1'};
constexpr uint32_t kFormatVersion = 1;
// Bump when the kernel maths or table layout changes.
constexpr const char* kKernelVersion = "spectral-kernel-v1";

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("covariance cache: truncated file");
  return v;
}

}  // namespace

CovarianceCacheKey covariance_cache_key(const ImagingGeometry& geom,
                                        const CnProfile& profile,
                                        const CovarianceBuildOptions& opts) {
  std::ostringstream ss;
  ss.precision(17);
  ss << kKernelVersion << "|L=" << geom.path_length
     << "|f=" << geom.focal_length << "|F=" << geom.f_number
     << "|lam=" << geom.wavelength << "|sw=" << geom.scene_width
     << "|W=" << geom.image_width << "|H=" << geom.image_height
     << "|k0=" << geom.k0 << "|quad=" << opts.quad.rel_tol << ","
     << opts.quad.resolution << "," << opts.quad.envelope_cutoff
     << "|tab=" << opts.table_points_per_decade << "," << opts.table_u_min
     << "," << opts.table_u_cap << "," << opts.decay_stop_rel << "|profile=";
  for (const auto& [z, cn2] : profile.nodes) ss << z << ":" << cn2 << ";";
  CovarianceCacheKey key;
  key.text = ss.str();
  key.hash = Rng::hash_string(key.text);
  return key;
}

std::filesystem::path covariance_cache_path(const std::filesystem::path& dir,
                                            const CovarianceCacheKey& key) {
  char name[64];
  std::snprintf(name, sizeof(name), "cov-%016" PRIx64 ".bin", key.hash);
  return dir / name;
}

std::optional<CovarianceField> load_covariance_field(
    const std::filesystem::path& file, const CovarianceCacheKey& key) {
  std::ifstream is(file, std::ios::binary);
  if (!is) return std::nullopt;

  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw IoError("covariance cache: bad magic in " + file.string());
  if (read_pod<uint32_t>(is) != kFormatVersion)
    throw IoError("covariance cache: unsupported version in " + file.string());
  if (read_pod<uint64_t>(is) != key.hash)
    throw IoError("covariance cache: content hash mismatch in " +
                  file.string());
  uint32_t text_len = read_pod<uint32_t>(is);
  std::string text(text_len, '\0');
  is.read(text.data(), text_len);
  if (!is || text != key.text)
    throw IoError("covariance cache: key text mismatch in " + file.string());

  int32_t h = read_pod<int32_t>(is);
  int32_t w = read_pod<int32_t>(is);
  int32_t modes = read_pod<int32_t>(is);
  if (modes != kNumModes)
    throw IoError("covariance cache: unexpected mode count");

  size_t npix = static_cast<size_t>(h) * w;
  std::vector<std::vector<float>> maps(modes);
  for (auto& m : maps) {
    m.resize(npix);
    is.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(npix * sizeof(float)));
  }
  std::vector<double> s0(static_cast<size_t>(kNumModes) * kNumModes);
  is.read(reinterpret_cast<char*>(s0.data()),
          static_cast<std::streamsize>(s0.size() * sizeof(double)));
  if (!is) throw IoError("covariance cache: truncated file " + file.string());

  // Geometry/profile are reconstructed from the key by the caller side;
  // the stored dims must agree with what the key encodes.
  ImagingGeometry geom;
  CnProfile profile;
  {
    // The key text is authoritative; parse the handful of fields back out.
    auto grab = [&](const char* tag) {
      size_t p = key.text.find(tag);
      if (p == std::string::npos)
        throw IoError("covariance cache: malformed key");
      return std::stod(key.text.substr(p + std::strlen(tag)));
    };
    geom.path_length = grab("|L=");
    geom.focal_length = grab("|f=");
    geom.f_number = grab("|F=");
    geom.wavelength = grab("|lam=");
    geom.scene_width = grab("|sw=");
    geom.image_width = static_cast<int>(grab("|W="));
    geom.image_height = static_cast<int>(grab("|H="));
    geom.k0 = grab("|k0=");
    profile.path_length = geom.path_length;
    size_t p = key.text.find("|profile=");
    std::istringstream ps(key.text.substr(p + 9));
    std::string node;
    while (std::getline(ps, node, ';')) {
      if (node.empty()) continue;
      size_t colon = node.find(':');
      profile.nodes.emplace_back(std::stod(node.substr(0, colon)),
                                 std::stod(node.substr(colon + 1)));
    }
  }
  if (geom.image_height != h || geom.image_width != w)
    throw IoError("covariance cache: dimension mismatch");

  return CovarianceField(geom, profile, std::move(maps), std::move(s0));
}

void store_covariance_field(const std::filesystem::path& file,
                            const CovarianceField& field,
                            const CovarianceCacheKey& key) {
  std::filesystem::create_directories(file.parent_path());
  std::random_device rd;
  std::filesystem::path tmp =
      file.parent_path() /
      (file.filename().string() + ".tmp" + std::to_string(rd()));
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("covariance cache: cannot write " + tmp.string());
    os.write(kMagic, 8);
    write_pod(os, kFormatVersion);
    write_pod(os, key.hash);
    write_pod(os, static_cast<uint32_t>(key.text.size()));
    os.write(key.text.data(),
             static_cast<std::streamsize>(key.text.size()));
    write_pod(os, static_cast<int32_t>(field.height()));
    write_pod(os, static_cast<int32_t>(field.width()));
    write_pod(os, static_cast<int32_t>(kNumModes));
    for (int mode = 1; mode <= kNumModes; ++mode) {
      const auto& m = field.autocorrelation(mode);
      os.write(reinterpret_cast<const char*>(m.data()),
               static_cast<std::streamsize>(m.size() * sizeof(float)));
    }
    const auto& s0 = field.s0_matrix();
    os.write(reinterpret_cast<const char*>(s0.data()),
             static_cast<std::streamsize>(s0.size() * sizeof(double)));
    if (!os) throw IoError("covariance cache: write failed " + tmp.string());
  }
  std::filesystem::rename(tmp, file);
}

CovarianceField get_or_build_covariance_field(
    const std::filesystem::path& cache_dir, const ImagingGeometry& geom,
    const CnProfile& profile, const CovarianceBuildOptions& opts) {
  if (cache_dir.empty()) return build_covariance_field(geom, profile, opts);
  CovarianceCacheKey key = covariance_cache_key(geom, profile, opts);
  std::filesystem::path file = covariance_cache_path(cache_dir, key);
  if (auto cached = load_covariance_field(file, key)) return std::move(*cached);
  CovarianceField field = build_covariance_field(geom, profile, opts);
  store_covariance_field(file, field, key);
  return field;
}

}  // namespace turbsyn
