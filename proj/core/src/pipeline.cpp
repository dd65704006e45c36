#include "turbsyn/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <map>
#include <fstream>
#include <mutex>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

#include "turbsyn/covariance_cache.hpp"
#include "turbsyn/degrade.hpp"
#include "turbsyn/plot.hpp"
#include "turbsyn/png_io.hpp"
#include "turbsyn/psf.hpp"
#include "turbsyn/version.hpp"

namespace turbsyn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json params_to_json(const TurbulenceParams& p) {
  return {{"modality", to_string(p.modality)},
          {"table_row", p.table_row},
          {"distance_m", p.distance},
          {"focal_length_m", p.focal_length},
          {"f_number", p.f_number},
          {"scene_width_m", p.scene_width},
          {"cn2", p.cn2},
          {"temporal_alpha", p.temporal_alpha},
          {"r0_m", std::isinf(p.r0) ? -1.0 : p.r0},
          {"d_over_r0", p.d_over_r0},
          {"kernel_size", p.kernel_size},
          {"expected_d_bar", p.expected_d_bar}};
}

TurbulenceParams params_from_json(const json& j) {
  TurbulenceParams p;
  p.modality = modality_from_string(j.at("modality"));
  p.table_row = j.value("table_row", 0);
  p.distance = j.at("distance_m");
  p.focal_length = j.at("focal_length_m");
  p.f_number = j.at("f_number");
  p.scene_width = j.at("scene_width_m");
  p.cn2 = j.at("cn2");
  p.temporal_alpha = j.at("temporal_alpha");
  return p;
}

}  // namespace

void JobConfig::validate() const {
  if (inputs.empty()) throw ConfigError("config: no inputs");
  if (output_root.empty()) throw ConfigError("config: no output root");
  if (frames < 1) throw ConfigError("config: frames must be >= 1");
  if (workers < 1) throw ConfigError("config: workers must be >= 1");
  if (noise_sigma < 0.0) throw ConfigError("config: negative noise sigma");
  if (beta_block < 0) throw ConfigError("config: negative beta block");
  if (png_bit_depth != 8 && png_bit_depth != 16)
    throw ConfigError("config: png bit depth must be 8 or 16");
  if (segments < 1) throw ConfigError("config: segments must be >= 1");
  if (blur_index_start != 3 && blur_index_start != 4)
    throw ConfigError("config: blur score index start must be 3 or 4");
  if (classify_probe != "expected" && classify_probe != "sampled")
    throw ConfigError("config: classify_probe must be expected|sampled");
  if (classify_width < 8 || classify_height < 8)
    throw ConfigError("config: classify probe size too small");
  if (strength_quota)
    for (int q : *strength_quota)
      if (q < 0) throw ConfigError("config: negative quota");
  if (!sample_parameters) {
    if (explicit_params.distance <= 0.0 || explicit_params.focal_length <= 0.0)
      throw ConfigError("config: explicit parameters incomplete");
  }
}

JobConfig JobConfig::from_json_file(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw IoError("cannot open config " + file.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }

  JobConfig c;
  try {
    if (j.at("input").is_array())
      for (const auto& p : j.at("input")) c.inputs.emplace_back(p.get<std::string>());
    else
      c.inputs.emplace_back(j.at("input").get<std::string>());
    c.output_root = j.at("output").get<std::string>();
    c.modality = modality_from_string(j.value("modality", "static"));
    c.master_seed = j.value("master_seed", 1ull);
    c.frames = j.value("frames", 50);
    if (j.contains("parameters") && !j.at("parameters").is_string()) {
      c.sample_parameters = false;
      c.explicit_params = params_from_json(j.at("parameters"));
      c.explicit_params.modality = c.modality;
    }
    if (j.contains("strength_quota")) {
      auto& q = j.at("strength_quota");
      c.strength_quota = {{q.at("weak").get<int>(), q.at("medium").get<int>(),
                           q.at("strong").get<int>()}};
    }
    c.noise_sigma = j.value("noise_sigma", 0.0);
    c.beta_block = j.value("block_size", 0);
    c.workers = j.value("workers", 1);
    if (j.contains("basis_file"))
      c.basis_file = j.at("basis_file").get<std::string>();
    if (j.contains("cache_dir"))
      c.cache_dir = j.at("cache_dir").get<std::string>();
    if (j.contains("params_table"))
      c.params_table_file = j.at("params_table").get<std::string>();
    c.wavelength = j.value("wavelength", 525e-9);
    c.k0 = j.value("k0", 1e-3);
    c.segments = j.value("segments", 100);
    c.blur_index_start = j.value("blur_score_index_start", 3);
    c.png_bit_depth = j.value("png_bit_depth", 8);
    c.classify_probe = j.value("classify_probe", "expected");
    c.classify_width = j.value("classify_width", 960);
    c.classify_height = j.value("classify_height", 540);
    c.classify_max_attempts = j.value("classify_max_attempts", 400);
  } catch (const json::exception& e) {
    throw ConfigError("config field error: " + std::string(e.what()));
  }
  c.validate();
  return c;
}

std::string JobConfig::to_json() const {
  json j;
  j["input"] = json::array();
  for (const auto& p : inputs) j["input"].push_back(p.string());
  j["output"] = output_root.string();
  j["modality"] = to_string(modality);
  j["master_seed"] = master_seed;
  j["frames"] = frames;
  j["parameters"] = sample_parameters ? json("sample")
                                      : params_to_json(explicit_params);
  if (strength_quota)
    j["strength_quota"] = {{"weak", (*strength_quota)[0]},
                           {"medium", (*strength_quota)[1]},
                           {"strong", (*strength_quota)[2]}};
  j["noise_sigma"] = noise_sigma;
  j["block_size"] = beta_block;
  j["workers"] = workers;
  j["basis_file"] = basis_file.string();
  j["cache_dir"] = cache_dir.string();
  if (!params_table_file.empty())
    j["params_table"] = params_table_file.string();
  j["wavelength"] = wavelength;
  j["k0"] = k0;
  j["segments"] = segments;
  j["blur_score_index_start"] = blur_index_start;
  j["png_bit_depth"] = png_bit_depth;
  j["classify_probe"] = classify_probe;
  j["classify_width"] = classify_width;
  j["classify_height"] = classify_height;
  j["classify_max_attempts"] = classify_max_attempts;
  return j.dump(2);
}

uint64_t video_id_hash(uint64_t master_seed, const std::string& relative_path) {
  return Rng::key(master_seed, Rng::hash_string(relative_path));
}

namespace {

struct SourceSequence {
  std::string id;             // stable id from the input layout
  std::vector<fs::path> frame_files;
};

bool is_png(const fs::path& p) {
  auto e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), ::tolower);
  return e == ".png";
}

std::vector<fs::path> sorted_pngs(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && is_png(entry.path()))
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

std::string sanitize_id(std::string s) {
  for (char& c : s)
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  return s;
}

std::vector<SourceSequence> discover_sequences(const JobConfig& config) {
  std::vector<SourceSequence> out;
  for (const fs::path& input : config.inputs) {
    if (!fs::exists(input)) throw IoError("input not found: " + input.string());
    if (fs::is_regular_file(input)) {
      if (!is_png(input)) throw ConfigError("input is not a PNG: " + input.string());
      out.push_back({sanitize_id(input.stem().string()), {input}});
      continue;
    }
    std::vector<fs::path> subdirs;
    for (const auto& entry : fs::directory_iterator(input))
      if (entry.is_directory()) subdirs.push_back(entry.path());
    std::sort(subdirs.begin(), subdirs.end());

    if (!subdirs.empty()) {
      for (const auto& d : subdirs) {
        auto frames = sorted_pngs(d);
        if (!frames.empty())
          out.push_back({sanitize_id(d.filename().string()), std::move(frames)});
      }
    }
    auto files = sorted_pngs(input);
    if (config.modality == Modality::kStatic) {
      for (const auto& f : files)
        out.push_back({sanitize_id(f.stem().string()), {f}});
    } else if (!files.empty()) {
      out.push_back({sanitize_id(input.filename().string()), std::move(files)});
    }
  }
  if (out.empty()) throw ConfigError("no input sequences found");
  // Duplicate ids get a positional suffix so output directories are unique.
  std::map<std::string, int> seen;
  for (auto& s : out) {
    int n = seen[s.id]++;
    if (n > 0) s.id += "_" + std::to_string(n);
  }
  return out;
}

struct SequenceTask {
  SourceSequence source;
  TurbulenceParams params;
  StrengthLevel strength = StrengthLevel::kWeak;
};

json metadata_json(const JobConfig& config, const SequenceResult& r,
                   uint64_t video_id, double c_tilt, uint64_t basis_hash) {
  json meta;
  meta["sequence_id"] = r.sequence_id;
  meta["tool_version"] = kToolVersion;
  meta["parameters"] = params_to_json(r.params);
  meta["strength"] = to_string(r.strength);
  meta["c_tilt_px_per_rad"] = c_tilt;
  meta["basis_file_hash"] = basis_hash;
  meta["seed"] = {{"master_seed", config.master_seed},
                  {"video_id", video_id}};
  meta["frames"] = r.frame_d_bar.size();
  meta["per_frame"] = {{"d_bar", r.frame_d_bar},
                       {"blur_score", r.frame_blur_score}};
  meta["config"] = json::parse(config.to_json());
  return meta;
}

}  // namespace

std::vector<SequenceResult> synthesize(const JobConfig& config) {
  config.validate();
  if (config.basis_file.empty())
    throw ConfigError("synthesize requires a basis_file");

  PsfBasis native = load_basis(config.basis_file);
  uint64_t basis_hash = basis_file_hash(config.basis_file);
  ZernikeBasis pupil = evaluate_basis(native.pupil_grid);
  ParameterTable table = config.params_table_file.empty()
                             ? ParameterTable::builtin()
                             : ParameterTable::load(config.params_table_file);

  std::vector<SourceSequence> sources = discover_sequences(config);
  for (const auto& s : sources) {
    if (config.modality == Modality::kDynamic &&
        static_cast<int>(s.frame_files.size()) < config.frames)
      throw ConfigError("video " + s.id + " has " +
                        std::to_string(s.frame_files.size()) +
                        " frames, requested " + std::to_string(config.frames));
  }

  fs::create_directories(config.output_root);

  std::optional<QuotaSampler> quota;
  if (config.strength_quota) quota.emplace(*config.strength_quota);
  std::mutex quota_mu;

  std::atomic<size_t> next{0};
  std::vector<SequenceResult> results(sources.size());
  std::vector<char> written(sources.size(), 0);
  std::mutex error_mu;
  std::exception_ptr first_error;

  auto worker = [&]() {
    try {
      for (;;) {
        size_t idx = next.fetch_add(1);
        if (idx >= sources.size()) return;
        const SourceSequence& src = sources[idx];
        uint64_t video_id = video_id_hash(config.master_seed, src.id);

        // Load clean frames (static input replicates one frame).
        std::vector<Image> clean;
        if (config.modality == Modality::kStatic) {
          clean.push_back(read_png(src.frame_files[0]));
        } else {
          for (int f = 0; f < config.frames; ++f)
            clean.push_back(read_png(src.frame_files[f]));
          for (const Image& img : clean)
            if (!img.same_shape(clean[0]))
              throw ConfigError("video " + src.id + ": frame shapes differ");
        }
        int w = clean[0].width, h = clean[0].height;

        NollCovariance noll;  // filled once geometry (k0 scale) is known
        TurbulenceParams params;
        ImagingGeometry geom;
        StrengthLevel bucket = StrengthLevel::kWeak;
        int attempts = 0;
        for (;;) {
          ++attempts;
          if (config.sample_parameters) {
            Rng rng(Rng::key(config.master_seed, video_id,
                             static_cast<uint64_t>(attempts),
                             static_cast<uint64_t>(StreamTag::kParamSampler)));
            params = sample_params(config.modality, rng, table);
          } else {
            params = config.explicit_params;
          }
          geom = params.to_geometry(w, h, config.wavelength, config.k0);
          noll = noll_covariance(kNumModes, geom.k0_scaled());
          derive_params(params, geom, noll, native.native_fwhm, native.side);
          if (!quota) break;
          bucket = classify_strength(params.kernel_size, params.d_over_r0,
                                     params.expected_d_bar);
          {
            std::lock_guard<std::mutex> lock(quota_mu);
            if (quota->try_accept(bucket)) break;
          }
          if (!config.sample_parameters)
            throw ConfigError("explicit parameters rejected by quota");
          if (attempts >= (quota ? quota->max_attempts() : 1))
            throw ConfigError("quota sampler exhausted for " + src.id +
                              " after " + std::to_string(attempts) +
                              " attempts");
        }

        CnProfile profile =
            CnProfile::constant(geom.path_length, params.cn2, config.segments);
        CovarianceBuildOptions cov_opts;
        cov_opts.threads = config.workers > 1 ? 1 : 0;
        CovarianceField field = get_or_build_covariance_field(
            config.cache_dir, geom, profile, cov_opts);

        double n0 = diffraction_fwhm(geom);
        PsfBasis resized = resize_basis(native, n0);
        BlurOperator blur(resized, w, h);
        FieldSynthesizer synth(field, config.master_seed, video_id,
                               params.temporal_alpha);

        // Stage, then atomically publish.
        fs::path final_dir = config.output_root / src.id;
        std::random_device rd;
        fs::path staging = config.output_root /
                           (".staging-" + src.id + "-" + std::to_string(rd()));
        fs::create_directories(staging / "full");
        fs::create_directories(staging / "tilt_only");
        fs::create_directories(staging / "clean");

        SequenceResult result;
        result.sequence_id = src.id;
        result.params = params;

        char name[32];
        for (int f = 0; f < config.frames; ++f) {
          const Image& frame =
              config.modality == Modality::kStatic ? clean[0] : clean[f];
          CoefficientFields coeffs = synth.next_frame();

          DegradeOptions opts;
          opts.noise_sigma = config.noise_sigma;
          opts.beta_block = config.beta_block;
          opts.master_seed = config.master_seed;
          opts.video_id = video_id;
          opts.frame_index = f;
          opts.projection_threads = config.workers > 1 ? 1 : 0;
          DegradedFrameSet set =
              degrade_frame(frame, coeffs, native, blur, pupil, geom, opts);

          std::snprintf(name, sizeof name, "%05d.png", f);
          write_png(staging / "full" / name, set.full, config.png_bit_depth);
          write_png(staging / "tilt_only" / name, set.tilt_only,
                    config.png_bit_depth);
          if (config.modality == Modality::kDynamic)
            write_png(staging / "clean" / name, frame, config.png_bit_depth);

          result.frame_d_bar.push_back(set.d_bar);
          result.frame_blur_score.push_back(blur_score(
              coeffs, params.kernel_size, config.blur_index_start));
        }
        if (config.modality == Modality::kStatic)
          write_png(staging / "clean" / "00000.png", clean[0],
                    config.png_bit_depth);

        result.strength = quota ? bucket
                                : classify_strength(params.kernel_size,
                                                    params.d_over_r0,
                                                    result.frame_d_bar[0]);
        result.directory = final_dir;

        json meta = metadata_json(config, result, video_id, tilt_scale(geom),
                                  basis_hash);
        std::ofstream os(staging / "metadata.json");
        os << meta.dump(2) << "\n";
        os.close();
        if (!os) throw IoError("cannot write metadata for " + src.id);

        fs::remove_all(final_dir);
        fs::rename(staging, final_dir);
        results[idx] = std::move(result);
        written[idx] = 1;
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mu);
      if (!first_error) first_error = std::current_exception();
    }
  };

  std::vector<std::thread> pool;
  int n_workers = std::min<int>(config.workers, sources.size());
  for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  std::vector<SequenceResult> out;
  for (size_t i = 0; i < results.size(); ++i)
    if (written[i]) out.push_back(std::move(results[i]));
  return out;
}

ClassifyResult classify_and_balance(const std::vector<std::string>& video_ids,
                                    std::array<int, 3> quotas,
                                    const JobConfig& config) {
  int total_quota = quotas[0] + quotas[1] + quotas[2];
  if (total_quota > static_cast<int>(video_ids.size()))
    throw ConfigError("quotas exceed corpus size");

  ParameterTable table = config.params_table_file.empty()
                             ? ParameterTable::builtin()
                             : ParameterTable::load(config.params_table_file);
  // Geometry context for derived values; classification probes use the
  // expected displacement unless a sampled probe was requested.
  double native_fwhm = 2.0;
  int native_side = 67;
  if (!config.basis_file.empty()) {
    PsfBasis native = load_basis(config.basis_file);
    native_fwhm = native.native_fwhm;
    native_side = native.side;
  }

  QuotaSampler quota(quotas, config.classify_max_attempts);
  ClassifyResult out;
  for (const std::string& id : video_ids) {
    if (quota.all_full()) break;
    uint64_t vid = video_id_hash(config.master_seed, id);
    bool accepted = false;
    for (int attempt = 1; attempt <= quota.max_attempts(); ++attempt) {
      Rng rng(Rng::key(config.master_seed, vid,
                       static_cast<uint64_t>(attempt),
                       static_cast<uint64_t>(StreamTag::kParamSampler)));
      TurbulenceParams params = sample_params(config.modality, rng, table);
      ImagingGeometry geom = params.to_geometry(
          config.classify_width, config.classify_height, config.wavelength,
          config.k0);
      NollCovariance noll = noll_covariance(kNumModes, geom.k0_scaled());
      derive_params(params, geom, noll, native_fwhm, native_side);

      double d_bar = params.expected_d_bar;
      if (config.classify_probe == "sampled") {
        CnProfile profile = CnProfile::constant(geom.path_length, params.cn2,
                                                config.segments);
        CovarianceBuildOptions cov_opts;
        CovarianceField field = get_or_build_covariance_field(
            config.cache_dir, geom, profile, cov_opts);
        FieldSynthesizer synth(field, config.master_seed, vid,
                               params.temporal_alpha);
        CoefficientFields coeffs = synth.next_frame();
        TiltField tilt =
            tilt_from_coeffs(coeffs.mode(2), coeffs.mode(3), geom);
        d_bar = tilt_score(tilt);
      }
      StrengthLevel level =
          classify_strength(params.kernel_size, params.d_over_r0, d_bar);
      if (quota.try_accept(level)) {
        out.entries.push_back({id, params, level, attempt});
        ++out.bucket_counts[static_cast<int>(level)];
        accepted = true;
        break;
      }
    }
    if (!accepted && !quota.all_full()) {
      out.exhausted = true;
      out.error = "max attempts exceeded for video " + id;
      return out;
    }
  }
  return out;
}

void write_manifest(const fs::path& file, const ClassifyResult& result) {
  json j;
  j["bucket_counts"] = {{"weak", result.bucket_counts[0]},
                        {"medium", result.bucket_counts[1]},
                        {"strong", result.bucket_counts[2]}};
  j["exhausted"] = result.exhausted;
  if (!result.error.empty()) j["error"] = result.error;
  j["entries"] = json::array();
  for (const auto& e : result.entries) {
    json entry;
    entry["video"] = e.video_id;
    entry["strength"] = to_string(e.strength);
    entry["attempts"] = e.attempts;
    entry["parameters"] = params_to_json(e.params);
    j["entries"].push_back(entry);
  }
  std::ofstream os(file);
  if (!os) throw IoError("cannot write manifest " + file.string());
  os << j.dump(2) << "\n";
}

std::vector<fs::path> plot_metrics(const fs::path& report_file,
                                   const fs::path& out_dir) {
  std::vector<SensitivitySample> samples =
      read_sensitivity_report(report_file);
  if (samples.empty())
    throw ConfigError("empty metrics report: " + report_file.string());

  fs::create_directories(out_dir);
  struct MetricDef {
    const char* name;
    std::array<uint8_t, 3> color;
    double (*get)(const MetricReport&);
  };
  const MetricDef defs[] = {
      {"psnr", {31, 119, 180}, [](const MetricReport& m) { return m.psnr; }},
      {"ssim", {255, 127, 14}, [](const MetricReport& m) { return m.ssim; }},
      {"cw-ssim", {44, 160, 44}, [](const MetricReport& m) { return m.cw_ssim; }},
      {"charbonnier", {214, 39, 40},
       [](const MetricReport& m) { return m.charbonnier; }},
  };

  std::vector<fs::path> files;
  for (const char* axis : {"tilt", "blur"}) {
    std::vector<PlotSeries> series;
    for (const auto& def : defs) {
      PlotSeries ps;
      ps.name = def.name;
      ps.color = def.color;
      for (const auto& s : samples) {
        ps.x.push_back(std::string(axis) == "tilt" ? s.tilt_score
                                                   : s.blur_score);
        ps.y.push_back(def.get(s.metrics));
      }
      series.push_back(std::move(ps));
    }
    Image img = render_scatter_panels(std::string(axis) + " score", series);
    fs::path file = out_dir / ("metrics_vs_" + std::string(axis) + ".png");
    write_png(file, img, 8);
    files.push_back(file);
  }
  return files;
}

size_t metrics_over_trees(const fs::path& degraded_dir,
                          const fs::path& reference_dir,
                          const fs::path& report_file) {
  if (!fs::exists(degraded_dir))
    throw IoError("missing directory " + degraded_dir.string());

  std::vector<fs::path> degraded;
  for (const auto& entry : fs::recursive_directory_iterator(degraded_dir))
    if (entry.is_regular_file() && is_png(entry.path()))
      degraded.push_back(entry.path());
  std::sort(degraded.begin(), degraded.end());
  if (degraded.empty())
    throw ConfigError("no PNG frames under " + degraded_dir.string());

  bool single_reference = fs::is_regular_file(reference_dir);
  Image ref_single;
  if (single_reference) ref_single = read_png(reference_dir);

  std::ofstream os(report_file, std::ios::trunc);
  if (!os) throw IoError("cannot write report " + report_file.string());
  size_t rows = 0;
  for (const auto& d : degraded) {
    fs::path rel = fs::relative(d, degraded_dir);
    Image a = read_png(d);
    Image b;
    if (single_reference) {
      b = ref_single;
    } else {
      fs::path r = reference_dir / rel;
      if (!fs::exists(r))
        throw IoError("no reference frame for " + rel.string());
      b = read_png(r);
    }
    MetricReport m = evaluate_metrics(b, a);
    json j = {{"pair", rel.string()},   {"tilt_score", 0.0},
              {"blur_score", 0.0},      {"psnr", m.psnr},
              {"ssim", m.ssim},         {"cw_ssim", m.cw_ssim},
              {"charbonnier", m.charbonnier}};
    os << j.dump() << "\n";
    ++rows;
  }
  return rows;
}

}  // namespace turbsyn
