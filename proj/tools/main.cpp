// turbsyn: physics-grounded atmospheric turbulence degradation synthesis.
//
// Subcommands:
//   synthesize        degrade clean frame trees into full/tilt_only/clean
//   fit-basis         build the PSF dictionary and low-rank basis file
//   covariance-cache  precompute the spatial covariance for a geometry
//   metrics           evaluate image-quality metrics (pairs or study mode)
//   plot              scatter plots of metrics vs tilt/blur scores
//   classify          strength-balanced parameter assignment manifest

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "turbsyn/covariance_cache.hpp"
#include "turbsyn/degrade.hpp"
#include "turbsyn/pipeline.hpp"
#include "turbsyn/png_io.hpp"
#include "turbsyn/psf.hpp"
#include "turbsyn/version.hpp"

namespace fs = std::filesystem;
using namespace turbsyn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

struct CommonFlags {
  std::string config_file;
  uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  int workers = 0;
  std::string modality;
  int frames = 0;
  double noise_sigma = -1.0;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required,
                bool with_out = true) {
  auto* c = cmd->add_option("--config", flags.config_file,
                            "JSON job configuration");
  if (config_required) c->required();
  cmd->add_option("--seed", flags.seed, "override master seed")
      ->each([&](const std::string&) { flags.seed_set = true; });
  if (with_out) cmd->add_option("--out", flags.out, "override output path");
  cmd->add_option("--workers", flags.workers, "override worker count");
  cmd->add_option("--modality", flags.modality, "static|dynamic");
  cmd->add_option("--frames", flags.frames, "frames per sequence");
  cmd->add_option("--noise-sigma", flags.noise_sigma, "sensor noise sigma");
}

JobConfig load_config(const CommonFlags& flags) {
  JobConfig config = JobConfig::from_json_file(flags.config_file);
  if (flags.seed_set) config.master_seed = flags.seed;
  if (!flags.out.empty()) config.output_root = flags.out;
  if (flags.workers > 0) config.workers = flags.workers;
  if (!flags.modality.empty())
    config.modality = modality_from_string(flags.modality);
  if (flags.frames > 0) config.frames = flags.frames;
  if (flags.noise_sigma >= 0.0) config.noise_sigma = flags.noise_sigma;
  config.validate();
  return config;
}

int run_synthesize(const CommonFlags& flags) {
  JobConfig config = load_config(flags);
  auto t0 = std::chrono::steady_clock::now();
  std::vector<SequenceResult> results = synthesize(config);
  auto t1 = std::chrono::steady_clock::now();
  double secs = std::chrono::duration<double>(t1 - t0).count();
  for (const auto& r : results)
    std::printf("sequence %-24s strength=%-6s frames=%zu dir=%s\n",
                r.sequence_id.c_str(), to_string(r.strength),
                r.frame_d_bar.size(), r.directory.string().c_str());
  std::printf("synthesized %zu sequence(s) in %.1f s\n", results.size(), secs);
  return kExitOk;
}

int run_fit_basis(const std::string& out_file, size_t dictionary_size,
                  int rank, int side, int pupil_grid, uint64_t seed,
                  const std::string& validate_file) {
  if (!validate_file.empty()) {
    PsfBasis basis = load_basis(validate_file);
    double worst = 0.0;
    if (!basis.resized) {
      for (int i = 0; i < basis.rank; ++i)
        for (int j = i; j < basis.rank; ++j) {
          double dot = 0.0;
          for (size_t p = 0; p < basis.psi[i].size(); ++p)
            dot += basis.psi[i][p] * basis.psi[j][p];
          worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
        }
    }
    std::printf(
        "basis %s: side=%d rank=%d native_fwhm=%.4f explained=%.6f "
        "gram_residual=%.3e hash=%016" PRIx64 "\n",
        validate_file.c_str(), basis.side, basis.rank, basis.native_fwhm,
        basis.explained_energy, worst, basis_file_hash(validate_file));
    return kExitOk;
  }

  DictionaryOptions opts;
  opts.side = side;
  opts.pupil_grid = pupil_grid;
  opts.seed = seed;
  opts.threads = 0;
  std::printf("building dictionary: %zu samples, side %d, D/r0 [%g, %g]\n",
              dictionary_size, side, opts.strength_lo, opts.strength_hi);
  NollCovariance noll = noll_covariance();
  PsfDictionary dict = build_dictionary(dictionary_size, noll, opts);
  std::printf("fitting rank-%d basis...\n", rank);
  ZernikeBasis pupil = evaluate_basis(pupil_grid);
  PsfBasis basis = fit_basis(dict, rank, pupil);
  save_basis(out_file, basis);
  std::printf("wrote %s: native_fwhm=%.4f explained_energy=%.6f\n",
              out_file.c_str(), basis.native_fwhm, basis.explained_energy);
  return kExitOk;
}

int run_covariance_cache(const CommonFlags& flags, int width, int height) {
  JobConfig config = load_config(flags);
  if (config.sample_parameters)
    throw ConfigError(
        "covariance-cache needs explicit \"parameters\" in the config");
  if (config.cache_dir.empty())
    throw ConfigError("covariance-cache needs cache_dir in the config");

  ImagingGeometry geom = config.explicit_params.to_geometry(
      width, height, config.wavelength, config.k0);
  CnProfile profile = CnProfile::constant(
      geom.path_length, config.explicit_params.cn2, config.segments);
  CovarianceBuildOptions opts;

  CovarianceCacheKey key = covariance_cache_key(geom, profile, opts);
  auto t0 = std::chrono::steady_clock::now();
  CovarianceField field =
      get_or_build_covariance_field(config.cache_dir, geom, profile, opts);
  auto t1 = std::chrono::steady_clock::now();
  std::printf("covariance cache: %s\n",
              covariance_cache_path(config.cache_dir, key).string().c_str());
  std::printf("hash=%016" PRIx64 "  %dx%d  built in %.2f s  (psd floor %.3e)\n",
              key.hash, field.width(), field.height(),
              std::chrono::duration<double>(t1 - t0).count(),
              field.psd_clamp_floor());
  return kExitOk;
}

int run_metrics_pairs(const std::string& a, const std::string& b,
                      const std::string& out) {
  size_t rows = metrics_over_trees(a, b, out);
  std::printf("wrote %zu metric rows to %s\n", rows, out.c_str());
  return kExitOk;
}

int run_metrics_study(const CommonFlags& flags, const std::string& clean_dir,
                      int draws, const std::string& out) {
  JobConfig config = load_config(flags);
  if (config.sample_parameters)
    throw ConfigError("metrics --study needs explicit \"parameters\"");
  if (config.basis_file.empty())
    throw ConfigError("metrics --study needs basis_file");

  std::vector<Image> corpus;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(clean_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".png")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) corpus.push_back(read_png(f));
  if (corpus.empty()) throw ConfigError("no clean PNGs in " + clean_dir);

  PsfBasis native = load_basis(config.basis_file);
  ZernikeBasis pupil = evaluate_basis(native.pupil_grid);
  TurbulenceParams base = config.explicit_params;
  ImagingGeometry geom = base.to_geometry(
      corpus[0].width, corpus[0].height, config.wavelength, config.k0);
  NollCovariance noll = noll_covariance(kNumModes, geom.k0_scaled());
  derive_params(base, geom, noll, native.native_fwhm, native.side);
  CnProfile profile =
      CnProfile::constant(geom.path_length, base.cn2, config.segments);
  CovarianceField field = get_or_build_covariance_field(config.cache_dir, geom,
                                                        profile, {});
  PsfBasis resized = resize_basis(native, diffraction_fwhm(geom));
  BlurOperator blur(resized, geom.image_width, geom.image_height);

  SimulatorHandle simulator = [&](const Image& clean, int image_idx,
                                  int draw_idx) {
    // Strength multiplier on Cn^2; covariance is linear in it so the
    // precomputed field is reused with a scaled mixing factor.
    Rng rng(Rng::key(config.master_seed, image_idx, draw_idx,
                     static_cast<uint64_t>(StreamTag::kParamSampler)));
    double mult = std::exp(rng.uniform(std::log(0.05), std::log(4.0)));
    uint64_t vid = Rng::key(config.master_seed, image_idx, draw_idx);
    FieldSynthesizer synth(field, config.master_seed, vid,
                           base.temporal_alpha, mult);
    CoefficientFields coeffs = synth.next_frame();

    DegradeOptions opts;
    opts.beta_block = config.beta_block;
    opts.master_seed = config.master_seed;
    opts.video_id = vid;
    DegradedFrameSet set =
        degrade_frame(clean, coeffs, native, blur, pupil, geom, opts);

    DegradedSample sample;
    sample.degraded = std::move(set.full);
    sample.tilt_score = set.d_bar;
    sample.blur_score =
        blur_score(coeffs, base.kernel_size, config.blur_index_start);
    return sample;
  };

  std::vector<SensitivitySample> samples =
      sensitivity_study(corpus, simulator, draws);
  write_sensitivity_report(out, samples);
  std::printf("study: %zu samples (%zu images x %d draws) -> %s\n",
              samples.size(), corpus.size(), draws, out.c_str());
  return kExitOk;
}

int run_plot(const std::string& report, const std::string& out_dir) {
  std::vector<fs::path> files = plot_metrics(report, out_dir);
  for (const auto& f : files) std::printf("wrote %s\n", f.string().c_str());
  return kExitOk;
}

int run_classify(const CommonFlags& flags, const std::string& quota_spec,
                 const std::string& out_file) {
  JobConfig config = load_config(flags);
  std::array<int, 3> quotas{};
  if (std::sscanf(quota_spec.c_str(), "%d,%d,%d", &quotas[0], &quotas[1],
                  &quotas[2]) != 3)
    throw ConfigError("quota must be weak,medium,strong (e.g. 15,15,15)");

  // Corpus ids from the input layout (one id per discovered sequence).
  std::vector<std::string> ids;
  for (const auto& input : config.inputs) {
    if (!fs::exists(input)) throw IoError("input not found: " + input.string());
    if (fs::is_directory(input)) {
      std::vector<std::string> local;
      for (const auto& entry : fs::directory_iterator(input)) {
        if (entry.is_directory())
          local.push_back(entry.path().filename().string());
        else if (entry.path().extension() == ".png")
          local.push_back(entry.path().stem().string());
      }
      std::sort(local.begin(), local.end());
      ids.insert(ids.end(), local.begin(), local.end());
    } else {
      ids.push_back(input.stem().string());
    }
  }
  if (ids.empty()) throw ConfigError("no videos found in inputs");

  ClassifyResult result = classify_and_balance(ids, quotas, config);
  write_manifest(out_file, result);
  std::printf("manifest: %s  buckets weak=%d medium=%d strong=%d%s\n",
              out_file.c_str(), result.bucket_counts[0],
              result.bucket_counts[1], result.bucket_counts[2],
              result.exhausted ? "  (EXHAUSTED)" : "");
  if (result.exhausted) {
    std::fprintf(stderr, "error: %s\n", result.error.c_str());
    return kExitNumeric;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(kToolVersion) +
               " - atmospheric turbulence degradation synthesis"};
  app.require_subcommand(1);

  CommonFlags synth_flags;
  auto* synth = app.add_subcommand("synthesize", "synthesize degraded sequences");
  add_common(synth, synth_flags, true);

  std::string basis_out = "psf_basis.bin", basis_validate;
  size_t dict_size = 20000;
  int rank = 100, side = 67, pupil_grid = 128;
  uint64_t basis_seed = 20240105;
  auto* fitb = app.add_subcommand("fit-basis", "build or validate a PSF basis");
  fitb->add_option("--out", basis_out, "output basis file");
  fitb->add_option("--dictionary", dict_size, "dictionary sample count");
  fitb->add_option("--rank", rank, "basis rank");
  fitb->add_option("--side", side, "native kernel side (odd)");
  fitb->add_option("--pupil-grid", pupil_grid, "pupil sampling grid");
  fitb->add_option("--seed", basis_seed, "dictionary RNG seed");
  fitb->add_option("--validate", basis_validate, "validate an existing file");

  CommonFlags cov_flags;
  int cov_w = 256, cov_h = 256;
  auto* cov = app.add_subcommand("covariance-cache",
                                 "precompute covariance for a geometry");
  add_common(cov, cov_flags, true);
  cov->add_option("--width", cov_w, "image width");
  cov->add_option("--height", cov_h, "image height");

  CommonFlags met_flags;
  std::string met_a, met_b, met_out = "metrics.jsonl", met_clean;
  int met_draws = 9;
  bool met_study = false;
  auto* met = app.add_subcommand("metrics", "image quality metrics");
  add_common(met, met_flags, false, /*with_out=*/false);
  met->add_option("--a", met_a, "degraded tree");
  met->add_option("--b", met_b, "reference tree or single frame");
  met->add_option("--out", met_out, "report file (JSON lines)");
  met->add_flag("--study", met_study, "run the degradation sensitivity study");
  met->add_option("--clean", met_clean, "clean corpus dir (study mode)");
  met->add_option("--draws", met_draws, "degradations per clean image");

  std::string plot_report, plot_out = ".";
  auto* plot = app.add_subcommand("plot", "plot metrics vs degradation scores");
  plot->add_option("--report", plot_report, "metrics report")->required();
  plot->add_option("--out", plot_out, "output directory");

  CommonFlags cls_flags;
  std::string cls_quota, cls_out = "manifest.json";
  auto* cls = app.add_subcommand("classify",
                                 "assign balanced strength buckets");
  add_common(cls, cls_flags, true);
  cls->add_option("--quota", cls_quota, "weak,medium,strong quotas")->required();
  cls->add_option("--manifest", cls_out, "output manifest file");

  try {
    app.parse(argc, argv);
    if (synth->parsed()) return run_synthesize(synth_flags);
    if (fitb->parsed())
      return run_fit_basis(basis_out, dict_size, rank, side, pupil_grid,
                           basis_seed, basis_validate);
    if (cov->parsed()) return run_covariance_cache(cov_flags, cov_w, cov_h);
    if (met->parsed()) {
      if (met_study)
        return run_metrics_study(met_flags, met_clean, met_draws, met_out);
      if (met_a.empty() || met_b.empty())
        throw ConfigError("metrics needs --a and --b (or --study)");
      return run_metrics_pairs(met_a, met_b, met_out);
    }
    if (plot->parsed()) return run_plot(plot_report, plot_out);
    if (cls->parsed()) return run_classify(cls_flags, cls_quota, cls_out);
    return kExitConfig;
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kExitIo;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  }
}
