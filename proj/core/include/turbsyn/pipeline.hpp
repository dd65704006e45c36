#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "turbsyn/metrics.hpp"
#include "turbsyn/params.hpp"

namespace turbsyn {

// Validated synthesis job description; serialized verbatim into every
// sequence's metadata sidecar.
struct JobConfig {
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path output_root;
  Modality modality = Modality::kStatic;
  uint64_t master_seed = 1;
  int frames = 50;
  bool sample_parameters = true;
  TurbulenceParams explicit_params;  // used when !sample_parameters
  std::optional<std::array<int, 3>> strength_quota;
  double noise_sigma = 0.0;
  int beta_block = 0;  // 0 = per-pixel beta (block size 8 is the fast path)
  int workers = 1;
  std::filesystem::path basis_file;
  std::filesystem::path cache_dir;
  std::filesystem::path params_table_file;  // empty = builtin table
  double wavelength = 525e-9;
  double k0 = 1e-3;
  int segments = 100;
  int blur_index_start = 3;
  int png_bit_depth = 8;
  std::string classify_probe = "expected";  // or "sampled"
  // Frame size assumed when classifying parameter draws; pixel
  // displacement scales with resolution, so use the target video size.
  int classify_width = 960;
  int classify_height = 540;
  int classify_max_attempts = 400;

  void validate() const;
  static JobConfig from_json_file(const std::filesystem::path& file);
  std::string to_json() const;
};

struct SequenceResult {
  std::string sequence_id;
  std::filesystem::path directory;
  TurbulenceParams params;
  StrengthLevel strength = StrengthLevel::kWeak;
  std::vector<double> frame_d_bar;
  std::vector<double> frame_blur_score;
};

// Synthesizes every input sequence: <out>/<id>/{full,tilt_only,clean}
// frame trees plus metadata.json, staged in a temp directory and renamed
// on completion. Returns one entry per written sequence.
std::vector<SequenceResult> synthesize(const JobConfig& config);

struct ManifestEntry {
  std::string video_id;
  TurbulenceParams params;
  StrengthLevel strength = StrengthLevel::kWeak;
  int attempts = 0;
};

struct ClassifyResult {
  std::vector<ManifestEntry> entries;
  std::array<int, 3> bucket_counts{0, 0, 0};
  bool exhausted = false;  // a video ran out of attempts
  std::string error;
};

// Assigns each source video an accepted parameter set and strength
// bucket under the quota, rejection-resampling per video. On exhaustion
// the partial manifest is returned with exhausted = true.
ClassifyResult classify_and_balance(const std::vector<std::string>& video_ids,
                                    std::array<int, 3> quotas,
                                    const JobConfig& config);

void write_manifest(const std::filesystem::path& file, const ClassifyResult&);

// Scatter plots of every metric against the tilt and blur scores; returns
// the two written files (vs_tilt, vs_blur). Empty reports are an error.
std::vector<std::filesystem::path> plot_metrics(
    const std::filesystem::path& report_file,
    const std::filesystem::path& out_dir);

// Pairwise metric evaluation of two directory trees (matched by file
// name); writes a JSON-lines report and returns the row count.
size_t metrics_over_trees(const std::filesystem::path& degraded_dir,
                          const std::filesystem::path& reference_dir,
                          const std::filesystem::path& report_file);

uint64_t video_id_hash(uint64_t master_seed, const std::string& relative_path);

}  // namespace turbsyn
