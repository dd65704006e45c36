#include <fstream>

#include <nlohmann/json.hpp>

#include "turbsyn/metrics.hpp"

namespace turbsyn {

std::vector<SensitivitySample> sensitivity_study(
    const std::vector<Image>& corpus, const SimulatorHandle& simulator,
    int draws_per_image) {
  if (corpus.empty()) throw ConfigError("sensitivity_study: empty corpus");
  if (draws_per_image < 1)
    throw ConfigError("sensitivity_study: draws_per_image must be >= 1");

  std::vector<SensitivitySample> out;
  out.reserve(corpus.size() * draws_per_image);
  for (size_t i = 0; i < corpus.size(); ++i) {
    for (int d = 0; d < draws_per_image; ++d) {
      DegradedSample sample = simulator(corpus[i], static_cast<int>(i), d);
      SensitivitySample rec;
      rec.image_index = static_cast<int>(i);
      rec.draw_index = d;
      rec.tilt_score = sample.tilt_score;
      rec.blur_score = sample.blur_score;
      rec.metrics = evaluate_metrics(corpus[i], sample.degraded);
      out.push_back(std::move(rec));
    }
  }
  return out;
}

void write_sensitivity_report(const std::filesystem::path& file,
                              const std::vector<SensitivitySample>& samples) {
  std::ofstream os(file, std::ios::trunc);
  if (!os) throw IoError("cannot write report " + file.string());
  for (const auto& s : samples) {
    nlohmann::json j = {{"image", s.image_index},
                        {"draw", s.draw_index},
                        {"tilt_score", s.tilt_score},
                        {"blur_score", s.blur_score},
                        {"psnr", s.metrics.psnr},
                        {"ssim", s.metrics.ssim},
                        {"cw_ssim", s.metrics.cw_ssim},
                        {"charbonnier", s.metrics.charbonnier}};
    os << j.dump() << "\n";
  }
}

std::vector<SensitivitySample> read_sensitivity_report(
    const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw IoError("cannot open report " + file.string());
  std::vector<SensitivitySample> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("malformed report line " + std::to_string(line_no) +
                        ": " + e.what());
    }
    SensitivitySample s;
    s.image_index = j.value("image", 0);
    s.draw_index = j.value("draw", 0);
    s.tilt_score = j.at("tilt_score");
    s.blur_score = j.at("blur_score");
    s.metrics.psnr = j.at("psnr");
    s.metrics.ssim = j.at("ssim");
    s.metrics.cw_ssim = j.at("cw_ssim");
    s.metrics.charbonnier = j.at("charbonnier");
    out.push_back(s);
  }
  return out;
}

}  // namespace turbsyn
