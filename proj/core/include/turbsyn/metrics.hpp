#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "turbsyn/image.hpp"

namespace turbsyn {

// Peak signal-to-noise ratio in dB, capped at 100 dB for identical images.
inline constexpr double kPsnrCap = 100.0;
double psnr(const Image& a, const Image& b, double peak = 1.0);

// Windowed SSIM, 11x11 Gaussian (sigma 1.5), K1 = 0.01, K2 = 0.03.
// Color images are compared on ITU-R 601 luma.
double ssim(const Image& a, const Image& b, double peak = 1.0);

struct CwSsimOptions {
  int levels = 4;
  int orientations = 6;
  int window = 7;
  double stabilizer = 1e-8;
};

// Complex-wavelet SSIM over an oriented analytic decomposition; phase
// structure makes it tolerant to small displacements. Images must be at
// least 64x64.
double cw_ssim(const Image& a, const Image& b, const CwSsimOptions& opts = {});

// Mean over pixels of sqrt(diff^2 + eps^2); equals eps for identical
// images and tends to MAE as eps -> 0.
double charbonnier(const Image& a, const Image& b, double epsilon = 1e-3);

struct MetricReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double cw_ssim = 0.0;
  double charbonnier = 0.0;
};

MetricReport evaluate_metrics(const Image& a, const Image& b,
                              double peak = 1.0,
                              double charbonnier_eps = 1e-3,
                              const CwSsimOptions& cw = {});

// One degradation drawn by the simulator handle for the metric study.
struct DegradedSample {
  Image degraded;
  double tilt_score = 0.0;
  double blur_score = 0.0;
};

struct SensitivitySample {
  int image_index = 0;
  int draw_index = 0;
  double tilt_score = 0.0;
  double blur_score = 0.0;
  MetricReport metrics;
};

using SimulatorHandle =
    std::function<DegradedSample(const Image& clean, int image_index,
                                 int draw_index)>;

// Degrades each corpus image `draws_per_image` times through the handle
// and evaluates every metric against the clean source.
std::vector<SensitivitySample> sensitivity_study(
    const std::vector<Image>& corpus, const SimulatorHandle& simulator,
    int draws_per_image);

// JSON-lines report records (one object per sample).
void write_sensitivity_report(const std::filesystem::path& file,
                              const std::vector<SensitivitySample>& samples);
std::vector<SensitivitySample> read_sensitivity_report(
    const std::filesystem::path& file);

// Least-squares slope of y against x.
double fitted_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace turbsyn
