#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "test_util.hpp"
#include "turbsyn/metrics.hpp"
#include "turbsyn/plot.hpp"
#include "turbsyn/rng.hpp"

using namespace turbsyn;
using namespace turbsyn::test;

namespace {

Image shift_image(const Image& img, int dx, int dy) {
  Image out(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      int sx = std::clamp(x - dx, 0, img.width - 1);
      int sy = std::clamp(y - dy, 0, img.height - 1);
      for (int c = 0; c < img.channels; ++c)
        out.at(x, y, c) = img.at(sx, sy, c);
    }
  return out;
}

Image noise_image(int w, int h, uint64_t seed) {
  Image img(w, h, 1);
  Rng rng(seed);
  for (float& v : img.data)
    v = static_cast<float>(0.5 + 0.18 * rng.next_gaussian());
  return img;
}

}  // namespace

TEST_CASE("psnr: cap, closed form, symmetry") {
  Image a = make_natural_image(64, 64);
  CHECK(psnr(a, a) == kPsnrCap);

  Image b = a;
  for (float& v : b.data) v += 0.1f;  // uniform error of peak/10
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-6));
  CHECK(psnr(a, b) == psnr(b, a));

  Image c(32, 32, 1);
  CHECK_THROWS_AS(psnr(a, c), ConfigError);
  CHECK_THROWS_AS(psnr(a, a, 0.0), ConfigError);
}

TEST_CASE("ssim: identical, negative-structure, symmetric") {
  Image a = make_natural_image(64, 64);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));

  Image neg = a;
  for (float& v : neg.data) v = 1.0f - v;
  CHECK(ssim(a, neg) < 0.0);
  CHECK(ssim(a, neg) == doctest::Approx(ssim(neg, a)).epsilon(1e-12));
}

TEST_CASE("cw-ssim: identical images score 1") {
  Image a = make_natural_image(96, 96);
  CHECK(cw_ssim(a, a) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("cw-ssim tolerates a 1-pixel shift better than ssim") {
  Image a = make_natural_image(128, 128);
  Image b = shift_image(a, 1, 0);
  double s = ssim(a, b);
  double cw = cw_ssim(a, b);
  CHECK(cw > s);
}

TEST_CASE("independent noise images decorrelate") {
  Image a = noise_image(96, 96, 1);
  Image b = noise_image(96, 96, 2);
  CHECK(cw_ssim(a, b) < 0.3);
}

TEST_CASE("cw-ssim rejects tiny images") {
  Image a = make_natural_image(32, 32);
  CHECK_THROWS_AS(cw_ssim(a, a), ConfigError);
}

TEST_CASE("charbonnier: identity, uniform difference, epsilon limit") {
  Image a = make_natural_image(48, 48);
  double eps = 1e-3;
  CHECK(charbonnier(a, a, eps) == doctest::Approx(eps).epsilon(1e-12));

  Image b = a;
  for (float& v : b.data) v += 0.25f;
  CHECK(charbonnier(a, b, eps) ==
        doctest::Approx(std::sqrt(0.25 * 0.25 + eps * eps)).epsilon(1e-5));

  // eps -> 0 approaches mean absolute error.
  double mae = 0.25;
  CHECK(charbonnier(a, b, 1e-9) == doctest::Approx(mae).epsilon(1e-4));
  CHECK_THROWS_AS(charbonnier(a, b, 0.0), ConfigError);
}

TEST_CASE("metrics are invariant to a common constant offset") {
  Image a = make_natural_image(64, 64);
  // Quantize so float additions below are exact.
  for (float& v : a.data) v = std::round(v * 1024.0f) / 1024.0f;
  Image b = shift_image(a, 0, 1);
  Image a2 = a, b2 = b;
  for (float& v : a2.data) v += 0.0625f;
  for (float& v : b2.data) v += 0.0625f;
  CHECK(psnr(a, b) == doctest::Approx(psnr(a2, b2)).epsilon(1e-9));
  CHECK(ssim(a, b) == doctest::Approx(ssim(a2, b2)).epsilon(1e-3));
  CHECK(cw_ssim(a, b) == doctest::Approx(cw_ssim(a2, b2)).epsilon(1e-3));
}

TEST_CASE("fitted slope recovers a linear relationship") {
  std::vector<double> x, y;
  for (int i = 0; i < 50; ++i) {
    x.push_back(i * 0.1);
    y.push_back(3.0 - 1.7 * i * 0.1);
  }
  CHECK(fitted_slope(x, y) == doctest::Approx(-1.7).epsilon(1e-12));
  CHECK_THROWS_AS(fitted_slope({1.0}, {2.0}), ConfigError);
}

TEST_CASE("sensitivity study runs the handle and reports round-trip") {
  std::vector<Image> corpus = {make_natural_image(64, 64),
                               make_natural_image(64, 64, 1, true)};
  SimulatorHandle handle = [](const Image& clean, int image_idx,
                              int draw_idx) {
    DegradedSample s;
    s.degraded = clean;
    double amount = 0.02 * (draw_idx + 1);
    for (float& v : s.degraded.data) v += static_cast<float>(amount);
    s.tilt_score = 0.1 * draw_idx + image_idx;
    s.blur_score = 0.2 * draw_idx;
    return s;
  };
  auto samples = sensitivity_study(corpus, handle, 3);
  REQUIRE(samples.size() == 6);
  CHECK(samples[0].metrics.psnr > samples[1].metrics.psnr);

  namespace fs = std::filesystem;
  fs::path file = fs::temp_directory_path() / "turbsyn-report-test.jsonl";
  write_sensitivity_report(file, samples);
  auto back = read_sensitivity_report(file);
  REQUIRE(back.size() == samples.size());
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].tilt_score == doctest::Approx(samples[i].tilt_score));
    CHECK(back[i].metrics.cw_ssim ==
          doctest::Approx(samples[i].metrics.cw_ssim));
  }
  fs::remove(file);

  CHECK_THROWS_AS(sensitivity_study({}, handle, 3), ConfigError);
}

TEST_CASE("zero degradation pins every metric at its identity value") {
  std::vector<Image> corpus = {make_natural_image(64, 64)};
  SimulatorHandle identity = [](const Image& clean, int, int) {
    return DegradedSample{clean, 0.0, 0.0};
  };
  auto samples = sensitivity_study(corpus, identity, 1);
  CHECK(samples[0].metrics.psnr == kPsnrCap);
  CHECK(samples[0].metrics.ssim == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(samples[0].metrics.cw_ssim == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("axis ranges cover the data extent") {
  AxisRange r = compute_axis_range({0.2, 0.9, 0.5});
  CHECK(r.lo <= 0.2);
  CHECK(r.hi >= 0.9);
  AxisRange flat = compute_axis_range({1.0, 1.0});
  CHECK(flat.hi > flat.lo);
  AxisRange empty = compute_axis_range({});
  CHECK(empty.hi > empty.lo);
}

TEST_CASE("scatter panels render every series") {
  PlotSeries s1{"psnr", {0.1, 0.5, 0.9}, {30.0, 25.0, 20.0}, {255, 0, 0}};
  PlotSeries s2{"ssim", {0.1, 0.5, 0.9}, {0.9, 0.7, 0.5}, {0, 128, 0}};
  Image img = render_scatter_panels("tilt score", {s1, s2});
  CHECK(img.width > 0);
  CHECK(img.channels == 3);
  // Some red and green pixels made it onto the canvas.
  bool red = false, green = false;
  for (size_t p = 0; p < img.pixel_count(); ++p) {
    if (img.data[3 * p] > 0.9f && img.data[3 * p + 1] < 0.1f) red = true;
    if (img.data[3 * p + 1] > 0.4f && img.data[3 * p] < 0.1f) green = true;
  }
  CHECK(red);
  CHECK(green);
  CHECK_THROWS_AS(render_scatter_panels("x", {}), ConfigError);
}
