#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "turbsyn/covariance.hpp"
#include "turbsyn/field_synthesis.hpp"

using namespace turbsyn;
using namespace turbsyn::test;

namespace {

const CovarianceField& small_field() {
  static const CovarianceField field = [] {
    ImagingGeometry g;
    g.image_width = g.image_height = 32;
    CnProfile profile = CnProfile::constant(600.0, 5e-14, 20);
    return build_covariance_field(g, profile, {});
  }();
  return field;
}

double mean_of(const Grid& g) {
  double s = 0.0;
  for (double v : g.data) s += v;
  return s / g.data.size();
}

double var_of(const Grid& g) {
  double m = mean_of(g), s = 0.0;
  for (double v : g.data) s += (v - m) * (v - m);
  return s / g.data.size();
}

}  // namespace

TEST_CASE("zero PSD produces the zero field") {
  SeedField seed = make_seed(16, 16, 7, 9, 3);
  std::vector<double> psd(256, 0.0);
  Grid out = sample_field(psd, seed);
  for (double v : out.data) CHECK(v == 0.0);
  Grid out2 = sample_field({}, seed);
  for (double v : out2.data) CHECK(v == 0.0);
}

TEST_CASE("shape mismatch is rejected") {
  SeedField seed = make_seed(16, 16, 7, 9, 3);
  std::vector<double> psd(128, 1.0);
  CHECK_THROWS_AS(sample_field(psd, seed), ConfigError);
}

TEST_CASE("flat PSD gives spatially white unit-variance fields") {
  int n = 256;
  std::vector<double> psd(static_cast<size_t>(n) * n, 1.0);
  double lag1 = 0.0, var_acc = 0.0, mean_acc = 0.0;
  int draws = 100;
  for (int d = 0; d < draws; ++d) {
    SeedField seed = make_seed(n, n, 11, d, 5);
    Grid f = sample_field(psd, seed);
    mean_acc += mean_of(f);
    var_acc += var_of(f);
    double c1 = 0.0;
    for (int y = 0; y < n; ++y)
      for (int x = 0; x + 1 < n; ++x) c1 += f.at(x, y) * f.at(x + 1, y);
    lag1 += c1 / (n * (n - 1));
  }
  CHECK(std::abs(mean_acc / draws) < 0.01);
  CHECK(var_acc / draws == doctest::Approx(1.0).epsilon(0.02));
  CHECK(std::abs(lag1 / draws) < 0.02);
}

TEST_CASE("sampled fields reproduce the target autocorrelation (mode 4)") {
  const CovarianceField& field = small_field();
  const auto& psd = field.unit_psd(4);
  const auto& target = field.autocorrelation(4);
  int n = 32;

  std::vector<double> est(9, 0.0);
  int draws = 2000;
  for (int d = 0; d < draws; ++d) {
    SeedField seed = make_seed(n, n, 21, d, 4);
    Grid f = sample_field(psd, seed);
    for (int lag = 0; lag <= 8; ++lag) {
      double c = 0.0;
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) c += f.at(x, y) * f.at((x + lag) % n, y);
      est[lag] += c / (n * n);
    }
  }
  double peak = target[0];
  for (int lag = 0; lag <= 8; ++lag) {
    double expected = target[lag] / peak;  // unit-variance normalization
    double got = est[lag] / draws;
    CHECK(std::abs(got - expected) < 0.1 * std::max(std::abs(expected), 0.15));
  }
}

TEST_CASE("identity mixing passes fields through") {
  std::vector<Grid> fields(kNumModes, Grid(8, 8));
  Rng rng(3);
  for (auto& f : fields)
    for (double& v : f.data) v = rng.next_gaussian();
  std::vector<double> eye(kNumModes * kNumModes, 0.0);
  for (int i = 0; i < kNumModes; ++i) eye[i * kNumModes + i] = 1.0;
  CoefficientFields out = mix_modes(fields, eye);
  for (int j = 1; j <= kNumModes; ++j)
    CHECK(out.mode(j).data == fields[j - 1].data);
}

TEST_CASE("zero input fields mix to zero") {
  std::vector<Grid> fields(kNumModes, Grid(8, 8));
  NollCovariance noll = noll_covariance();
  CoefficientFields out = mix_modes(fields, noll.cholesky);
  for (int j = 1; j <= kNumModes; ++j)
    for (double v : out.mode(j).data) CHECK(v == 0.0);
}

TEST_CASE("Monte-Carlo pixel covariance reproduces the mixing matrix") {
  const CovarianceField& field = small_field();
  const auto& s0 = field.s0_matrix();

  // Sample covariance at one pixel over 5000 frame draws (alpha = 0
  // regenerates independent fields each frame).
  int draws = 5000;
  std::vector<std::vector<double>> samples(kNumModes);
  FieldSynthesizer synth(field, 99, 1, 0.0);
  for (int d = 0; d < draws; ++d) {
    CoefficientFields c = synth.next_frame();
    for (int j = 2; j <= kNumModes; ++j)
      samples[j - 1].push_back(c.mode(j).at(7, 9));
  }
  double num = 0.0, den = 0.0;
  for (int i = 2; i <= kNumModes; ++i) {
    for (int j = 2; j <= kNumModes; ++j) {
      double c = 0.0;
      for (int d = 0; d < draws; ++d)
        c += samples[i - 1][d] * samples[j - 1][d];
      c /= draws;
      double expected = s0[(i - 1) * kNumModes + (j - 1)];
      num += (c - expected) * (c - expected);
      den += expected * expected;
    }
  }
  CHECK(std::sqrt(num / den) < 0.1);
}

TEST_CASE("temporal alpha outside [0,1] is rejected") {
  CHECK_THROWS_AS(TemporalChain::start(-0.1, 8, 8, 1, 2, 3), ConfigError);
  CHECK_THROWS_AS(TemporalChain::start(1.1, 8, 8, 1, 2, 3), ConfigError);
}

TEST_CASE("alpha = 0 gives uncorrelated consecutive seeds") {
  TemporalChain chain = TemporalChain::start(0.0, 100, 100, 5, 6, 7);
  std::vector<std::complex<double>> prev = chain.seed.values;
  chain.advance();
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < prev.size(); ++i) {
    dot += prev[i].real() * chain.seed.values[i].real();
    na += prev[i].real() * prev[i].real();
    nb += chain.seed.values[i].real() * chain.seed.values[i].real();
  }
  CHECK(std::abs(dot / std::sqrt(na * nb)) < 0.02);
}

TEST_CASE("alpha = 1 freezes the seed exactly") {
  TemporalChain chain = TemporalChain::start(1.0, 16, 16, 5, 6, 7);
  std::vector<std::complex<double>> first = chain.seed.values;
  for (int t = 0; t < 5; ++t) {
    chain.advance();
    CHECK(chain.seed.values == first);
  }
}

TEST_CASE("lag-k seed correlation tracks alpha^k") {
  double alpha = 0.8;
  TemporalChain chain = TemporalChain::start(alpha, 100, 100, 42, 1, 2);
  std::vector<std::vector<double>> re_series;
  re_series.push_back({});
  for (const auto& v : chain.seed.values) re_series[0].push_back(v.real());
  for (int t = 1; t <= 5; ++t) {
    chain.advance();
    re_series.push_back({});
    for (const auto& v : chain.seed.values) re_series[t].push_back(v.real());
  }
  for (int k = 1; k <= 5; ++k) {
    double dot = 0.0, n0 = 0.0, nk = 0.0;
    for (size_t i = 0; i < re_series[0].size(); ++i) {
      dot += re_series[0][i] * re_series[k][i];
      n0 += re_series[0][i] * re_series[0][i];
      nk += re_series[k][i] * re_series[k][i];
    }
    double corr = dot / std::sqrt(n0 * nk);
    CHECK(std::abs(corr - std::pow(alpha, k)) < 0.03);
  }
}

TEST_CASE("marginal variance is preserved along the chain") {
  for (double alpha : {0.3, 0.9}) {
    TemporalChain chain = TemporalChain::start(alpha, 64, 64, 8, 9, 10);
    for (int t = 0; t <= 100; ++t) {
      if (t > 0) chain.advance();
      if (t % 20 != 0) continue;
      double var = 0.0;
      for (const auto& v : chain.seed.values)
        var += v.real() * v.real() + v.imag() * v.imag();
      var /= 2.0 * chain.seed.values.size();
      CHECK(var == doctest::Approx(1.0).epsilon(0.05));
    }
  }
}

TEST_CASE("coefficient fields are bit-exactly reproducible") {
  const CovarianceField& field = small_field();
  auto run = [&](int frames) {
    FieldSynthesizer synth(field, 1234, 777, 0.8);
    CoefficientFields last;
    for (int f = 0; f < frames; ++f) last = synth.next_frame();
    return last;
  };
  CoefficientFields a = run(4);
  CoefficientFields b = run(4);
  for (int j = 1; j <= kNumModes; ++j)
    CHECK(a.mode(j).data == b.mode(j).data);
}

TEST_CASE("pre-mixing fields have unit ensemble variance per pixel") {
  // Tilt modes are long-range correlated, so one realization is not
  // spatially ergodic; the invariant is over the ensemble.
  const CovarianceField& field = small_field();
  for (int mode : {2, 4, 13, 30}) {
    double mean = 0.0, second = 0.0;
    int draws = 800;
    for (int d = 0; d < draws; ++d) {
      SeedField seed = make_seed(32, 32, 3, d, mode);
      Grid f = sample_field(field.unit_psd(mode), seed);
      mean += f.at(5, 11);
      second += f.at(5, 11) * f.at(5, 11);
    }
    mean /= draws;
    second /= draws;
    CHECK(std::abs(mean) < 0.12);
    CHECK(second - mean * mean == doctest::Approx(1.0).epsilon(0.12));
  }
}

TEST_CASE("spatial stationarity: disjoint regions agree statistically") {
  const CovarianceField& field = small_field();
  const auto& psd = field.unit_psd(4);
  double var_a = 0.0, var_b = 0.0;
  int draws = 600;
  for (int d = 0; d < draws; ++d) {
    SeedField seed = make_seed(32, 32, 77, d, 4);
    Grid f = sample_field(psd, seed);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        var_a += f.at(x, y) * f.at(x, y);
        var_b += f.at(x + 16, y + 16) * f.at(x + 16, y + 16);
      }
  }
  var_a /= draws * 256.0;
  var_b /= draws * 256.0;
  CHECK(var_a == doctest::Approx(var_b).epsilon(0.05));
}
