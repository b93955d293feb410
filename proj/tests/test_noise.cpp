#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "nasaswin/image_io.hpp"
#include "nasaswin/noise.hpp"
#include "nasaswin/oracles/oracles.hpp"
#include "nasaswin/rng.hpp"

using namespace nasaswin;
namespace oracle = nasaswin::oracle;
namespace fs = std::filesystem;

namespace {

Tensor impulse(std::size_t n, double v = 1.0) {
  std::vector<double> x(3 * n * n, 0.0);
  for (std::size_t c = 0; c < 3; ++c) x[c * n * n + (n / 2) * n + n / 2] = v;
  return Tensor::from({3, n, n}, std::move(x));
}

Tensor quantized_image(Rng& rng, std::size_t h, std::size_t w) {
  std::vector<double> v(3 * h * w);
  for (auto& x : v) x = static_cast<double>(rng.below(256)) / 255.0;
  return Tensor::from({3, h, w}, std::move(v));
}

fs::path scratch_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("nasaswin_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(Denoise, ConstantImageIsAFixedPoint) {
  Tensor img = Tensor::full({3, 9, 7}, 0.4);
  for (const char* spec : {"median:3", "median:5", "gaussian:1.0", "gaussian:2.5"}) {
    EXPECT_EQ(denoise(img, DenoiserSpec::parse(spec)).to_vector(), img.to_vector()) << spec;
  }
}

TEST(Denoise, MedianRemovesIsolatedPixel) {
  auto out = denoise(impulse(7), DenoiserSpec::parse("median:3")).to_vector();
  for (double v : out) EXPECT_EQ(v, 0.0);
}

TEST(Denoise, GaussianImpulseIsTheSeparableKernel) {
  const std::size_t n = 15;
  const double sigma = 1.0;
  auto out = denoise(impulse(n), DenoiserSpec::parse("gaussian:1.0")).to_vector();
  // closed form: normalized exp(-k^2 / 2 sigma^2) on k in [-3, 3], outer product
  std::vector<double> taps;
  double total = 0.0;
  for (int k = -3; k <= 3; ++k) {
    taps.push_back(std::exp(-k * k / (2 * sigma * sigma)));
    total += taps.back();
  }
  for (auto& t : taps) t /= total;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        const int dy = static_cast<int>(y) - 7, dx = static_cast<int>(x) - 7;
        const double want = (std::abs(dy) <= 3 && std::abs(dx) <= 3) ? taps[dy + 3] * taps[dx + 3] : 0.0;
        EXPECT_NEAR(out[c * n * n + y * n + x], want, 1e-9);
      }
}

TEST(Denoise, ExternalMissingFileNamesTheStem) {
  auto dir = scratch_dir("external");
  auto spec = DenoiserSpec::parse("external:" + dir.string());
  try {
    denoise(Tensor::full({3, 4, 4}, 0.5), spec, "img_0042");
    FAIL() << "expected IngestionError";
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("img_0042"), std::string::npos) << e.what();
  }
  write_image(dir / "img_0042.png", Tensor::full({3, 4, 4}, 0.25));
  auto d = denoise(Tensor::full({3, 4, 4}, 0.5), spec, "img_0042").to_vector();
  for (double v : d) EXPECT_DOUBLE_EQ(v, std::round(0.25 * 255) / 255);
}

TEST(Denoise, SpecParsing) {
  EXPECT_EQ(DenoiserSpec::parse("median:3").to_string(), "median:3");
  EXPECT_EQ(DenoiserSpec::parse("gaussian:1.5").kind, DenoiserSpec::Kind::Gaussian);
  EXPECT_THROW(DenoiserSpec::parse("bilateral:2"), ConfigError);
  EXPECT_THROW(DenoiserSpec::parse("median:x"), ConfigError);
}

TEST(Residual, DifferenceCases) {
  Rng rng(2);
  Tensor x = oracle::random_tensor({3, 5, 5}, rng, false, 0, 1);
  Tensor zero = residual(x, x);
  for (double v : zero.data()) EXPECT_EQ(v, 0.0);
  std::vector<double> shifted = x.to_vector();
  for (auto& v : shifted) v += 0.125;
  Tensor eighth = residual(Tensor::from({3, 5, 5}, shifted), x);
  for (double v : eighth.data()) EXPECT_NEAR(v, 0.125, 1e-15);
  EXPECT_THROW(residual(x, Tensor::zeros({3, 5, 4})), DimensionError);
}

TEST(Residual, ImpulseMinusBlurSumsToZero) {
  Tensor img = impulse(15);
  auto r = residual(img, denoise(img, DenoiserSpec::parse("gaussian:1.0"))).to_vector();
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < 225; ++i) s += r[c * 225 + i];
    EXPECT_NEAR(s, 0.0, 1e-9);
    EXPECT_GT(r[c * 225 + 7 * 15 + 7], 0.0);
    EXPECT_LT(r[c * 225 + 7 * 15 + 8], 0.0);
    EXPECT_LT(r[c * 225 + 6 * 15 + 7], 0.0);
  }
}

// Bit-exact wherever x - d is representable; a dyadic pixel grid makes every
// difference exact.
TEST(Residual, ReconstructsDyadicInputExactly) {
  Rng rng(4);
  std::vector<double> px(3 * 12 * 10);
  for (auto& v : px) v = static_cast<double>(rng.below(257)) / 256.0;
  Tensor img = Tensor::from({3, 12, 10}, px);
  Tensor d = denoise(img, DenoiserSpec::parse("median:3"));
  auto r = residual(img, d).to_vector();
  auto dv = d.to_vector(), xv = img.to_vector();
  for (std::size_t i = 0; i < xv.size(); ++i) EXPECT_EQ(r[i] + dv[i], xv[i]);
}

TEST(Residual, ReconstructsEightBitInputToRounding) {
  Rng rng(5);
  Tensor img = quantized_image(rng, 12, 10);
  for (const char* spec : {"median:3", "gaussian:1.0"}) {
    Tensor d = denoise(img, DenoiserSpec::parse(spec));
    auto r = residual(img, d).to_vector();
    auto dv = d.to_vector(), xv = img.to_vector();
    // one rounding in x - d, bounded by an ulp of the larger operand (<= 1)
    for (std::size_t i = 0; i < xv.size(); ++i)
      EXPECT_NEAR(r[i] + dv[i], xv[i], std::numeric_limits<double>::epsilon()) << spec;
  }
}

TEST(Fft, ConstantAndImpulse) {
  auto s = fft2(Tensor::full({4, 4}, 2.5));
  auto re = s.real.to_vector(), im = s.imag.to_vector();
  EXPECT_NEAR(re[0], 40.0, 1e-12);
  for (std::size_t i = 1; i < 16; ++i) EXPECT_NEAR(std::hypot(re[i], im[i]), 0.0, 1e-12);
  std::vector<double> d(36, 0.0);
  d[0] = 1.0;
  auto u = fft2(Tensor::from({6, 6}, d));
  for (std::size_t i = 0; i < 36; ++i) {
    EXPECT_NEAR(u.real.data()[i], 1.0, 1e-12);
    EXPECT_NEAR(u.imag.data()[i], 0.0, 1e-12);
  }
}

TEST(Fft, MatchesNaiveDftAndParseval) {
  Rng rng(8);
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{8, 8}, {5, 7}, {16, 12}}) {
    Tensor x = oracle::random_tensor({h, w}, rng);
    auto got = fft2(x);
    auto [re, im] = oracle::dft2(x.to_vector(), h, w);
    EXPECT_LT(oracle::max_abs_diff(got.real.data(), re), 1e-9);
    EXPECT_LT(oracle::max_abs_diff(got.imag.data(), im), 1e-9);
    double e_time = 0.0, e_freq = 0.0;
    for (double v : x.data()) e_time += v * v;
    for (std::size_t i = 0; i < h * w; ++i)
      e_freq += got.real.data()[i] * got.real.data()[i] + got.imag.data()[i] * got.imag.data()[i];
    EXPECT_NEAR(e_freq / static_cast<double>(h * w), e_time, 1e-6 * e_time);
  }
}

TEST(CorpusStats, FirstAccumulationAndNegation) {
  Rng rng(12);
  Tensor r = oracle::random_tensor({3, 8, 8}, rng, false, -0.2, 0.2);
  CorpusStats s = accumulate_stats({}, r);
  EXPECT_EQ(s.count, 1u);
  EXPECT_EQ(s.mean_residual.to_vector(), r.to_vector());
  EXPECT_EQ(s.mean_log_spectrum.to_vector(), log_spectrum(r).to_vector());
  auto neg = r.to_vector();
  for (auto& v : neg) v = -v;
  s = accumulate_stats(s, Tensor::from({3, 8, 8}, neg));
  EXPECT_EQ(s.count, 2u);
  for (double v : s.mean_residual.data()) EXPECT_EQ(v, 0.0);
}

TEST(CorpusStats, OrderIndependentAndHermitian) {
  Rng rng(13);
  std::vector<Tensor> rs;
  for (int i = 0; i < 7; ++i) rs.push_back(oracle::random_tensor({3, 8, 10}, rng, false, -0.3, 0.3));
  CorpusStats fwd, bwd;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    fwd = accumulate_stats(fwd, rs[i]);
    bwd = accumulate_stats(bwd, rs[rs.size() - 1 - i]);
  }
  EXPECT_LT(oracle::max_abs_diff(fwd.mean_residual.data(), bwd.mean_residual.data()), 1e-9);
  EXPECT_LT(oracle::max_abs_diff(fwd.mean_log_spectrum.data(), bwd.mean_log_spectrum.data()), 1e-9);

  oracle::Vec running(3 * 80, 0.0);
  for (auto& r : rs)
    for (std::size_t i = 0; i < running.size(); ++i) running[i] += r.data()[i] / 7.0;
  EXPECT_LT(oracle::max_abs_diff(fwd.mean_residual.data(), running), 1e-9);

  auto m = fwd.mean_log_spectrum.data();
  const std::size_t h = 8, w = 10;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        EXPECT_NEAR(m[c * h * w + y * w + x], m[c * h * w + ((h - y) % h) * w + (w - x) % w], 1e-12);
}

TEST(CorpusStats, GridCorpusPeaksAtQuarterBins) {
  const std::size_t n = 32;
  Rng rng(14);
  CorpusStats s;
  for (int k = 0; k < 8; ++k) {
    std::vector<double> r(3 * n * n);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x)
          r[c * n * n + y * n + x] = (y % 4 == 0 || x % 4 == 0 ? 0.1 : 0.0) + 0.01 * rng.normal();
    s = accumulate_stats(s, Tensor::from({3, n, n}, r));
  }
  Tensor spec = channel_mean(s.mean_log_spectrum);
  auto d = spec.data();
  std::vector<double> off;
  auto lattice = [](std::size_t v) { return v % (32 / 4) == 0; };
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x)
      if (!(lattice(y) || lattice(x))) off.push_back(d[y * n + x]);
  std::nth_element(off.begin(), off.begin() + static_cast<std::ptrdiff_t>(off.size() / 2), off.end());
  const double median = off[off.size() / 2];
  for (std::size_t y : {n / 2 - n / 4, n / 2 + n / 4})
    for (std::size_t x : {n / 2 - n / 4, n / 2 + n / 4}) EXPECT_GT(d[y * n + x], 5.0 * median);
  EXPECT_GE(peak_contrast(spec), 5.0);
}

TEST(ImageIo, PngAndPpmRoundtrip) {
  auto dir = scratch_dir("io");
  Rng rng(15);
  Tensor img = quantized_image(rng, 6, 9);
  for (const char* name : {"a.png", "a.ppm"}) {
    write_image(dir / name, img);
    Tensor back = read_image(dir / name);
    EXPECT_EQ(back.shape(), img.shape());
    EXPECT_LT(oracle::max_abs_diff(back.data(), img.data()), 1e-12) << name;
  }
  EXPECT_THROW(read_image(dir / "missing.png"), IngestionError);
  std::ofstream(dir / "bad.ppm") << "P6\n4 4\n255\nxx";
  EXPECT_THROW(read_image(dir / "bad.ppm"), IngestionError);
}
