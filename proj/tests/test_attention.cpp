#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "nasaswin/attention.hpp"
#include "nasaswin/ops.hpp"
#include "nasaswin/oracles/oracles.hpp"

using namespace nasaswin;
namespace oracle = nasaswin::oracle;

namespace {

Tensor numbered(std::size_t n, std::size_t c = 1) {
  std::vector<double> v(n * c);
  std::iota(v.begin(), v.end(), 0.0);
  return Tensor::from({n, c}, std::move(v));
}

std::vector<double> identity(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return v;
}

/// Q = K = 0, V = identity, no bias, identity output projection.
WindowAttentionParams uniform_attention(std::size_t dim, std::size_t heads, std::size_t window) {
  Rng rng(0);
  auto p = WindowAttentionParams::init(dim, heads, window, rng);
  std::vector<double> w(dim * 3 * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) w[i * 3 * dim + 2 * dim + i] = 1.0;
  p.qkv.weight.assign(w);
  p.relative_bias.assign(std::vector<double>(p.relative_bias.numel(), 0.0));
  p.proj.weight.assign(identity(dim));
  return p;
}

}  // namespace

TEST(WindowPartition, SingleWindowAndIndexOrder) {
  Tensor x = numbered(16, 2);
  auto whole = window_partition(x, 4, 4, 4);
  EXPECT_EQ(whole.tokens.to_vector(), x.to_vector());

  auto grid = window_partition(numbered(16), 4, 4, 2);
  EXPECT_EQ(grid.num_windows(), 4u);
  auto v = grid.tokens.to_vector();
  EXPECT_EQ(std::vector<double>(v.begin(), v.begin() + 4), (std::vector<double>{0, 1, 4, 5}));
  EXPECT_EQ(std::vector<double>(v.begin() + 12, v.end()), (std::vector<double>{10, 11, 14, 15}));
  EXPECT_THROW(window_partition(numbered(12), 3, 4, 2), ConfigError);
}

TEST(WindowPartition, RoundtripIsBitExact) {
  Rng rng(1);
  for (auto [h, w, m] : {std::tuple<std::size_t, std::size_t, std::size_t>{8, 8, 4}, {6, 9, 3}, {7, 14, 7}}) {
    Tensor x = oracle::random_tensor({h * w, 5}, rng);
    EXPECT_EQ(window_reverse(window_partition(x, h, w, m)).to_vector(), x.to_vector());
  }
}

TEST(CyclicShift, RollDirectionAndInverse) {
  Tensor x = numbered(16);
  EXPECT_EQ(cyclic_shift(x, 4, 4, 0).to_vector(), x.to_vector());
  auto s = cyclic_shift(x, 4, 4, 1).to_vector();
  EXPECT_EQ(s[0], 5.0);    // (0,0) <- (1,1)
  EXPECT_EQ(s[15], 0.0);   // (3,3) <- (0,0)
  Rng rng(2);
  Tensor r = oracle::random_tensor({48, 3}, rng);
  EXPECT_EQ(cyclic_unshift(cyclic_shift(r, 6, 8, 3), 6, 8, 3).to_vector(), r.to_vector());
}

TEST(ShiftMask, ZeroWithoutShift) {
  auto mask = build_shift_mask(8, 8, 4, 0);
  for (double v : mask.values.data()) EXPECT_EQ(v, 0.0);
}

TEST(ShiftMask, CornerWindowIsolatesEveryToken) {
  auto mask = build_shift_mask(4, 4, 2, 1).values;
  EXPECT_EQ(mask.shape(), (Shape{4, 4, 4}));
  auto m = mask.data();
  const std::size_t corner = 3;
  for (std::size_t i = 0; i < 4; ++i) {
    int zeros = 0;
    for (std::size_t j = 0; j < 4; ++j) zeros += m[corner * 16 + i * 4 + j] == 0.0;
    EXPECT_EQ(zeros, 1);
    EXPECT_EQ(m[corner * 16 + i * 4 + i], 0.0);
  }
}

TEST(ShiftMask, MatchesBruteForceLabellingAndIsSymmetric) {
  for (auto [h, w, m, s] : {std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>{4, 4, 2, 1},
                            {8, 8, 4, 2},
                            {14, 7, 7, 3},
                            {12, 8, 4, 1}}) {
    auto got = build_shift_mask(h, w, m, s).values;
    EXPECT_EQ(got.to_vector(), oracle::brute_force_shift_mask(h, w, m, s));
    auto d = got.data();
    const std::size_t t = m * m;
    for (std::size_t k = 0; k < got.size(0); ++k)
      for (std::size_t i = 0; i < t; ++i)
        for (std::size_t j = 0; j < t; ++j) EXPECT_EQ(d[k * t * t + i * t + j], d[k * t * t + j * t + i]);
  }
}

TEST(ShiftMask, MaskedSoftmaxRowsSumToOne) {
  Rng rng(3);
  auto mask = build_shift_mask(8, 8, 4, 2).values;
  Tensor scores = oracle::random_tensor(mask.shape(), rng, false, -3, 3);
  auto p = softmax(add(scores, mask), 2).to_vector();
  auto md = mask.data();
  for (std::size_t row = 0; row < p.size() / 16; ++row) {
    double s = 0.0;
    for (std::size_t j = 0; j < 16; ++j) {
      s += p[row * 16 + j];
      if (md[row * 16 + j] != 0.0) {
        EXPECT_LT(p[row * 16 + j], 1e-6);
      }
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(StandardAttention, ZeroLogitsGiveWindowMean) {
  Rng rng(4);
  auto p = uniform_attention(4, 2, 2);
  Tensor x = oracle::random_tensor({16, 4}, rng);
  auto win = window_partition(x, 4, 4, 2);
  auto out = standard_window_attention(win, p, {}).tokens.to_vector();
  auto in = win.tokens.to_vector();
  for (std::size_t w = 0; w < 4; ++w)
    for (std::size_t c = 0; c < 4; ++c) {
      double mean = 0.0;
      for (std::size_t t = 0; t < 4; ++t) mean += in[(w * 4 + t) * 4 + c] / 4.0;
      for (std::size_t t = 0; t < 4; ++t) EXPECT_NEAR(out[(w * 4 + t) * 4 + c], mean, 1e-14);
    }
}

TEST(StandardAttention, SingleTokenWindowIgnoresQueryKey) {
  Rng rng(5);
  auto p = WindowAttentionParams::init(6, 3, 1, rng);
  p.qkv.bias.assign(oracle::random_vec(18, rng));
  Tensor x = oracle::random_tensor({4, 6}, rng);
  auto out = standard_window_attention(window_partition(x, 2, 2, 1), p, {}).tokens;
  auto v = slice(p.qkv(x), 1, 12, 18);
  EXPECT_LT(oracle::max_abs_diff(out.data(), p.proj(v).data()), 1e-14);
}

TEST(StandardAttention, MatchesPairLoopOracle) {
  Rng rng(6);
  auto p = WindowAttentionParams::init(4, 2, 2, rng);
  std::vector<std::pair<std::string, Tensor>> params;
  p.visit("a", [&](const std::string& n, Tensor& t) { params.emplace_back(n, t); });
  oracle::randomize_params(params, rng);
  Tensor x = oracle::random_tensor({16, 4}, rng);
  auto shifted = cyclic_shift(x, 4, 4, 1);
  auto win = window_partition(shifted, 4, 4, 2, 1);
  auto mask = build_shift_mask(4, 4, 2, 1);
  auto got = standard_window_attention(win, p, mask).tokens;
  auto want = oracle::standard_window_attention(win.tokens.to_vector(), 4, 2, p, mask.values.to_vector());
  EXPECT_LT(oracle::max_abs_diff(got.data(), want), 1e-12);
}

TEST(StandardAttention, DimMismatchIsAConfigError) {
  Rng rng(7);
  auto p = WindowAttentionParams::init(8, 2, 2, rng);
  EXPECT_THROW(standard_window_attention(window_partition(Tensor::zeros({16, 4}), 4, 4, 2), p, {}), ConfigError);
  EXPECT_THROW(WindowAttentionParams::init(6, 4, 2, rng), ConfigError);
}

TEST(NasaMatrix, HandExamples) {
  std::vector<GridPos> two{{0, 0}, {0, 1}};
  auto m = nasa_attn_matrix(Tensor::from({2, 1}, {1, 3}), two).to_vector();
  EXPECT_EQ(m, (std::vector<double>{0, 2, 2, 0}));

  auto pos = window_positions(2);
  auto a = nasa_attn_matrix(Tensor::from({4, 1}, {1, 3, 2, 1}), pos).to_vector();
  EXPECT_EQ(a[0 * 4 + 3], 0.0);
  EXPECT_EQ(a[0 * 4 + 1], 2.0);
  EXPECT_EQ(a[0 * 4 + 2], 1.0);
  EXPECT_DOUBLE_EQ(a[1 * 4 + 2], 1.0 / std::sqrt(2.0));

  Tensor flat = nasa_attn_matrix(Tensor::full({9, 3}, 0.7), window_positions(3));
  for (double v : flat.data()) EXPECT_EQ(v, 0.0);
}

TEST(NasaMatrix, TwoTokenSoftmaxRows) {
  std::vector<GridPos> two{{0, 0}, {0, 1}};
  auto p = softmax(nasa_attn_matrix(Tensor::from({2, 1}, {1, 3}), two), 1).to_vector();
  EXPECT_NEAR(p[0], 0.1192, 5e-5);
  EXPECT_NEAR(p[1], 0.8808, 5e-5);
  EXPECT_NEAR(p[2], 0.8808, 5e-5);
  EXPECT_NEAR(p[3], 0.1192, 5e-5);
}

TEST(NasaMatrix, AlgebraicProperties) {
  Rng rng(8);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t m = 2 + rng.below(5), d = 1 + rng.below(4), t = m * m;
    auto pos = window_positions(m);
    Tensor f = oracle::random_tensor({t, d}, rng);
    auto a = nasa_attn_matrix(f, pos).to_vector();
    for (std::size_t i = 0; i < t; ++i) {
      EXPECT_EQ(a[i * t + i], 0.0);
      for (std::size_t j = 0; j < t; ++j) EXPECT_EQ(a[i * t + j], a[j * t + i]);
    }
    auto fv = f.to_vector();
    const double c = 1.0 + rng.uniform(0.5, 3.0), shift = rng.uniform(-2, 2);
    std::vector<double> scaled(fv), moved(fv);
    for (auto& v : scaled) v *= c;
    for (auto& v : moved) v += shift;
    auto as = nasa_attn_matrix(Tensor::from({t, d}, scaled), pos).to_vector();
    auto at = nasa_attn_matrix(Tensor::from({t, d}, moved), pos).to_vector();
    for (std::size_t k = 0; k < t * t; ++k) {
      EXPECT_NEAR(as[k], c * a[k], 1e-12);
      EXPECT_NEAR(at[k], a[k], 1e-12);
    }
  }
}

TEST(NasaMatrix, ProximityDominance) {
  // token 0 differs by 1 from every other token; scores fall with distance
  std::vector<double> f(16, 1.0);
  f[0] = 0.0;
  auto pos = window_positions(4);
  auto a = nasa_attn_matrix(Tensor::from({16, 1}, f), pos).to_vector();
  for (std::size_t j = 1; j < 16; ++j)
    for (std::size_t k = 1; k < 16; ++k) {
      const double dj = std::hypot(pos[j].row, pos[j].col), dk = std::hypot(pos[k].row, pos[k].col);
      if (dj < dk) {
        EXPECT_GT(a[j], a[k]);
      }
    }
}

TEST(NasaAttention, ConstantFeaturesGiveMeanOfValues) {
  Rng rng(9);
  auto p = NasaParams::init(4, 2, HeadMix::CrossHead, rng);
  p.value.weight.assign(identity(4));
  p.proj.weight.assign(identity(4));
  std::vector<double> x(16 * 4);
  for (std::size_t t = 0; t < 16; ++t)
    for (std::size_t c = 0; c < 4; ++c) x[t * 4 + c] = static_cast<double>(c);
  auto win = window_partition(Tensor::from({16, 4}, x), 4, 4, 4);
  auto out = nasa_attention(win, p, {}).tokens.to_vector();
  for (std::size_t t = 0; t < 16; ++t)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(out[t * 4 + c], static_cast<double>(c), 1e-14);
}

TEST(NasaAttention, MatchesLoopCompositionBothHeadMixes) {
  Rng rng(10);
  for (HeadMix mix : {HeadMix::CrossHead, HeadMix::PerHead}) {
    auto p = NasaParams::init(8, 4, mix, rng);
    std::vector<std::pair<std::string, Tensor>> params;
    p.visit("n", [&](const std::string& n, Tensor& t) { params.emplace_back(n, t); });
    oracle::randomize_params(params, rng);
    Tensor x = oracle::random_tensor({64, 8}, rng);
    auto win = window_partition(cyclic_shift(x, 8, 8, 2), 8, 8, 4, 2);
    auto mask = build_shift_mask(8, 8, 4, 2);
    auto got = nasa_attention(win, p, mask).tokens;
    auto want = oracle::nasa_attention(win.tokens.to_vector(), 4, 4, p, mask.values.to_vector());
    EXPECT_LT(oracle::max_abs_diff(got.data(), want), 1e-10);
  }
}

TEST(NasaAttention, HasNoQueryKeyParameters) {
  Rng rng(11);
  auto p = NasaParams::init(8, 2, HeadMix::CrossHead, rng);
  std::vector<std::string> names;
  p.visit("n", [&](const std::string& n, Tensor&) { names.push_back(n); });
  for (const auto& n : names) {
    EXPECT_EQ(n.find("qkv"), std::string::npos);
    EXPECT_EQ(n.find("query"), std::string::npos);
    EXPECT_EQ(n.find("key"), std::string::npos);
  }
  EXPECT_EQ(p.head_mix_weight.to_vector(), identity(2));
  EXPECT_THROW(NasaParams::init(6, 4, HeadMix::CrossHead, rng), ConfigError);
}
