#include <gtest/gtest.h>

#include <set>

#include "nasaswin/fusion.hpp"
#include "nasaswin/oracles/oracles.hpp"

using namespace nasaswin;
namespace oracle = nasaswin::oracle;

namespace {

Tensor constant_planes(std::vector<double> values, std::size_t h, std::size_t w) {
  std::vector<double> v;
  for (double c : values) v.insert(v.end(), h * w, c);
  return Tensor::from({values.size(), h, w}, std::move(v));
}

std::vector<double> plane_values(const FusedInput& x) {
  const std::size_t hw = x.channels.size(1) * x.channels.size(2);
  std::vector<double> out;
  for (std::size_t c = 0; c < 6; ++c) out.push_back(x.channels.data()[c * hw]);
  return out;
}

MaskChoice choice(MaskChoice::Variant v, std::vector<std::size_t> subset = {}) {
  MaskChoice m;
  m.variant = v;
  m.subset = std::move(subset);
  return m;
}

}  // namespace

TEST(Interleave, ChannelOrder) {
  auto x = interleave(constant_planes({1, 2, 3}, 2, 2), constant_planes({4, 5, 6}, 2, 2));
  EXPECT_EQ(plane_values(x), (std::vector<double>{1, 4, 2, 5, 3, 6}));
  auto rgb_only = interleave(constant_planes({7, 7, 7}, 2, 2), constant_planes({0, 0, 0}, 2, 2));
  EXPECT_EQ(plane_values(rgb_only), (std::vector<double>{7, 0, 7, 0, 7, 0}));
  EXPECT_THROW(interleave(Tensor::zeros({3, 2, 2}), Tensor::zeros({3, 2, 3})), DimensionError);
}

TEST(ApplyMask, Variants) {
  FusedInput ones{Tensor::full({6, 4, 4}, 1.0)};
  EXPECT_EQ(apply_mask(ones, choice(MaskChoice::Variant::NoMask)).channels.to_vector(), ones.channels.to_vector());
  EXPECT_EQ(plane_values(apply_mask(ones, choice(MaskChoice::Variant::MaskRGB))),
            (std::vector<double>{0, 1, 0, 1, 0, 1}));
  EXPECT_EQ(plane_values(apply_mask(ones, choice(MaskChoice::Variant::MaskNoise))),
            (std::vector<double>{1, 0, 1, 0, 1, 0}));
  EXPECT_EQ(plane_values(apply_mask(ones, choice(MaskChoice::Variant::RandomChannels, {1, 4}))),
            (std::vector<double>{1, 0, 1, 1, 0, 1}));
}

TEST(ApplyMask, IdempotentAndCommutesWithInterleave) {
  Rng rng(3);
  Tensor rgb = oracle::random_tensor({3, 4, 4}, rng), noise = oracle::random_tensor({3, 4, 4}, rng);
  auto x = interleave(rgb, noise);
  for (auto v : {MaskChoice::Variant::MaskRGB, MaskChoice::Variant::MaskNoise}) {
    auto once = apply_mask(x, choice(v));
    EXPECT_EQ(apply_mask(once, choice(v)).channels.to_vector(), once.channels.to_vector());
  }
  Tensor zeros = Tensor::zeros({3, 4, 4});
  EXPECT_EQ(apply_mask(x, choice(MaskChoice::Variant::MaskRGB)).channels.to_vector(),
            interleave(zeros, noise).channels.to_vector());
  EXPECT_EQ(apply_mask(x, choice(MaskChoice::Variant::MaskNoise)).channels.to_vector(),
            interleave(rgb, zeros).channels.to_vector());
}

TEST(MaskChoice, Validation) {
  EXPECT_THROW(choice(MaskChoice::Variant::RandomChannels, {}).validate(), ConfigError);
  EXPECT_THROW(choice(MaskChoice::Variant::RandomChannels, {1, 1}).validate(), ConfigError);
  EXPECT_THROW(choice(MaskChoice::Variant::RandomChannels, {6}).validate(), ConfigError);
  EXPECT_THROW(choice(MaskChoice::Variant::RandomChannels, {0, 1, 2, 3}).validate(), ConfigError);
  EXPECT_NO_THROW(choice(MaskChoice::Variant::RandomChannels, {0, 5, 2}).validate());
}

TEST(SampleMask, DeterministicForASeed) {
  Rng a(77), b(77);
  for (int i = 0; i < 200; ++i) {
    auto x = sample_mask(a), y = sample_mask(b);
    EXPECT_EQ(x.variant, y.variant);
    EXPECT_EQ(x.subset, y.subset);
  }
}

TEST(SampleMask, SubsetsAreValid) {
  Rng rng(5);
  std::set<std::size_t> sizes;
  for (int i = 0; i < 2000; ++i) {
    auto m = sample_mask(rng);
    if (m.variant != MaskChoice::Variant::RandomChannels) continue;
    EXPECT_NO_THROW(m.validate());
    sizes.insert(m.subset.size());
  }
  EXPECT_EQ(sizes, (std::set<std::size_t>{1, 2, 3}));
}

TEST(Cmfe, GroupWidthRule) {
  Rng rng(1);
  EXPECT_EQ(CmfeParams::init(12, rng).group_dim, 4u);
  auto odd = CmfeParams::init(10, rng);
  EXPECT_EQ(odd.group_dim, 4u);
  EXPECT_EQ(odd.merge_weight.shape(), (Shape{12, 10}));
}

TEST(Cmfe, ZeroInputGivesBiasPath) {
  Rng rng(2);
  auto p = CmfeParams::init(12, rng);
  std::vector<double> b = oracle::random_vec(12, rng), mb = oracle::random_vec(12, rng);
  p.conv_bias.assign(b);
  p.merge_bias.assign(mb);
  auto tokens = cmfe_embed(FusedInput{Tensor::zeros({6, 8, 8})}, p);
  EXPECT_EQ(tokens.shape(), (Shape{4, 12}));
  auto want = oracle::matmul(b, p.merge_weight.to_vector(), 1, 12, 12);
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t c = 0; c < 12; ++c) EXPECT_NEAR(tokens.data()[t * 12 + c], want[c] + mb[c], 1e-14);
}

TEST(Cmfe, OneHotGroupIsolation) {
  Rng rng(3);
  auto p = CmfeParams::init(3, rng);  // one output channel per group
  std::vector<double> w(3 * 2 * 16, 0.0);
  w[0] = 1.0;  // group 0 reads its first channel at the patch origin
  p.conv_weight.assign(w);
  Tensor x = oracle::random_tensor({6, 8, 8}, rng);
  auto base = cmfe_group_outputs(FusedInput{x}, p).to_vector();
  auto xv = x.to_vector();
  for (std::size_t i = 2 * 64; i < 3 * 64; ++i) xv[i] += 0.5;  // channel 2
  auto moved = cmfe_group_outputs(FusedInput{Tensor::from({6, 8, 8}, xv)}, p).to_vector();
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(moved[i], base[i]);
  EXPECT_EQ(base[0], x.data()[0]);
}

TEST(Cmfe, MatchesNaiveComposition) {
  Rng rng(4);
  auto p = CmfeParams::init(12, rng);
  for (auto* t : {&p.conv_bias, &p.merge_bias}) t->assign(oracle::random_vec(t->numel(), rng));
  Tensor x = oracle::random_tensor({6, 16, 12}, rng);
  auto got = cmfe_embed(FusedInput{x}, p);
  EXPECT_EQ(got.shape(), (Shape{12, 12}));
  EXPECT_LT(oracle::max_abs_diff(got.data(), oracle::cmfe_embed(x.to_vector(), 16, 12, p)), 1e-12);
  EXPECT_EQ(got.reshape({4, 3, 12}).reshape({12, 12}).to_vector(), got.to_vector());
}

TEST(Cmfe, RejectsIndivisibleInput) {
  Rng rng(5);
  auto p = CmfeParams::init(6, rng);
  EXPECT_THROW(cmfe_embed(FusedInput{Tensor::zeros({6, 10, 8})}, p), ConfigError);
}
