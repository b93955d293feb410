#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "nasaswin/model.hpp"
#include "nasaswin/ops.hpp"
#include "nasaswin/oracles/oracles.hpp"
#include "nasaswin/train.hpp"

using namespace nasaswin;
namespace oracle = nasaswin::oracle;
namespace fs = std::filesystem;

namespace {

FusedInput random_input(Rng& rng, std::size_t hw = 32) { return FusedInput{oracle::random_tensor({6, hw, hw}, rng)}; }

std::vector<double> identity(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return v;
}

ModelConfig without_branch() {
  ModelConfig c = ModelConfig::toy();
  c.nasa_span.reset();
  return c;
}

// Single-branch Swin classifier assembled from the model's own pieces.
Tensor plain_swin_logits(const NasaSwin& m, const FusedInput& x) {
  const auto& cfg = m.config();
  Tensor t = cmfe_embed(x, m.stem());
  for (std::size_t s = 1; s <= kNumStages; ++s) {
    const auto& stage = m.main_stage(s - 1);
    if (stage.downsample) t = patch_merging(t, cfg.stage_height(s - 1), cfg.stage_width(s - 1), *stage.downsample);
    for (const auto& b : stage.blocks) t = b.forward(t);
  }
  Tensor f = m.head_norm()(mean_axis(t, 0));
  return m.head()(f.reshape({1, f.numel()}));
}

}  // namespace

TEST(Model, OutputShapeAndBatchIndependence) {
  Rng rng(1);
  NasaSwin m = NasaSwin::init(ModelConfig::toy(), 1);
  FusedInput a = random_input(rng), b = random_input(rng);
  Tensor logits = m.forward(std::vector<FusedInput>{a, b, a});
  EXPECT_EQ(logits.shape(), (Shape{3, 2}));
  auto v = logits.to_vector();
  EXPECT_EQ(v[0], v[4]);
  EXPECT_EQ(v[1], v[5]);
  EXPECT_EQ(m.forward(b).to_vector(), std::vector<double>(v.begin() + 2, v.begin() + 4));
  EXPECT_THROW(m.forward(random_input(rng, 64)), ConfigError);
}

TEST(Model, EverySubmoduleReceivesGradient) {
  Rng rng(2);
  NasaSwin m = NasaSwin::init(ModelConfig::toy(), 2);
  cross_entropy(m.forward(std::vector<FusedInput>{random_input(rng), random_input(rng)}), {0, 1}).backward();
  std::map<std::string, bool> live;
  for (auto& [name, t] : m.named_params()) {
    bool nonzero = false;
    for (double g : t.grad()) nonzero = nonzero || g != 0.0;
    // every enclosing module: "stages", "stages.4", ..., "stages.4.blocks.0.attn"
    for (auto dot = name.find('.'); dot != std::string::npos; dot = name.find('.', dot + 1)) {
      live[name.substr(0, dot)] |= nonzero;
    }
  }
  for (const auto& [name, any] : live) EXPECT_TRUE(any) << name;
  std::set<std::string> top;
  for (const auto& [name, any] : live) top.insert(name.substr(0, name.find('.')));
  EXPECT_EQ(top, (std::set<std::string>{"head", "merge", "noise", "stages", "stem"}));
}

TEST(Model, NoBranchIsAPlainSwinClassifier) {
  Rng rng(3);
  NasaSwin plain = NasaSwin::init(without_branch(), 3);
  NasaSwin dual = NasaSwin::init(ModelConfig::toy(), 3);
  for (auto& [name, t] : plain.named_params()) EXPECT_EQ(name.find("noise"), std::string::npos) << name;
  std::map<std::string, std::vector<double>> dual_params;
  for (auto& [name, t] : dual.named_params()) dual_params[name] = t.to_vector();
  for (auto& [name, t] : plain.named_params()) EXPECT_EQ(t.to_vector(), dual_params.at(name)) << name;
  for (int k = 0; k < 3; ++k) {
    FusedInput x = random_input(rng);
    EXPECT_EQ(plain.forward(x).to_vector(), plain_swin_logits(plain, x).to_vector());
  }
}

TEST(Model, TokenCountsPerStage) {
  NasaSwin m = NasaSwin::init(ModelConfig::toy(), 4);
  const std::size_t expected[] = {8, 4, 2, 1};
  for (std::size_t s = 1; s <= kNumStages; ++s) {
    EXPECT_EQ(m.config().stage_height(s), expected[s - 1]);
    EXPECT_EQ(m.config().stage_width(s), expected[s - 1]);
    for (const auto& b : m.main_stage(s - 1).blocks) EXPECT_EQ(b.height * b.width, expected[s - 1] * expected[s - 1]);
  }
  Rng rng(4);
  EXPECT_EQ(cmfe_embed(random_input(rng), m.stem()).shape(), (Shape{64, 12}));
}

TEST(Model, ConfigValidation) {
  ModelConfig c = ModelConfig::toy();
  c.dims = {12, 24, 50, 96};
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig::toy();
  c.nasa_span = std::make_pair<std::size_t, std::size_t>(3, 2);
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig::toy();
  c.input_height = 40;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_NO_THROW(ModelConfig::swin_tiny().validate());
}

TEST(PatchMerging, GatherOrderOnASingleNeighbourhood) {
  Rng rng(5);
  auto p = PatchMergingParams::init(1, rng);
  std::vector<double> w(4 * 2, 0.0);
  w[1 * 2 + 0] = 1.0;  // out 0 <- slot 1
  w[2 * 2 + 1] = 1.0;  // out 1 <- slot 2
  p.reduction.weight.assign(w);
  // TL=0, TR=1, BL=2, BR=3 in row-major order; gathered as TL, BL, TR, BR
  auto out = patch_merging(Tensor::from({4, 1}, {0, 1, 2, 3}), 2, 2, p).to_vector();
  auto ln = oracle::layer_norm({0, 2, 1, 3}, {1, 1, 1, 1}, {0, 0, 0, 0}, 1, 4, p.norm.eps);
  EXPECT_NEAR(out[0], ln[1], 1e-15);
  EXPECT_NEAR(out[1], ln[2], 1e-15);
}

TEST(PatchMerging, ZeroInputAndOracle) {
  Rng rng(6);
  auto p = PatchMergingParams::init(3, rng);
  auto b = oracle::random_vec(6, rng);
  p.reduction.bias.assign(b);
  auto z = patch_merging(Tensor::zeros({16, 3}), 4, 4, p).to_vector();
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(z[t * 6 + c], b[c]);

  std::vector<std::pair<std::string, Tensor>> params;
  p.visit("pm", [&](const std::string& n, Tensor& t) { params.emplace_back(n, t); });
  oracle::randomize_params(params, rng);
  Tensor x = oracle::random_tensor({24, 3}, rng);
  auto got = patch_merging(x, 4, 6, p);
  EXPECT_EQ(got.shape(), (Shape{6, 6}));
  EXPECT_LT(oracle::max_abs_diff(got.data(), oracle::patch_merging(x.to_vector(), 4, 6, 3, p)), 1e-12);
  EXPECT_THROW(patch_merging(Tensor::zeros({15, 3}), 3, 5, p), ConfigError);
}

TEST(ChannelMerge, SelectingMainGivesGeluOfMain) {
  Rng rng(7);
  const std::size_t c = 4;
  auto p = ChannelMergeParams::init(c, rng);
  std::vector<double> w1(2 * c * c, 0.0);
  for (std::size_t i = 0; i < c; ++i) w1[i * c + i] = 1.0;  // identity block over main, zero over noise
  p.fc1.weight.assign(w1);
  p.fc2.weight.assign(identity(c));
  Tensor main = oracle::random_tensor({5, c}, rng), noise = oracle::random_tensor({5, c}, rng);
  auto out = channel_merge(main, noise, p);
  EXPECT_EQ(out.to_vector(), gelu(main).to_vector());
}

TEST(ChannelMerge, ZeroInputBiasPathAndOracle) {
  Rng rng(8);
  const std::size_t c = 6;
  auto p = ChannelMergeParams::init(c, rng);
  std::vector<std::pair<std::string, Tensor>> params;
  p.visit("cm", [&](const std::string& n, Tensor& t) { params.emplace_back(n, t); });
  oracle::randomize_params(params, rng);
  auto z = channel_merge(Tensor::zeros({3, c}), Tensor::zeros({3, c}), p).to_vector();
  auto bias_path = p.fc2(gelu(p.fc1.bias.reshape({1, c}))).to_vector();
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t k = 0; k < c; ++k) EXPECT_EQ(z[t * c + k], bias_path[k]);

  Tensor main = oracle::random_tensor({7, c}, rng), noise = oracle::random_tensor({7, c}, rng);
  auto got = channel_merge(main, noise, p);
  EXPECT_LT(oracle::max_abs_diff(got.data(), oracle::channel_merge(main.to_vector(), noise.to_vector(), 7, c, p)),
            1e-12);
  EXPECT_THROW(channel_merge(main, Tensor::zeros({6, c}), p), DimensionError);
}

TEST(Model, FiftyStepsReduceLossOnAFixedBatch) {
  Rng rng(9);
  NasaSwin m = NasaSwin::init(ModelConfig::toy(), 9);
  std::vector<FusedInput> xs;
  for (int i = 0; i < 8; ++i) xs.push_back(random_input(rng));
  std::vector<const FusedInput*> ptrs;
  for (auto& x : xs) ptrs.push_back(&x);
  const std::vector<int> labels{0, 1, 0, 1, 1, 0, 0, 1};
  SgdOptimizer opt(0.01, 0.0);
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 50; ++step) {
    auto r = compute_batch(m, ptrs, labels, 1);
    if (step == 0) first = r.loss;
    opt.step(m, r.grads);
  }
  last = compute_batch(m, ptrs, labels, 1).loss;
  EXPECT_LE(last, 0.9 * first) << first << " -> " << last;
}

TEST(Checkpoint, RoundtripPreservesLogitsAndConfig) {
  Rng rng(10);
  ModelConfig cfg = ModelConfig::toy();
  cfg.head_mix = HeadMix::PerHead;
  cfg.nasa_span = std::make_pair<std::size_t, std::size_t>(2, 4);
  NasaSwin m = NasaSwin::init(cfg, 10);
  auto path = fs::temp_directory_path() / "nasaswin_test_model.nsw";
  save_checkpoint(path, m);
  NasaSwin back = load_checkpoint(path);
  EXPECT_EQ(back.config().nasa_span, cfg.nasa_span);
  EXPECT_EQ(back.config().head_mix, HeadMix::PerHead);
  FusedInput x = random_input(rng);
  EXPECT_EQ(back.forward(x).to_vector(), m.forward(x).to_vector());
  auto a = m.state_dict(), b = back.state_dict();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_EQ(a[i].values, b[i].values);
  }
}

TEST(Checkpoint, RejectsMissingOrMisshapenParameters) {
  NasaSwin m = NasaSwin::init(ModelConfig::toy(), 11);
  auto sd = m.state_dict();
  auto missing = sd;
  missing.pop_back();
  EXPECT_THROW(m.load_state_dict(missing), CheckpointError);
  auto bent = sd;
  bent[0].shape = {bent[0].values.size()};
  EXPECT_THROW(m.load_state_dict(bent), CheckpointError);
}

TEST(Archive, StreamRoundtripAndBadMagic) {
  std::vector<ArchiveEntry> entries{{"a", {2, 2}, {1, -2, 3.5, 1e-300}}, {"b.c", {}, {7}}};
  std::stringstream ss;
  write_archive(ss, entries);
  auto back = read_archive(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].name, "a");
  EXPECT_EQ(back[0].shape, (Shape{2, 2}));
  EXPECT_EQ(back[0].values, entries[0].values);
  EXPECT_EQ(back[1].values, entries[1].values);
  std::stringstream bad("NSW2\0\0\0\0");
  EXPECT_THROW(read_archive(bad), CheckpointError);
  std::string bytes = ss.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_archive(truncated), CheckpointError);
}
