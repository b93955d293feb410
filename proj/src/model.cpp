#include "nasaswin/model.hpp"

#include <algorithm>
#include <map>

#include "nasaswin/ops.hpp"

namespace nasaswin {

ModelConfig ModelConfig::toy() { return ModelConfig{}; }

ModelConfig ModelConfig::swin_tiny() {
  ModelConfig c;
  c.depths = {2, 2, 6, 2};
  c.dims = {96, 192, 384, 768};
  c.heads = {3, 6, 12, 24};
  c.window = 7;
  c.input_height = 224;
  c.input_width = 224;
  return c;
}

void ModelConfig::validate() const {
  for (std::size_t i = 0; i < kNumStages; ++i) {
    if (depths[i] == 0) throw ConfigError("stage " + std::to_string(i + 1) + " depth must be positive");
    if (dims[i] == 0 || heads[i] == 0 || dims[i] % heads[i] != 0) {
      throw ConfigError("stage " + std::to_string(i + 1) + " dim " + std::to_string(dims[i]) +
                        " not divisible by heads " + std::to_string(heads[i]));
    }
    if (i + 1 < kNumStages && dims[i + 1] != 2 * dims[i]) throw ConfigError("stage dims must double from stage to stage");
  }
  if (window == 0) throw ConfigError("window must be positive");
  if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
  if (input_height == 0 || input_width == 0 || input_height % 32 != 0 || input_width % 32 != 0) {
    throw ConfigError("input size " + std::to_string(input_height) + "x" + std::to_string(input_width) +
                      " must be a positive multiple of 32");
  }
  if (nasa_span) {
    auto [a, b] = *nasa_span;
    if (a < 1 || b > kNumStages || a > b) {
      throw ConfigError("nasa_span must be a contiguous range within stages 1..4");
    }
  }
  if (mlp_ratio == 0) throw ConfigError("mlp_ratio must be positive");
  for (std::size_t s = 1; s <= kNumStages; ++s) {
    const std::size_t h = stage_height(s), w = stage_width(s);
    const std::size_t m = std::min({window, h, w});
    if (h % m != 0 || w % m != 0) {
      throw ConfigError("stage " + std::to_string(s) + " grid " + std::to_string(h) + "x" + std::to_string(w) +
                        " not divisible by window " + std::to_string(m));
    }
  }
}

bool ModelConfig::stage_in_span(std::size_t stage) const {
  return nasa_span && stage >= nasa_span->first && stage <= nasa_span->second;
}

std::size_t ModelConfig::stage_height(std::size_t stage) const { return input_height / kPatchSize >> (stage - 1); }
std::size_t ModelConfig::stage_width(std::size_t stage) const { return input_width / kPatchSize >> (stage - 1); }

SwinBlock SwinBlock::init(AttentionKind kind, std::size_t dim, std::size_t heads, std::size_t height, std::size_t width,
                          std::size_t window, bool shifted, HeadMix mix, std::size_t mlp_ratio, Rng& rng) {
  SwinBlock b;
  b.kind = kind;
  b.height = height;
  b.width = width;
  b.window = window;
  if (std::min(height, width) <= window) {
    b.window = std::min(height, width);
    shifted = false;
  }
  b.shift = shifted ? b.window / 2 : 0;
  b.norm1 = LayerNorm::init(dim);
  if (kind == AttentionKind::Standard) {
    b.attn = WindowAttentionParams::init(dim, heads, b.window, rng);
  } else {
    b.nasa = NasaParams::init(dim, heads, mix, rng);
  }
  b.norm2 = LayerNorm::init(dim);
  b.mlp = Mlp::init(dim, dim * mlp_ratio, rng);
  b.mask = build_shift_mask(height, width, b.window, b.shift);
  return b;
}

Tensor SwinBlock::forward(const Tensor& x) const {
  Tensor h = norm1(x);
  if (shift) h = cyclic_shift(h, height, width, shift);
  WindowGrid grid = window_partition(h, height, width, window, shift);
  WindowGrid attended =
      kind == AttentionKind::Standard ? standard_window_attention(grid, attn, mask) : nasa_attention(grid, nasa, mask);
  Tensor back = window_reverse(attended);
  if (shift) back = cyclic_unshift(back, height, width, shift);
  Tensor y = add(x, back);
  return add(y, mlp(norm2(y)));
}

void SwinBlock::visit(const std::string& prefix, const ParamVisitor& fn) {
  norm1.visit(prefix + ".norm1", fn);
  if (kind == AttentionKind::Standard) {
    attn.visit(prefix + ".attn", fn);
  } else {
    nasa.visit(prefix + ".nasa", fn);
  }
  norm2.visit(prefix + ".norm2", fn);
  mlp.visit(prefix + ".mlp", fn);
}

PatchMergingParams PatchMergingParams::init(std::size_t dim, Rng& rng) {
  return {LayerNorm::init(4 * dim), Linear::init(4 * dim, 2 * dim, rng)};
}

void PatchMergingParams::visit(const std::string& prefix, const ParamVisitor& fn) {
  norm.visit(prefix + ".norm", fn);
  reduction.visit(prefix + ".reduction", fn);
}

Tensor patch_merging(const Tensor& x, std::size_t height, std::size_t width, const PatchMergingParams& p) {
  if (height % 2 != 0 || width % 2 != 0) {
    throw ConfigError("patch merging needs an even token grid, got " + std::to_string(height) + "x" + std::to_string(width));
  }
  if (x.dim() != 2 || x.size(0) != height * width) {
    throw DimensionError("patch merging expects [" + std::to_string(height * width) + ",C], got " + to_string(x.shape()));
  }
  const std::size_t c = x.size(1);
  const std::size_t ho = height / 2, wo = width / 2;
  constexpr std::array<std::pair<std::size_t, std::size_t>, 4> kOrder{{{0, 0}, {1, 0}, {0, 1}, {1, 1}}};
  std::vector<std::size_t> index;
  index.reserve(x.numel());
  for (std::size_t y = 0; y < ho; ++y)
    for (std::size_t xx = 0; xx < wo; ++xx)
      for (auto [dy, dx] : kOrder) {
        const std::size_t src = (2 * y + dy) * width + 2 * xx + dx;
        for (std::size_t k = 0; k < c; ++k) index.push_back(src * c + k);
      }
  Tensor gathered = gather(x, std::move(index), {ho * wo, 4 * c});
  return p.reduction(p.norm(gathered));
}

ChannelMergeParams ChannelMergeParams::init(std::size_t dim, Rng& rng) {
  return {Linear::init(2 * dim, dim, rng), Linear::init(dim, dim, rng)};
}

void ChannelMergeParams::visit(const std::string& prefix, const ParamVisitor& fn) {
  fc1.visit(prefix + ".fc1", fn);
  fc2.visit(prefix + ".fc2", fn);
}

Tensor channel_merge(const Tensor& main, const Tensor& noise, const ChannelMergeParams& p) {
  if (main.shape() != noise.shape() || main.dim() != 2) {
    throw DimensionError("channel_merge: branch shapes " + to_string(main.shape()) + " and " + to_string(noise.shape()) +
                         " differ");
  }
  return p.fc2(gelu(p.fc1(concat({main, noise}, 1))));
}

void Stage::visit(const std::string& prefix, const ParamVisitor& fn) {
  if (downsample) downsample->visit(prefix + ".downsample", fn);
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].visit(prefix + ".blocks." + std::to_string(i), fn);
}

namespace {

Stage build_stage(const ModelConfig& cfg, std::size_t stage, AttentionKind kind, Rng& rng) {
  const std::size_t i = stage - 1;
  Stage s;
  if (stage > 1) s.downsample = PatchMergingParams::init(cfg.dims[i - 1], rng);
  const std::size_t h = cfg.stage_height(stage), w = cfg.stage_width(stage);
  for (std::size_t b = 0; b < cfg.depths[i]; ++b) {
    s.blocks.push_back(
        SwinBlock::init(kind, cfg.dims[i], cfg.heads[i], h, w, cfg.window, b % 2 == 1, cfg.head_mix, cfg.mlp_ratio, rng));
  }
  return s;
}

Tensor run_stage(const Stage& s, const ModelConfig& cfg, std::size_t stage, Tensor x) {
  if (s.downsample) x = patch_merging(x, cfg.stage_height(stage - 1), cfg.stage_width(stage - 1), *s.downsample);
  for (const auto& b : s.blocks) x = b.forward(x);
  return x;
}

}  // namespace

NasaSwin NasaSwin::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  NasaSwin m;
  m.cfg_ = cfg;
  Rng rng(seed);
  m.stem_ = CmfeParams::init(cfg.dims[0], rng);
  for (std::size_t s = 1; s <= kNumStages; ++s) m.main_[s - 1] = build_stage(cfg, s, AttentionKind::Standard, rng);
  m.head_norm_ = LayerNorm::init(cfg.dims.back());
  m.head_ = Linear::init(cfg.dims.back(), cfg.num_classes, rng);
  if (cfg.nasa_span) {
    Rng branch_rng(derive_seed(seed, 0x4e415341));
    for (std::size_t s = cfg.nasa_span->first; s <= cfg.nasa_span->second; ++s) {
      m.noise_[s - 1] = build_stage(cfg, s, AttentionKind::Nasa, branch_rng);
    }
    m.merge_ = ChannelMergeParams::init(cfg.dims[cfg.nasa_span->second - 1], branch_rng);
  }
  return m;
}

Tensor NasaSwin::features(const FusedInput& x) const {
  const auto& s = x.channels.shape();
  if (s.size() != 3 || s[0] != 6 || s[1] != cfg_.input_height || s[2] != cfg_.input_width) {
    throw ConfigError("model expects fused input [6," + std::to_string(cfg_.input_height) + "," +
                      std::to_string(cfg_.input_width) + "], got " + to_string(s));
  }
  Tensor main = cmfe_embed(x, stem_);
  Tensor noise;
  for (std::size_t stage = 1; stage <= kNumStages; ++stage) {
    const bool in_span = cfg_.stage_in_span(stage);
    if (in_span && stage == cfg_.nasa_span->first) noise = main;
    if (in_span) noise = run_stage(*noise_[stage - 1], cfg_, stage, noise);
    main = run_stage(main_[stage - 1], cfg_, stage, main);
    if (in_span && stage == cfg_.nasa_span->second) main = channel_merge(main, noise, *merge_);
  }
  return head_norm_(mean_axis(main, 0));
}

Tensor NasaSwin::forward(const FusedInput& x) const {
  Tensor f = features(x);
  return head_(f.reshape({1, f.numel()}));
}

Tensor NasaSwin::forward(const std::vector<FusedInput>& batch) const {
  if (batch.empty()) throw DimensionError("forward on an empty batch");
  std::vector<Tensor> rows;
  rows.reserve(batch.size());
  for (const auto& x : batch) rows.push_back(forward(x));
  return rows.size() == 1 ? rows[0] : concat(rows, 0);
}

void NasaSwin::visit_params(const ParamVisitor& fn) {
  fn("stem.conv_weight", stem_.conv_weight);
  fn("stem.conv_bias", stem_.conv_bias);
  fn("stem.merge_weight", stem_.merge_weight);
  fn("stem.merge_bias", stem_.merge_bias);
  for (std::size_t i = 0; i < kNumStages; ++i) main_[i].visit("stages." + std::to_string(i + 1), fn);
  for (std::size_t i = 0; i < kNumStages; ++i)
    if (noise_[i]) noise_[i]->visit("noise." + std::to_string(i + 1), fn);
  if (merge_) merge_->visit("merge", fn);
  head_norm_.visit("head.norm", fn);
  head_.visit("head.fc", fn);
}

std::vector<std::pair<std::string, Tensor>> NasaSwin::named_params() {
  std::vector<std::pair<std::string, Tensor>> out;
  visit_params([&](const std::string& name, Tensor& t) { out.emplace_back(name, t); });
  return out;
}

NasaSwin NasaSwin::replica() const {
  NasaSwin copy = *this;
  copy.visit_params([](const std::string&, Tensor& t) { t = t.alias(true); });
  return copy;
}

std::vector<ArchiveEntry> NasaSwin::state_dict() {
  std::vector<ArchiveEntry> out;
  visit_params([&](const std::string& name, Tensor& t) { out.push_back({name, t.shape(), t.to_vector()}); });
  return out;
}

void NasaSwin::load_state_dict(const std::vector<ArchiveEntry>& entries) {
  std::map<std::string, const ArchiveEntry*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e;
  visit_params([&](const std::string& name, Tensor& t) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError("checkpoint is missing parameter '" + name + "'");
    if (it->second->shape != t.shape()) {
      throw CheckpointError("parameter '" + name + "' has shape " + to_string(it->second->shape) + ", model expects " +
                            to_string(t.shape()));
    }
    t = Tensor::from(t.shape(), it->second->values, true);
  });
}

std::vector<ArchiveEntry> config_entries(const ModelConfig& cfg) {
  auto arr = [](const std::array<std::size_t, kNumStages>& a) {
    return std::vector<double>(a.begin(), a.end());
  };
  std::vector<ArchiveEntry> out;
  out.push_back({"config/depths", {kNumStages}, arr(cfg.depths)});
  out.push_back({"config/dims", {kNumStages}, arr(cfg.dims)});
  out.push_back({"config/heads", {kNumStages}, arr(cfg.heads)});
  out.push_back({"config/window", {1}, {static_cast<double>(cfg.window)}});
  if (cfg.nasa_span) {
    out.push_back({"config/nasa_span", {2},
                   {static_cast<double>(cfg.nasa_span->first), static_cast<double>(cfg.nasa_span->second)}});
  } else {
    out.push_back({"config/nasa_span", {2}, {0.0, 0.0}});
  }
  out.push_back({"config/num_classes", {1}, {static_cast<double>(cfg.num_classes)}});
  out.push_back({"config/input_hw", {2}, {static_cast<double>(cfg.input_height), static_cast<double>(cfg.input_width)}});
  out.push_back({"config/head_mix", {1}, {cfg.head_mix == HeadMix::CrossHead ? 0.0 : 1.0}});
  out.push_back({"config/mlp_ratio", {1}, {static_cast<double>(cfg.mlp_ratio)}});
  return out;
}

ModelConfig config_from_entries(const std::vector<ArchiveEntry>& entries) {
  std::map<std::string, const ArchiveEntry*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e;
  auto get = [&](const std::string& key, std::size_t n) -> const std::vector<double>& {
    auto it = by_name.find("config/" + key);
    if (it == by_name.end() || it->second->values.size() != n) {
      throw CheckpointError("checkpoint lacks a valid config/" + key + " entry");
    }
    return it->second->values;
  };
  auto to_size = [](double v) { return static_cast<std::size_t>(v); };
  ModelConfig cfg;
  for (std::size_t i = 0; i < kNumStages; ++i) {
    cfg.depths[i] = to_size(get("depths", kNumStages)[i]);
    cfg.dims[i] = to_size(get("dims", kNumStages)[i]);
    cfg.heads[i] = to_size(get("heads", kNumStages)[i]);
  }
  cfg.window = to_size(get("window", 1)[0]);
  const auto& span = get("nasa_span", 2);
  if (span[0] == 0.0) {
    cfg.nasa_span.reset();
  } else {
    cfg.nasa_span = std::make_pair(to_size(span[0]), to_size(span[1]));
  }
  cfg.num_classes = to_size(get("num_classes", 1)[0]);
  cfg.input_height = to_size(get("input_hw", 2)[0]);
  cfg.input_width = to_size(get("input_hw", 2)[1]);
  cfg.head_mix = get("head_mix", 1)[0] == 0.0 ? HeadMix::CrossHead : HeadMix::PerHead;
  cfg.mlp_ratio = to_size(get("mlp_ratio", 1)[0]);
  cfg.validate();
  return cfg;
}

void save_checkpoint(const std::filesystem::path& path, NasaSwin& model, const std::vector<ArchiveEntry>& extra) {
  auto entries = config_entries(model.config());
  entries.insert(entries.end(), extra.begin(), extra.end());
  auto params = model.state_dict();
  entries.insert(entries.end(), params.begin(), params.end());
  save_archive(path, entries);
}

NasaSwin load_checkpoint(const std::filesystem::path& path) {
  auto entries = load_archive(path);
  ModelConfig cfg = config_from_entries(entries);
  NasaSwin model = NasaSwin::init(cfg, 0);
  model.load_state_dict(entries);
  return model;
}

}  // namespace nasaswin
