#include "nasaswin/fusion.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>

#include "nasaswin/layers.hpp"
#include "nasaswin/ops.hpp"

namespace nasaswin {

namespace {

std::atomic<std::uint64_t> g_mask_samples{0};

}  // namespace

FusedInput interleave(const Tensor& rgb, const Tensor& noise) {
  if (rgb.dim() != 3 || rgb.size(0) != 3 || rgb.shape() != noise.shape()) {
    throw DimensionError("interleave expects matching [3,h,w] inputs, got " + to_string(rgb.shape()) + " and " +
                         to_string(noise.shape()));
  }
  const std::size_t h = rgb.size(1), w = rgb.size(2), plane = h * w;
  auto a = rgb.data();
  auto b = noise.data();
  std::vector<double> out(6 * plane);
  for (std::size_t c = 0; c < 3; ++c) {
    std::copy_n(a.begin() + static_cast<std::ptrdiff_t>(c * plane), plane, out.begin() + static_cast<std::ptrdiff_t>(2 * c * plane));
    std::copy_n(b.begin() + static_cast<std::ptrdiff_t>(c * plane), plane,
                out.begin() + static_cast<std::ptrdiff_t>((2 * c + 1) * plane));
  }
  return {Tensor::from({6, h, w}, std::move(out))};
}

void MaskChoice::validate() const {
  if (variant != Variant::RandomChannels) {
    if (!subset.empty()) throw ConfigError("mask subset is only meaningful for RandomChannels");
    return;
  }
  if (subset.empty() || subset.size() > 3) throw ConfigError("RandomChannels subset must hold 1..3 channels");
  auto sorted = subset;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw ConfigError("duplicate channel in mask subset");
  if (sorted.back() > 5) throw ConfigError("mask channel index out of range");
}

std::string MaskChoice::to_string() const {
  switch (variant) {
    case Variant::NoMask: return "none";
    case Variant::MaskRGB: return "rgb";
    case Variant::MaskNoise: return "noise";
    case Variant::RandomChannels: {
      std::ostringstream os;
      os << "channels{";
      for (std::size_t i = 0; i < subset.size(); ++i) os << (i ? "," : "") << subset[i];
      os << '}';
      return os.str();
    }
  }
  return {};
}

MaskChoice sample_mask(Rng& rng, std::size_t max_subset) {
  if (max_subset < 1 || max_subset > 3) throw ConfigError("cms.max_subset must be in 1..3");
  g_mask_samples.fetch_add(1, std::memory_order_relaxed);
  MaskChoice m;
  m.variant = static_cast<MaskChoice::Variant>(rng.below(4));
  if (m.variant == MaskChoice::Variant::RandomChannels) {
    const std::size_t k = 1 + static_cast<std::size_t>(rng.below(max_subset));
    std::vector<std::size_t> pool{0, 1, 2, 3, 4, 5};
    // Partial Fisher-Yates: first k entries become the subset.
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    m.subset.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return m;
}

std::uint64_t mask_sample_count() { return g_mask_samples.load(std::memory_order_relaxed); }

FusedInput apply_mask(const FusedInput& x, const MaskChoice& m) {
  m.validate();
  if (x.channels.dim() != 3 || x.channels.size(0) != 6) {
    throw DimensionError("apply_mask expects [6,h,w], got " + to_string(x.channels.shape()));
  }
  std::vector<std::size_t> zeroed;
  switch (m.variant) {
    case MaskChoice::Variant::NoMask: return x;
    case MaskChoice::Variant::MaskRGB: zeroed = {0, 2, 4}; break;
    case MaskChoice::Variant::MaskNoise: zeroed = {1, 3, 5}; break;
    case MaskChoice::Variant::RandomChannels: zeroed = m.subset; break;
  }
  const std::size_t plane = x.channels.size(1) * x.channels.size(2);
  auto v = x.channels.to_vector();
  for (auto c : zeroed) std::fill_n(v.begin() + static_cast<std::ptrdiff_t>(c * plane), plane, 0.0);
  return {Tensor::from(x.channels.shape(), std::move(v))};
}

CmfeParams CmfeParams::init(std::size_t embed_dim, Rng& rng) {
  if (embed_dim == 0) throw ConfigError("cmfe.embed_dim must be positive");
  CmfeParams p;
  p.embed_dim = embed_dim;
  p.group_dim = (embed_dim + 2) / 3;
  const std::size_t mid = 3 * p.group_dim;
  p.conv_weight = init_fan_in({mid, 2, kPatchSize, kPatchSize}, 2 * kPatchSize * kPatchSize, rng);
  p.conv_bias = Tensor::zeros({mid}, true);
  p.merge_weight = init_fan_in({mid, embed_dim}, mid, rng);
  p.merge_bias = Tensor::zeros({embed_dim}, true);
  return p;
}

Tensor cmfe_group_outputs(const FusedInput& x, const CmfeParams& p) {
  const auto& s = x.channels.shape();
  if (s.size() != 3 || s[0] != 6) throw DimensionError("cmfe expects [6,h,w], got " + to_string(s));
  if (s[1] % kPatchSize != 0 || s[2] % kPatchSize != 0) {
    throw ConfigError("cmfe input " + std::to_string(s[1]) + "x" + std::to_string(s[2]) + " is not divisible by 4");
  }
  return conv2d_grouped(x.channels, p.conv_weight, p.conv_bias, {.stride = kPatchSize, .groups = 3, .padding = 0});
}

Tensor cmfe_embed(const FusedInput& x, const CmfeParams& p) {
  Tensor grouped = cmfe_group_outputs(x, p);
  const std::size_t mid = grouped.size(0);
  const std::size_t tokens = grouped.size(1) * grouped.size(2);
  Tensor flat = transpose(grouped.reshape({mid, tokens}));
  return add(matmul(flat, p.merge_weight), p.merge_bias);
}

}  // namespace nasaswin
