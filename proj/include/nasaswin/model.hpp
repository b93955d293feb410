#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nasaswin/attention.hpp"
#include "nasaswin/checkpoint.hpp"
#include "nasaswin/fusion.hpp"
#include "nasaswin/layers.hpp"

namespace nasaswin {

inline constexpr std::size_t kNumStages = 4;

struct ModelConfig {
  std::array<std::size_t, kNumStages> depths{1, 1, 1, 1};
  std::array<std::size_t, kNumStages> dims{12, 24, 48, 96};
  std::array<std::size_t, kNumStages> heads{1, 2, 4, 8};
  std::size_t window = 4;
  /// 1-based inclusive stage range carrying the noise-aware branch; empty
  /// disables the branch (plain Swin classifier).
  std::optional<std::pair<std::size_t, std::size_t>> nasa_span = std::make_pair<std::size_t, std::size_t>(2, 3);
  std::size_t num_classes = 2;
  std::size_t input_height = 32;
  std::size_t input_width = 32;
  HeadMix head_mix = HeadMix::CrossHead;
  std::size_t mlp_ratio = 4;

  /// Desk-scale reference: dims 12..96, depth 1 per stage, 4x4 windows, 32x32 input.
  static ModelConfig toy();
  /// Swin-T layout at 224x224 with 7x7 windows.
  static ModelConfig swin_tiny();

  void validate() const;
  bool stage_in_span(std::size_t stage) const;  // 1-based
  std::size_t stage_height(std::size_t stage) const;
  std::size_t stage_width(std::size_t stage) const;
};

enum class AttentionKind { Standard, Nasa };

/// LN -> (shifted) window attention -> residual -> LN -> MLP -> residual.
struct SwinBlock {
  AttentionKind kind = AttentionKind::Standard;
  std::size_t height = 0, width = 0, window = 0, shift = 0;
  LayerNorm norm1;
  WindowAttentionParams attn;  // Standard
  NasaParams nasa;             // Nasa
  LayerNorm norm2;
  Mlp mlp;
  AttnMask mask;

  /// Windows clamp to the token grid when it is no larger than `window`,
  /// in which case the block never shifts.
  static SwinBlock init(AttentionKind kind, std::size_t dim, std::size_t heads, std::size_t height, std::size_t width,
                        std::size_t window, bool shifted, HeadMix mix, std::size_t mlp_ratio, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

struct PatchMergingParams {
  LayerNorm norm;     // 4C
  Linear reduction;   // 4C -> 2C

  static PatchMergingParams init(std::size_t dim, Rng& rng);
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

/// Gathers each 2x2 token neighbourhood in the order (top-left, bottom-left,
/// top-right, bottom-right), layer-normalizes the 4C vector and projects to 2C.
Tensor patch_merging(const Tensor& x, std::size_t height, std::size_t width, const PatchMergingParams& p);

struct ChannelMergeParams {
  Linear fc1;  // 2C -> C
  Linear fc2;  // C -> C

  static ChannelMergeParams init(std::size_t dim, Rng& rng);
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

/// concat(main, noise) -> Linear 2C->C -> GELU -> Linear C->C.
Tensor channel_merge(const Tensor& main, const Tensor& noise, const ChannelMergeParams& p);

struct Stage {
  std::optional<PatchMergingParams> downsample;  // absent for stage 1
  std::vector<SwinBlock> blocks;

  void visit(const std::string& prefix, const ParamVisitor& fn);
};

/// Dual-branch detector: fusion stem, Swin stages, a parallel NASA branch
/// over the configured stage span, channel merging and a linear classifier.
class NasaSwin {
 public:
  /// Main-path parameters are drawn first from `seed`; branch parameters
  /// from a derived stream, so enabling the span leaves shared weights equal.
  static NasaSwin init(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  /// Logits [1, num_classes] for one fused input.
  Tensor forward(const FusedInput& x) const;
  /// Logits [b, num_classes].
  Tensor forward(const std::vector<FusedInput>& batch) const;

  /// Pooled, normalized features before the classifier, [C_last].
  Tensor features(const FusedInput& x) const;

  void visit_params(const ParamVisitor& fn);
  std::vector<std::pair<std::string, Tensor>> named_params();

  /// Copy whose parameters alias this model's data but own their gradients.
  NasaSwin replica() const;

  std::vector<ArchiveEntry> state_dict();
  /// Loads parameters by name; every parameter must be present with a
  /// matching shape.
  void load_state_dict(const std::vector<ArchiveEntry>& entries);

  const CmfeParams& stem() const { return stem_; }
  const Stage& main_stage(std::size_t i) const { return main_[i]; }
  const std::optional<Stage>& noise_stage(std::size_t i) const { return noise_[i]; }
  const std::optional<ChannelMergeParams>& merge() const { return merge_; }
  const LayerNorm& head_norm() const { return head_norm_; }
  const Linear& head() const { return head_; }

 private:
  ModelConfig cfg_;
  CmfeParams stem_;
  std::array<Stage, kNumStages> main_;
  std::array<std::optional<Stage>, kNumStages> noise_;
  std::optional<ChannelMergeParams> merge_;
  LayerNorm head_norm_;
  Linear head_;
};

/// Encodes/decodes the config as numeric "config/..." archive entries.
std::vector<ArchiveEntry> config_entries(const ModelConfig& cfg);
ModelConfig config_from_entries(const std::vector<ArchiveEntry>& entries);

void save_checkpoint(const std::filesystem::path& path, NasaSwin& model,
                     const std::vector<ArchiveEntry>& extra = {});
NasaSwin load_checkpoint(const std::filesystem::path& path);

}  // namespace nasaswin
