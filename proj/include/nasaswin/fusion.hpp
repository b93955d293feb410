#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nasaswin/rng.hpp"
#include "nasaswin/tensor.hpp"

namespace nasaswin {

/// Six-channel stem input ordered (R, N_R, G, N_G, B, N_B): channel 2i is
/// RGB channel i and 2i+1 its noise residual.
struct FusedInput {
  Tensor channels;  // [6,h,w]
};

FusedInput interleave(const Tensor& rgb, const Tensor& noise);

struct MaskChoice {
  enum class Variant { NoMask, MaskRGB, MaskNoise, RandomChannels };
  Variant variant = Variant::NoMask;
  std::vector<std::size_t> subset;  // RandomChannels only

  /// Throws ConfigError when the subset is empty, out of range, duplicated
  /// or larger than three channels for RandomChannels.
  void validate() const;
  std::string to_string() const;
};

/// Draws one of the four variants uniformly. RandomChannels draws a subset
/// size uniformly from {1..max_subset} and indices without replacement.
MaskChoice sample_mask(Rng& rng, std::size_t max_subset = 3);

/// Number of sample_mask calls made by this process; evaluation paths
/// assert it does not move.
std::uint64_t mask_sample_count();

/// Zeroes masked channels; NoMask returns the input unchanged.
FusedInput apply_mask(const FusedInput& x, const MaskChoice& m);

/// Cross-modality fusion stem: three color groups (R,N_R), (G,N_G), (B,N_B)
/// each convolved 2 -> group_dim with a 4x4 stride-4 kernel, concatenated,
/// then merged point-wise to embed_dim.
struct CmfeParams {
  std::size_t embed_dim = 0;
  std::size_t group_dim = 0;
  Tensor conv_weight;   // [3*group_dim, 2, 4, 4]
  Tensor conv_bias;     // [3*group_dim]
  Tensor merge_weight;  // [3*group_dim, embed_dim]
  Tensor merge_bias;    // [embed_dim]

  /// group_dim = ceil(embed_dim / 3).
  static CmfeParams init(std::size_t embed_dim, Rng& rng);
};

inline constexpr std::size_t kPatchSize = 4;

/// Grouped-convolution output before the merge, [3*group_dim, h/4, w/4].
Tensor cmfe_group_outputs(const FusedInput& x, const CmfeParams& p);

/// Patch tokens [(h/4)*(w/4), embed_dim], row-major over the patch grid.
Tensor cmfe_embed(const FusedInput& x, const CmfeParams& p);

}  // namespace nasaswin
