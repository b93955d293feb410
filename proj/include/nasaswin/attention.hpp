#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nasaswin/layers.hpp"
#include "nasaswin/tensor.hpp"

namespace nasaswin {

/// Tokens split into non-overlapping M x M windows.
struct WindowGrid {
  Tensor tokens;  // [num_windows, M*M, C]
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t window = 0;
  std::size_t shift = 0;

  std::size_t num_windows() const { return (height / window) * (width / window); }
};

/// Windows in row-major window order, tokens row-major inside each window.
/// `shift` is recorded for bookkeeping only; apply cyclic_shift first.
WindowGrid window_partition(const Tensor& x, std::size_t height, std::size_t width, std::size_t window,
                            std::size_t shift = 0);
Tensor window_reverse(const WindowGrid& grid);

/// Toroidal roll of a [H*W, C] token map by (-s, -s): position (y, x)
/// receives the token previously at (y+s, x+s).
Tensor cyclic_shift(const Tensor& x, std::size_t height, std::size_t width, std::size_t s);
/// Inverse roll by (+s, +s).
Tensor cyclic_unshift(const Tensor& x, std::size_t height, std::size_t width, std::size_t s);

inline constexpr double kMaskedLogit = -1e9;

struct AttnMask {
  Tensor values;  // [num_windows, M*M, M*M], entries 0 or kMaskedLogit
};

/// Additive mask for the shifted configuration. Tokens whose pre-shift
/// regions differ (3x3 slice labelling of the rolled map) may not attend to
/// each other. All zeros for s == 0.
AttnMask build_shift_mask(std::size_t height, std::size_t width, std::size_t window, std::size_t s);

struct GridPos {
  int row = 0;
  int col = 0;
};

/// Row-major (row, col) coordinates of an M x M window.
std::vector<GridPos> window_positions(std::size_t window);

/// Raw noise-aware score per window: Attn(i,j) = AD(i,j) / RD(i,j) where AD
/// is the mean absolute feature difference over the head channels and RD
/// the Euclidean grid distance; Attn(i,i) = 0.
/// f is [T, d] or [B, T, d]; result is [T, T] or [B, T, T].
Tensor nasa_attn_matrix(const Tensor& f, std::span<const GridPos> positions);

/// While alive on this thread, intercepts the |f_i - f_j| terms of
/// nasa_attn_matrix. Record mode stores the sign of every difference;
/// Replay mode evaluates s * (f_i - f_j) with the stored signs instead, i.e.
/// the smooth piece of the function that was active when recording, and
/// counts differences whose actual sign has changed. Finite-difference
/// checks use this so a step across a kink of |.| still measures the
/// derivative that backward computes. Not reentrant.
class SignProbe {
 public:
  enum class Mode { Record, Replay };
  SignProbe(Mode mode, std::vector<signed char>& signs);
  ~SignProbe();
  SignProbe(const SignProbe&) = delete;
  SignProbe& operator=(const SignProbe&) = delete;

  double abs(double diff);
  std::size_t crossings() const { return crossings_; }

 private:
  Mode mode_;
  std::vector<signed char>& signs_;
  std::size_t cursor_ = 0;
  std::size_t crossings_ = 0;
  SignProbe* previous_;
};

/// Swin window attention with learned relative position bias.
struct WindowAttentionParams {
  std::size_t dim = 0;
  std::size_t heads = 0;
  std::size_t window = 0;
  Linear qkv;                 // dim -> 3 dim
  Tensor relative_bias;       // [(2M-1)^2, heads]
  Linear proj;

  static WindowAttentionParams init(std::size_t dim, std::size_t heads, std::size_t window, Rng& rng);
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

WindowGrid standard_window_attention(const WindowGrid& win, const WindowAttentionParams& p, const AttnMask& mask);

/// How the point-wise convolution after the raw NASA matrices mixes heads.
enum class HeadMix {
  CrossHead,  // full [heads, heads] 1x1 conv over the stacked head maps
  PerHead,    // diagonal: each head rescaled and shifted independently
};

/// Noise-aware attention: no query/key projections. Scores come from
/// nasa_attn_matrix on each head's slice of the block input.
struct NasaParams {
  std::size_t dim = 0;
  std::size_t heads = 0;
  HeadMix mix = HeadMix::CrossHead;
  Linear value;
  Tensor head_mix_weight;  // [heads, heads]
  Tensor head_mix_bias;    // [heads]
  Linear proj;

  /// Head mixing starts at identity so untrained blocks score with the raw
  /// AD/RD matrices.
  static NasaParams init(std::size_t dim, std::size_t heads, HeadMix mix, Rng& rng);
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

WindowGrid nasa_attention(const WindowGrid& win, const NasaParams& p, const AttnMask& mask);

}  // namespace nasaswin
