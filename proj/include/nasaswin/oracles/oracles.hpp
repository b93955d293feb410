#pragma once

// Loop-level reference implementations. Each one is written directly from
// the definition of the operation, with no shared code paths with the
// library kernels, and works on plain row-major vectors.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "nasaswin/attention.hpp"
#include "nasaswin/fusion.hpp"
#include "nasaswin/model.hpp"
#include "nasaswin/rng.hpp"

namespace nasaswin::oracle {

using Vec = std::vector<double>;

Vec random_vec(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0);
Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = false, double lo = -1.0, double hi = 1.0);

/// Redraws layer parameters at a scale where activations stay O(1):
/// LayerNorm gains in [0.5,1.5], biases in [-0.5,0.5], head mixing at
/// identity plus [-0.5,0.5] noise, other weights uniform with variance
/// 1/fan_in. Finite differences with a fixed step are only informative at
/// such a point; at the 0.02-std initialization LayerNorm inputs are so
/// small that the step itself dominates the curvature.
void randomize_params(const std::vector<std::pair<std::string, Tensor>>& params, Rng& rng);

double max_abs_diff(std::span<const double> a, std::span<const double> b);

// a[m,k] x b[k,n]
Vec matmul(const Vec& a, const Vec& b, std::size_t m, std::size_t k, std::size_t n);

// x[c_in,h,w], w[c_out,c_in/g,kh,kw], no padding.
Vec conv2d_grouped(const Vec& x, const Vec& w, const Vec& bias, std::size_t c_in, std::size_t h, std::size_t wd,
                   std::size_t c_out, std::size_t kh, std::size_t kw, std::size_t stride, std::size_t groups);

// Rows of x[n,c] normalized with a two-pass mean/variance.
Vec layer_norm(const Vec& x, const Vec& gamma, const Vec& beta, std::size_t n, std::size_t c, double eps);

// Row softmax of x[n,k] by direct exponentiation of (x - max).
Vec softmax_rows(const Vec& x, std::size_t n, std::size_t k);

double cross_entropy(const Vec& logits, const std::vector<int>& labels, std::size_t k);

// O(n^4) DFT of x[h,w]; returns (real, imag).
std::pair<Vec, Vec> dft2(const Vec& x, std::size_t h, std::size_t w);

// Attn(i,j) over one head's [T,d] features at explicit grid coordinates.
Vec nasa_attn_matrix(const Vec& f, std::size_t t, std::size_t d, const std::vector<GridPos>& pos);

// Full window attention, one pair (i,j) at a time. tokens [nW,T,C],
// mask [nW,T,T] or empty.
Vec standard_window_attention(const Vec& tokens, std::size_t nw, std::size_t window, const WindowAttentionParams& p,
                              const Vec& mask);
Vec nasa_attention(const Vec& tokens, std::size_t nw, std::size_t window, const NasaParams& p, const Vec& mask);

// Per-group stride-4 convolutions, explicit concat, then the merge matmul.
Vec cmfe_group_outputs(const Vec& x, std::size_t h, std::size_t w, const CmfeParams& p);
Vec cmfe_embed(const Vec& x, std::size_t h, std::size_t w, const CmfeParams& p);

Vec patch_merging(const Vec& x, std::size_t h, std::size_t w, std::size_t c, const PatchMergingParams& p);
Vec channel_merge(const Vec& main, const Vec& noise, std::size_t n, std::size_t c, const ChannelMergeParams& p);

// Region label of each token of the rolled H x W map by brute force: the
// label is the pair of pre-shift bands (window-aligned or wrapped) on each
// axis.
Vec brute_force_shift_mask(std::size_t h, std::size_t w, std::size_t window, std::size_t s);

}  // namespace nasaswin::oracle
