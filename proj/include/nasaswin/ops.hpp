#pragma once

#include <cstddef>
#include <vector>

#include "nasaswin/tensor.hpp"

namespace nasaswin {

// Elementwise. `b` may match `a` exactly or match a trailing suffix of a's
// shape, in which case it is broadcast over the leading extents.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

/// Batched contraction [..,m,k] x [..,k,n]. Batch extents must be equal, or
/// one operand may be a plain matrix shared across the other's batch.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Swaps the last two axes.
Tensor transpose(const Tensor& x);

/// out.flat[i] = x.flat[index[i]]; backward scatter-adds. Window
/// partitioning, rolls and patch gathering are all expressed through this.
Tensor gather(const Tensor& x, std::vector<std::size_t> index, Shape out_shape);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);

/// Numerically stable softmax along `axis`. Throws std::domain_error
/// ("fully masked slice") when every entry in a slice is -inf.
Tensor softmax(const Tensor& x, std::size_t axis);

/// Normalizes over the last axis; gamma/beta have that axis' extent.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Exact (erf) GELU.
Tensor gelu(const Tensor& x);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t groups = 1;
  std::size_t padding = 0;
};

/// Grouped cross-correlation of x[c_in,h,w] with w[c_out,c_in/g,kh,kw] plus
/// optional bias[c_out] (pass an undefined Tensor for none).
Tensor conv2d_grouped(const Tensor& x, const Tensor& weight, const Tensor& bias, Conv2dOptions opts);

/// Mean negative log-likelihood of `labels` under softmax(logits[n,k]).
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Mean over one axis, which is removed from the shape.
Tensor mean_axis(const Tensor& x, std::size_t axis);

}  // namespace nasaswin
