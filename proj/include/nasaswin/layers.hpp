#pragma once

#include <functional>
#include <string>

#include "nasaswin/rng.hpp"
#include "nasaswin/tensor.hpp"

namespace nasaswin {

/// Callback used to enumerate named parameters (checkpointing, optimizers,
/// replicas). The tensor is passed by reference so callers may rebind it.
using ParamVisitor = std::function<void(const std::string& name, Tensor& param)>;

/// Relative position tables: std 0.02 truncated at 2 sigma.
inline constexpr double kInitStd = 0.02;

Tensor init_truncated_normal(Shape shape, Rng& rng, double sigma = kInitStd);

/// Projection and conv weights: U(-1/sqrt(fan_in), 1/sqrt(fan_in)). Biases
/// start at zero and LN gains at one.
Tensor init_fan_in(Shape shape, std::size_t fan_in, Rng& rng);

/// y = x W + b with W stored [in, out].
struct Linear {
  Tensor weight;
  Tensor bias;

  static Linear init(std::size_t in, std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const;
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;
  double eps = 1e-5;

  static LayerNorm init(std::size_t dim);
  Tensor operator()(const Tensor& x) const;
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

/// Linear -> GELU -> Linear.
struct Mlp {
  Linear fc1;
  Linear fc2;

  static Mlp init(std::size_t dim, std::size_t hidden, Rng& rng);
  Tensor operator()(const Tensor& x) const;
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

}  // namespace nasaswin
