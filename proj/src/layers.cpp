#include "nasaswin/layers.hpp"

#include <cmath>

#include "nasaswin/ops.hpp"

namespace nasaswin {

Tensor init_truncated_normal(Shape shape, Rng& rng, double sigma) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.truncated_normal(sigma);
  return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor init_fan_in(Shape shape, std::size_t fan_in, Rng& rng) {
  const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(-a, a);
  return Tensor::from(std::move(shape), std::move(v), true);
}

Linear Linear::init(std::size_t in, std::size_t out, Rng& rng) {
  return {init_fan_in({in, out}, in, rng), Tensor::zeros({out}, true)};
}

Tensor Linear::operator()(const Tensor& x) const { return add(matmul(x, weight), bias); }

void Linear::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".weight", weight);
  fn(prefix + ".bias", bias);
}

LayerNorm LayerNorm::init(std::size_t dim) { return {Tensor::full({dim}, 1.0, true), Tensor::zeros({dim}, true)}; }

Tensor LayerNorm::operator()(const Tensor& x) const { return layer_norm(x, gamma, beta, eps); }

void LayerNorm::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".gamma", gamma);
  fn(prefix + ".beta", beta);
}

Mlp Mlp::init(std::size_t dim, std::size_t hidden, Rng& rng) {
  Mlp m;
  m.fc1 = Linear::init(dim, hidden, rng);
  m.fc2 = Linear::init(hidden, dim, rng);
  return m;
}

Tensor Mlp::operator()(const Tensor& x) const { return fc2(gelu(fc1(x))); }

void Mlp::visit(const std::string& prefix, const ParamVisitor& fn) {
  fc1.visit(prefix + ".fc1", fn);
  fc2.visit(prefix + ".fc2", fn);
}

}  // namespace nasaswin
