#include "nasaswin/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace nasaswin {

namespace detail {

struct Node {
  Shape shape;
  std::shared_ptr<std::vector<double>> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;
  const char* name = "leaf";

  void ensure_grad() {
    if (grad.size() != data->size()) grad.assign(data->size(), 0.0);
  }
};

}  // namespace detail

namespace {

thread_local bool g_grad_enabled = true;

std::shared_ptr<detail::Node> make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  if (nasaswin::numel(shape) != values.size()) {
    throw DimensionError("tensor data length " + std::to_string(values.size()) +
                         " does not match shape " + to_string(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::make_shared<std::vector<double>>(std::move(values));
  node->requires_grad = requires_grad;
  return node;
}

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> v(nasaswin::numel(shape), value);
  return Tensor(make_leaf(std::move(shape), std::move(v), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(make_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::size(std::size_t axis) const {
  if (axis >= dim()) throw DimensionError("axis " + std::to_string(axis) + " out of range for " + to_string(shape()));
  return shape()[axis];
}

std::size_t Tensor::numel() const { return node_->data->size(); }

std::span<const double> Tensor::data() const { return *node_->data; }

std::vector<double> Tensor::to_vector() const { return *node_->data; }

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on non-scalar tensor " + to_string(shape()));
  return (*node_->data)[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

bool Tensor::is_leaf() const { return node_->inputs.empty(); }

std::span<const double> Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->data->size(), 0.0); }

Tensor Tensor::alias(bool requires_grad) const {
  auto node = std::make_shared<detail::Node>();
  node->shape = node_->shape;
  node->data = node_->data;
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

void Tensor::assign(std::vector<double> values) {
  if (!is_leaf()) throw std::logic_error("assign() on a non-leaf tensor");
  if (values.size() != numel()) {
    throw DimensionError("assign of " + std::to_string(values.size()) + " values into " + to_string(shape()));
  }
  node_->data = std::make_shared<std::vector<double>>(std::move(values));
}

Tensor Tensor::reshape(Shape new_shape) const {
  if (nasaswin::numel(new_shape) != numel()) {
    throw DimensionError("cannot reshape " + to_string(shape()) + " to " + to_string(new_shape));
  }
  return make_op(
      std::move(new_shape), *node_->data, {*this},
      [](std::span<const double> g, std::span<const std::span<double>> gi) {
        if (gi[0].empty()) return;
        for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
      },
      "reshape");
}

Tensor Tensor::make_op(Shape shape, std::vector<double> values, std::vector<Tensor> inputs, BackwardFn backward,
                       const char* name) {
  auto node = make_leaf(std::move(shape), std::move(values), false);
  node->name = name;
  if (!g_grad_enabled) return Tensor(std::move(node));
  const bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return Tensor(std::move(node));
  node->requires_grad = true;
  node->backward = std::move(backward);
  node->inputs.reserve(inputs.size());
  for (auto& t : inputs) node->inputs.push_back(t.node_);
  return Tensor(std::move(node));
}

const char* Tensor::op_name() const { return node_->name; }

void Tensor::backward() const {
  if (numel() != 1) throw DimensionError("backward() seed must be scalar, got " + to_string(shape()));
  Graph::trace(*this).backward(*this);
}

Graph Graph::trace(const Tensor& root) {
  Graph g;
  std::unordered_set<const detail::Node*> seen;
  // Iterative post-order DFS; deep transformer graphs overflow recursion.
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.node_.get(), 0);
  seen.insert(root.node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      g.order_.push_back(node);
      stack.pop_back();
    }
  }
  return g;
}

std::vector<std::string> Graph::op_names() const {
  std::vector<std::string> out;
  out.reserve(order_.size());
  for (auto* n : order_) out.emplace_back(n->name);
  return out;
}

void Graph::backward(const Tensor& root) const {
  if (root.numel() != 1) throw DimensionError("backward() seed must be scalar, got " + to_string(root.shape()));
  for (auto* n : order_) n->grad.assign(n->data->size(), 0.0);
  root.node_->grad[0] = 1.0;
  std::vector<std::span<double>> grad_inputs;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    detail::Node* n = *it;
    if (!n->backward) continue;
    grad_inputs.clear();
    for (auto& in : n->inputs) {
      if (in->requires_grad) {
        in->ensure_grad();
        grad_inputs.emplace_back(in->grad);
      } else {
        grad_inputs.emplace_back();
      }
    }
    n->backward(n->grad, grad_inputs);
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

}  // namespace nasaswin
