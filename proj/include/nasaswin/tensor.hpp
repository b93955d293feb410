#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nasaswin {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Raised when operand shapes are incompatible with an operation.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for invalid layer/model configuration (divisibility, kernel fit...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
struct Node;
}

/// Receives gradient of the op output and accumulates into each input's grad.
/// `grad_inputs[i]` is empty when input i does not require grad.
using BackwardFn = std::function<void(std::span<const double> grad_out,
                                      std::span<const std::span<double>> grad_inputs)>;

/// Dense row-major float64 tensor with optional reverse-mode lineage.
///
/// Tensors are handles: copying a Tensor shares the underlying node. Data is
/// never mutated in place once the tensor participates in a recorded graph;
/// `assign` exists only for leaf parameters between optimizer steps.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  std::vector<double> to_vector() const;
  double item() const;

  bool requires_grad() const;
  bool is_leaf() const;
  /// Gradient buffer; all zeros when backward never reached this tensor.
  std::span<const double> grad() const;
  void zero_grad();

  /// Leaf sharing this tensor's data, with its own gradient slot.
  Tensor alias(bool requires_grad) const;
  Tensor detach() const { return alias(false); }

  /// Replace a leaf's values (optimizer updates). Shape must match.
  void assign(std::vector<double> values);

  Tensor reshape(Shape shape) const;

  /// Reverse-mode sweep from this scalar. Gradients of every tensor in the
  /// traced graph are reset before propagation, so repeated calls are
  /// idempotent rather than accumulating.
  void backward() const;

  /// Builds a result tensor recording lineage to `inputs` when grad mode is
  /// on and at least one input requires grad.
  static Tensor make_op(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                        BackwardFn backward, const char* name);

  const char* op_name() const;
  const detail::Node* node() const { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend class Graph;
};

/// Topologically ordered record of the operations reachable from a root.
class Graph {
 public:
  static Graph trace(const Tensor& root);

  std::size_t size() const { return order_.size(); }
  /// Op names in topological order (inputs precede consumers).
  std::vector<std::string> op_names() const;
  void backward(const Tensor& root) const;

 private:
  std::vector<detail::Node*> order_;
};

/// Thread-local switch; while disabled, ops never record lineage.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

}  // namespace nasaswin
