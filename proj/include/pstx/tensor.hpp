#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace pstx {

using Shape = std::vector<int>;

/// Raised when tensor shapes are incompatible with an operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised on misuse of the differentiation graph.
class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised when a layer parameter violates its domain (e.g. non-positive GDN beta).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string shape_string(const Shape& shape);
Eigen::Index shape_numel(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  Eigen::VectorXd value;
  Eigen::VectorXd grad;
  bool requires_grad = false;
  bool backward_done = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into parents.
  std::function<void(Node&)> backward_fn;
};

void accumulate(Node& node, const Eigen::VectorXd& g);

}  // namespace detail

/// Dense row-major real tensor participating in a reverse-mode graph.
///
/// Copies share the underlying node, so a Tensor behaves like a handle. Leaf
/// tensors created with `requires_grad` act as trainable parameters; every op
/// result whose inputs require gradients records a backward closure.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, Eigen::VectorXd values, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  int dim(int axis) const;
  int rank() const { return static_cast<int>(shape().size()); }
  Eigen::Index numel() const;

  const Eigen::VectorXd& value() const;
  /// Direct access for optimizers and initializers; never call on graph interior nodes.
  Eigen::VectorXd& mutable_value();
  double item() const;
  double at(std::initializer_list<int> index) const;

  bool requires_grad() const;
  /// Toggles trainability of a leaf; throws on op results.
  void set_requires_grad(bool on);
  bool has_grad() const;
  const Eigen::VectorXd& grad() const;
  void zero_grad();

  /// Same values, no graph history.
  Tensor detach() const;
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  // Internal: used by ops to build graph nodes.
  static Tensor make(Shape shape, Eigen::VectorXd value, std::vector<Tensor> inputs,
                     std::function<void(detail::Node&)> backward_fn);
  detail::Node& node() const;

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Runs reverse-mode differentiation from a scalar loss, accumulating into
/// the `grad` of every reachable tensor that requires gradients.
///
/// Throws GraphError for a non-scalar loss, for a loss with no differentiable
/// history, and when called twice on the same graph.
void backward(const Tensor& loss);

bool grad_enabled();

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

}  // namespace pstx
