#include "pstx/tensor.hpp"

#include <sstream>
#include <unordered_set>

namespace pstx {

namespace {
thread_local int no_grad_depth = 0;
}

bool grad_enabled() { return no_grad_depth == 0; }
NoGradGuard::NoGradGuard() { ++no_grad_depth; }
NoGradGuard::~NoGradGuard() { --no_grad_depth; }

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Eigen::Index shape_numel(const Shape& shape) {
  Eigen::Index n = 1;
  for (int d : shape) {
    if (d < 0) throw DimensionError("negative dimension in shape " + shape_string(shape));
    n *= d;
  }
  return n;
}

namespace detail {
void accumulate(Node& node, const Eigen::VectorXd& g) {
  if (!node.requires_grad) return;
  if (node.grad.size() == 0) {
    node.grad = g;
  } else {
    node.grad += g;
  }
}
}  // namespace detail

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return from(std::move(shape), Eigen::VectorXd::Constant(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, Eigen::VectorXd values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("data length " + std::to_string(values.size()) + " does not match shape " +
                         shape_string(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from({1}, Eigen::VectorXd::Constant(1, value)); }

detail::Node& Tensor::node() const {
  if (!node_) throw GraphError("use of undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }

int Tensor::dim(int axis) const {
  const auto& s = shape();
  if (axis < 0) axis += static_cast<int>(s.size());
  if (axis < 0 || axis >= static_cast<int>(s.size())) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(s));
  }
  return s[axis];
}

Eigen::Index Tensor::numel() const { return node().value.size(); }
const Eigen::VectorXd& Tensor::value() const { return node().value; }
Eigen::VectorXd& Tensor::mutable_value() { return node().value; }

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_string(shape()));
  return value()[0];
}

double Tensor::at(std::initializer_list<int> index) const {
  const auto& s = shape();
  if (index.size() != s.size()) throw DimensionError("index rank mismatch for shape " + shape_string(s));
  Eigen::Index flat = 0;
  size_t axis = 0;
  for (int i : index) {
    if (i < 0 || i >= s[axis]) throw DimensionError("index out of range on axis " + std::to_string(axis));
    flat = flat * s[axis] + i;
    ++axis;
  }
  return value()[flat];
}

bool Tensor::requires_grad() const { return node().requires_grad; }
void Tensor::set_requires_grad(bool on) {
  auto& n = node();
  if (n.backward_fn || !n.parents.empty()) throw GraphError("set_requires_grad on a non-leaf tensor");
  n.requires_grad = on;
  if (!on) n.grad.resize(0);
}

bool Tensor::has_grad() const { return node().grad.size() == node().value.size(); }

const Eigen::VectorXd& Tensor::grad() const {
  if (!has_grad()) throw GraphError("tensor has no gradient; run backward() first");
  return node().grad;
}

void Tensor::zero_grad() {
  auto& n = node();
  n.grad = Eigen::VectorXd::Zero(n.value.size());
}

Tensor Tensor::detach() const { return from(shape(), value(), false); }

Tensor Tensor::make(Shape shape, Eigen::VectorXd value, std::vector<Tensor> inputs,
                    std::function<void(detail::Node&)> backward_fn) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool any = false;
  if (grad_enabled()) {
    for (const auto& t : inputs) any = any || t.requires_grad();
  }
  if (any) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (auto& t : inputs) node->parents.push_back(t.node_);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

void backward(const Tensor& loss) {
  auto& root = loss.node();
  if (root.value.size() != 1) {
    throw GraphError("backward() needs a scalar loss, got shape " + shape_string(root.shape));
  }
  if (!root.requires_grad) throw GraphError("backward() on a loss detached from every parameter");
  if (root.backward_done) throw GraphError("backward() already ran on this graph");

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, size_t>> stack{{&root, 0}};
  seen.insert(&root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* p = node->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (auto* n : order) {
    if (n->backward_fn) n->grad = Eigen::VectorXd::Zero(n->value.size());
  }
  root.grad = Eigen::VectorXd::Ones(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward_fn) {
      n->backward_fn(*n);
      n->backward_done = true;
    }
  }
}

}  // namespace pstx
