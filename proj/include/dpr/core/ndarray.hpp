#pragma once

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <initializer_list>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "dpr/error.hpp"
#include "dpr/rng.hpp"

namespace dpr {

using Index = Eigen::Index;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using MatMap = Eigen::Map<Mat<Scalar>>;
template <typename Scalar>
using ConstMatMap = Eigen::Map<const Mat<Scalar>>;

inline std::string shape_str(const std::vector<Index>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << "]";
  return os.str();
}

// One recorded node of the tape: the buffer it produced, the inputs it came
// from and the closure that pushes gradients back to them. Leaves have no
// closure; their grad buffers persist and accumulate across backward calls.
template <typename Scalar>
struct TapeNode {
  std::vector<Index> shape;
  std::vector<Scalar> data;
  std::vector<Scalar> grad;  // empty until first needed
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<TapeNode>> parents;
  std::function<void()> backward_fn;

  Index numel() const {
    Index n = 1;
    for (Index d : shape) n *= d;
    return n;
  }
  // Row-major interpretation: all leading axes fold into rows, the last
  // axis is the column axis. A rank-1 array is a single row.
  Index rows() const {
    Index r = 1;
    for (std::size_t i = 0; i + 1 < shape.size(); ++i) r *= shape[i];
    return r;
  }
  Index cols() const { return shape.empty() ? 1 : shape.back(); }

  void ensure_grad() {
    if (grad.empty()) grad.assign(static_cast<std::size_t>(numel()), Scalar(0));
  }
  MatMap<Scalar> grad_map() {
    ensure_grad();
    return MatMap<Scalar>(grad.data(), rows(), cols());
  }
  MatMap<Scalar> value_map() { return MatMap<Scalar>(data.data(), rows(), cols()); }
  ConstMatMap<Scalar> value_map() const { return ConstMatMap<Scalar>(data.data(), rows(), cols()); }
};

// Dense numeric array with a gradient buffer, the substrate for all model
// math. Value-semantic handle over a shared tape node.
template <typename Scalar>
class NdArray {
 public:
  using Node = TapeNode<Scalar>;

  NdArray() = default;
  explicit NdArray(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static NdArray zeros(std::vector<Index> shape, bool requires_grad = false) {
    return filled(std::move(shape), Scalar(0), requires_grad);
  }

  static NdArray filled(std::vector<Index> shape, Scalar v, bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->data.assign(static_cast<std::size_t>(n->numel()), v);
    n->requires_grad = requires_grad;
    return NdArray(std::move(n));
  }

  static NdArray from_values(std::vector<Index> shape, std::initializer_list<Scalar> values,
                             bool requires_grad = false) {
    auto a = zeros(std::move(shape), requires_grad);
    if (static_cast<Index>(values.size()) != a.numel())
      throw DimensionError("from_values: " + std::to_string(values.size()) +
                           " values for shape " + shape_str(a.shape()));
    std::copy(values.begin(), values.end(), a.node_->data.begin());
    return a;
  }

  static NdArray randn(std::vector<Index> shape, Rng& rng, Scalar stddev,
                       bool requires_grad = false) {
    auto a = zeros(std::move(shape), requires_grad);
    for (auto& x : a.node_->data) x = static_cast<Scalar>(rng.normal()) * stddev;
    return a;
  }

  bool valid() const { return node_ != nullptr; }
  const std::vector<Index>& shape() const { return node_->shape; }
  Index numel() const { return node_->numel(); }
  Index rows() const { return node_->rows(); }
  Index cols() const { return node_->cols(); }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool rg) { node_->requires_grad = rg; }
  const char* op() const { return node_->op; }

  MatMap<Scalar> value() { return node_->value_map(); }
  ConstMatMap<Scalar> value() const { return std::as_const(*node_).value_map(); }
  Scalar* data() { return node_->data.data(); }
  const Scalar* data() const { return node_->data.data(); }

  bool has_grad() const { return !node_->grad.empty(); }
  MatMap<Scalar> grad() { return node_->grad_map(); }
  void zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), Scalar(0));
  }

  Scalar scalar() const {
    if (numel() != 1)
      throw ContractError("scalar(): array of shape " + shape_str(shape()) + " is not a scalar");
    return node_->data[0];
  }

  std::shared_ptr<Node> node() const { return node_; }

  // Reverse pass from a scalar. Gradients of interior nodes are scratch
  // and reset on every call; leaf gradients accumulate additively until
  // the caller zeroes them.
  void backward() const {
    if (!valid()) throw ContractError("backward(): empty array");
    if (numel() != 1)
      throw ContractError("backward(): loss must be scalar, got shape " + shape_str(shape()));

    std::vector<Node*> order;
    topo_order(node_.get(), order);

    for (Node* n : order) {
      if (n->backward_fn) {
        n->ensure_grad();
        std::fill(n->grad.begin(), n->grad.end(), Scalar(0));
      }
    }
    node_->ensure_grad();
    if (node_->backward_fn) {
      node_->grad[0] = Scalar(1);
    } else {
      node_->grad[0] += Scalar(1);  // loss that is itself a leaf
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if ((*it)->backward_fn && (*it)->requires_grad) (*it)->backward_fn();
    }
  }

 private:
  static void topo_order(Node* root, std::vector<Node*>& order) {
    std::unordered_set<Node*> seen;
    // Iterative post-order DFS; parent visit order is fixed, so the replay
    // order is deterministic.
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    seen.insert(root);
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        Node* p = node->parents[next++].get();
        if (seen.insert(p).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }

  std::shared_ptr<Node> node_;
};

namespace detail {

// Builds a fresh tape node for an op result. The caller fills data and, if
// any parent requires grad, installs the backward closure.
template <typename Scalar>
std::shared_ptr<TapeNode<Scalar>> result_node(
    const char* op, std::vector<Index> shape,
    std::initializer_list<const NdArray<Scalar>*> inputs) {
  auto n = std::make_shared<TapeNode<Scalar>>();
  n->op = op;
  n->shape = std::move(shape);
  n->data.assign(static_cast<std::size_t>(n->numel()), Scalar(0));
  for (const auto* in : inputs) {
    n->parents.push_back(in->node());
    n->requires_grad = n->requires_grad || in->requires_grad();
  }
  return n;
}

}  // namespace detail

}  // namespace dpr
