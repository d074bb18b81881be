#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tcn/common.hpp"

namespace tcn {

// Reverse-mode autodiff over dense row-major tensors. The graph is rebuilt on
// every forward pass (define-by-run): each op allocates a fresh node holding
// the result, its parents and a backward closure. Values are immutable once
// an op has produced them; parameters are leaf nodes that persist across
// iterations while the rest of the graph is dropped when the loss handle goes
// out of scope.
//
// The scalar type is a template parameter: training runs float, gradient
// checks instantiate double so central finite differences have headroom.

template <class S>
struct TensorNode {
  Shape shape;
  std::vector<S> value;
  std::vector<S> grad;  // sized lazily by backward()
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Propagates this node's grad into its parents' grad buffers.
  std::function<void(TensorNode&)> backward_fn;
};

// Global toggle so evaluation sweeps skip graph construction entirely.
inline bool& grad_mode() {
  static bool enabled = true;
  return enabled;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
  ~NoGradGuard() { grad_mode() = prev; }
};

template <class S>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, S fill = S(0)) : node_(std::make_shared<TensorNode<S>>()) {
    node_->shape = std::move(shape);
    node_->value.assign(static_cast<size_t>(numel(node_->shape)), fill);
  }

  Tensor(Shape shape, std::vector<S> data) : node_(std::make_shared<TensorNode<S>>()) {
    check(numel(shape) == static_cast<int64_t>(data.size()),
          "Tensor: data length " + std::to_string(data.size()) + " does not match shape " +
              shape_str(shape));
    node_->shape = std::move(shape);
    node_->value = std::move(data);
  }

  static Tensor scalar(S v) { return Tensor({1}, std::vector<S>{v}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  int64_t size() const { return static_cast<int64_t>(node_->value.size()); }

  std::vector<S>& values() { return node_->value; }
  const std::vector<S>& values() const { return node_->value; }
  std::vector<S>& grad() { return node_->grad; }
  const std::vector<S>& grad() const { return node_->grad; }

  S item() const {
    check(size() == 1, "Tensor::item requires a single-element tensor, got " + shape_str(shape()));
    return node_->value[0];
  }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  Tensor& set_requires_grad(bool v) {
    node_->requires_grad = v;
    return *this;
  }

  std::shared_ptr<TensorNode<S>> node() const { return node_; }

  // Reverse sweep from a scalar. Collects the reachable subgraph in
  // topological order, zero-fills every grad buffer in it, seeds d(this)=1
  // and calls each node's backward exactly once in reverse order.
  void backward() const {
    check(size() == 1, "backward() must start from a scalar loss");
    std::vector<TensorNode<S>*> order;
    std::unordered_set<TensorNode<S>*> seen;
    std::vector<std::pair<TensorNode<S>*, size_t>> stack;
    stack.push_back({node_.get(), 0});
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, idx] = stack.back();
      if (idx < n->parents.size()) {
        TensorNode<S>* p = n->parents[idx++].get();
        if (seen.insert(p).second) stack.push_back({p, 0});
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
    for (TensorNode<S>* n : order) n->grad.assign(n->value.size(), S(0));
    node_->grad[0] = S(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if ((*it)->backward_fn) (*it)->backward_fn(**it);
    }
  }

 private:
  std::shared_ptr<TensorNode<S>> node_;
};

namespace detail {

// Shared boilerplate for op implementations: allocates the output node and
// wires parents + backward only when grad tracking is on and some input
// needs it.
template <class S>
Tensor<S> make_result(Shape shape) {
  return Tensor<S>(std::move(shape));
}

template <class S>
bool any_requires_grad(std::initializer_list<const Tensor<S>*> ts) {
  if (!grad_mode()) return false;
  for (const Tensor<S>* t : ts)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

template <class S>
void attach(Tensor<S>& out, std::vector<Tensor<S>> parents,
            std::function<void(TensorNode<S>&)> backward_fn) {
  auto node = out.node();
  node->requires_grad = true;
  node->parents.reserve(parents.size());
  for (auto& p : parents) node->parents.push_back(p.node());
  node->backward_fn = std::move(backward_fn);
}

}  // namespace detail

}  // namespace tcn
