#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace skeltk::nn {

using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// One vertex of the compute graph. Ops allocate nodes through Tensor and
// attach a backward closure that reads this node's grad and accumulates into
// the parents' grads. Leaves have no parents.
struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // sized on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::int64_t numel() const { return static_cast<std::int64_t>(values.size()); }
  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

// Shared handle to a graph node. Copying a Tensor aliases the node, so
// parameter handles stay live across training steps.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values,
                            bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  std::int64_t numel() const { return node_->numel(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::vector<double>& values() { return node_->values; }
  const std::vector<double>& values() const { return node_->values; }
  double scalar() const;  // value of a 1-element tensor

  bool has_grad() const { return !node_->grad.empty(); }
  std::vector<double>& grad() { return node_->grad; }
  const std::vector<double>& grad() const { return node_->grad; }
  void clear_grad() { node_->grad.clear(); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Thread-local switch: when disabled, ops compute values but record no graph.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Builds an op result node. When grads are enabled and any parent requires
// them, the node joins the graph with the given backward closure.
Tensor make_op(Shape shape, std::vector<double> values,
               const std::vector<Tensor>& parents,
               std::function<void(Node&)> backward_fn);

// Reverse-mode sweep from a scalar loss: fills grad on every reachable tensor
// that requires grad, visiting each node once, accumulating at fan-out.
void backward(const Tensor& loss);

}  // namespace skeltk::nn
