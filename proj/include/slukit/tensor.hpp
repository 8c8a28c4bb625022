#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace slukit::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the compute graph. Leaves (parameters, inputs) have no
// parents; every op result records its parents and a closure that pushes
// its own `grad` into theirs.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // sized iff requires_grad
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward;
  const char* op = "leaf";
};

// Shared handle to a graph node. Copies alias the same storage; use
// `clone()` for a detached deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t size() const { return node_->value.size(); }
  // Rank-2 helpers.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const { return node_->value; }
  std::span<double> mutable_values() { return node_->value; }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->parents.empty(); }
  const char* op() const { return node_->op; }

  double item() const;
  double at(std::size_t i) const { return node_->value.at(i); }
  double at(std::size_t r, std::size_t c) const;

  void zero_grad();
  bool all_finite() const;
  // Throws ContractError naming `what` if any value is NaN/Inf.
  void check_finite(const std::string& what) const;

  Tensor clone(bool requires_grad = false) const;

  Node* node() const noexcept { return node_.get(); }
  const NodePtr& ptr() const noexcept { return node_; }

 private:
  NodePtr node_;
};

using NamedTensor = std::pair<std::string, Tensor>;
using NamedParams = std::vector<NamedTensor>;

// Appends `src` to `dst` with every name prefixed by `prefix`.
void append_params(NamedParams& dst, const std::string& prefix,
                   const NamedParams& src);

// Gradient recording is on by default and can be suspended per thread.
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

// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
// reachable requires_grad leaf; callers zero them between steps.
void backward(const Tensor& loss);

// The nodes reachable from `root`, parents before children.
std::vector<Node*> topological_order(const Tensor& root);

// Used by op implementations to build a result node.
Tensor make_result(Shape shape, std::vector<double> value,
                   std::vector<Tensor> parents, const char* op,
                   std::function<void(Node&)> backward);

}  // namespace slukit::ad
