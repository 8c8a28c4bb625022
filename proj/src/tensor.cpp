#include "slukit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "slukit/error.hpp"

namespace slukit::ad {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  for (std::size_t e : shape)
    if (e == 0) throw ShapeError("zero extent in shape " + to_string(shape));
  if (numel(shape) != values.size())
    throw ShapeError("shape " + to_string(shape) + " needs " +
                     std::to_string(numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(node->value.size(), 0.0);
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("expected rank 2, got " + to_string(shape()));
  return shape()[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("expected rank 2, got " + to_string(shape()));
  return shape()[1];
}

double Tensor::item() const {
  if (size() != 1)
    throw ContractError("item() on non-scalar tensor " + to_string(shape()));
  return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return node_->value.at(r * cols() + c);
}

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

bool Tensor::all_finite() const {
  return std::all_of(node_->value.begin(), node_->value.end(),
                     [](double v) { return std::isfinite(v); });
}

void Tensor::check_finite(const std::string& what) const {
  if (!all_finite()) throw ContractError(what + " contains NaN/Inf");
}

Tensor Tensor::clone(bool requires_grad) const {
  return from(shape(), node_->value, requires_grad);
}

void append_params(NamedParams& dst, const std::string& prefix,
                   const NamedParams& src) {
  for (const auto& [name, t] : src) dst.emplace_back(prefix + name, t);
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor make_result(Shape shape, std::vector<double> value,
                   std::vector<Tensor> parents, const char* op,
                   std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  bool needs = false;
  if (g_grad_enabled)
    for (const auto& p : parents) needs = needs || p.requires_grad();
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.ptr());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

std::vector<Node*> topological_order(const Tensor& root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  // Iterative DFS; recurrent graphs are deep enough to worry a call stack.
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  seen.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second)
        stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw ContractError("backward on undefined tensor");
  if (loss.size() != 1)
    throw ContractError("backward needs a scalar loss, got shape " +
                        to_string(loss.shape()));
  if (!loss.requires_grad()) return;

  const auto order = topological_order(loss);
  // Interior gradients restart at zero each sweep; only leaves accumulate.
  for (Node* n : order)
    if (!n->parents.empty()) n->grad.assign(n->value.size(), 0.0);
  loss.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }
}

}  // namespace slukit::ad
