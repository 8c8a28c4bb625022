#include "slukit/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "slukit/error.hpp"
#include "slukit/kernels.hpp"

namespace slukit::ad {

namespace {

using kernels::GemmDims;

std::size_t last_dim(const Tensor& x) { return x.shape().back(); }
std::size_t row_count(const Tensor& x) { return x.size() / last_dim(x); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     to_string(a.shape()) + " vs " + to_string(b.shape()));
}

void require_rank2(const Tensor& x, const char* op) {
  if (x.rank() != 2)
    throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " +
                     to_string(x.shape()));
}

// Parent `i` of a result node, or nullptr if it takes no gradient.
Node* grad_parent(Node& self, std::size_t i) {
  Node* p = self.parents[i].get();
  return p->requires_grad ? p : nullptr;
}

double sigmoid_scalar(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "relu") return Activation::kRelu;
  throw ContractError("unknown activation '" + std::string(name) + "'");
}

std::string_view activation_name(Activation kind) {
  switch (kind) {
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kRelu: return "relu";
  }
  return "?";
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner extents differ, " + to_string(a.shape()) +
                     " · " + to_string(b.shape()));
  const GemmDims d{a.rows(), a.cols(), b.cols()};
  std::vector<double> out(d.m * d.n);
  kernels::gemm_nn(d, a.values(), b.values(), out, false);
  return make_result({d.m, d.n}, std::move(out), {a, b}, "matmul",
                     [d](Node& self) {
                       const Node& A = *self.parents[0];
                       const Node& B = *self.parents[1];
                       if (Node* pa = grad_parent(self, 0))
                         kernels::gemm_nt({d.m, d.n, d.k}, self.grad, B.value,
                                          pa->grad, true);
                       if (Node* pb = grad_parent(self, 1))
                         kernels::gemm_tn({d.k, d.m, d.n}, A.value, self.grad,
                                          pb->grad, true);
                     });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  if (a.cols() != b.cols())
    throw ShapeError("matmul_nt: inner extents differ, " +
                     to_string(a.shape()) + " · " + to_string(b.shape()) +
                     "ᵀ");
  const GemmDims d{a.rows(), a.cols(), b.rows()};
  std::vector<double> out(d.m * d.n);
  kernels::gemm_nt(d, a.values(), b.values(), out, false);
  return make_result({d.m, d.n}, std::move(out), {a, b}, "matmul_nt",
                     [d](Node& self) {
                       const Node& A = *self.parents[0];
                       const Node& B = *self.parents[1];
                       // C = A·Bᵀ: dA = dC·B, dB = dCᵀ·A
                       if (Node* pa = grad_parent(self, 0))
                         kernels::gemm_nn({d.m, d.n, d.k}, self.grad, B.value,
                                          pa->grad, true);
                       if (Node* pb = grad_parent(self, 1))
                         kernels::gemm_tn({d.n, d.m, d.k}, self.grad, A.value,
                                          pb->grad, true);
                     });
}

Tensor transpose(const Tensor& x) {
  require_rank2(x, "transpose");
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(r * c);
  auto v = x.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = v[i * c + j];
  return make_result({c, r}, std::move(out), {x}, "transpose",
                     [r, c](Node& self) {
                       Node* p = grad_parent(self, 0);
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < c; ++j)
                           p->grad[i * c + j] += self.grad[j * r + i];
                     });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  auto va = a.values(), vb = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] + vb[i];
  return make_result(a.shape(), std::move(out), {a, b}, "add", [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k)
      if (Node* p = grad_parent(self, k))
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          p->grad[i] += self.grad[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  auto va = a.values(), vb = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] - vb[i];
  return make_result(a.shape(), std::move(out), {a, b}, "sub", [](Node& self) {
    if (Node* p = grad_parent(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        p->grad[i] += self.grad[i];
    if (Node* p = grad_parent(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        p->grad[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  auto va = a.values(), vb = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[i];
  return make_result(a.shape(), std::move(out), {a, b}, "mul", [](Node& self) {
    const auto& va = self.parents[0]->value;
    const auto& vb = self.parents[1]->value;
    if (Node* p = grad_parent(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        p->grad[i] += self.grad[i] * vb[i];
    if (Node* p = grad_parent(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        p->grad[i] += self.grad[i] * va[i];
  });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (double& v : out) v *= factor;
  return make_result(x.shape(), std::move(out), {x}, "scale",
                     [factor](Node& self) {
                       Node* p = grad_parent(self, 0);
                       for (std::size_t i = 0; i < self.grad.size(); ++i)
                         p->grad[i] += self.grad[i] * factor;
                     });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  const std::size_t n = last_dim(x);
  if (bias.size() != n || (bias.rank() != 1 && !(bias.rank() == 2 && bias.dim(0) == 1)))
    throw ShapeError("add_bias: bias " + to_string(bias.shape()) +
                     " does not match rows of " + to_string(x.shape()));
  std::vector<double> out(x.values().begin(), x.values().end());
  auto vb = bias.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += vb[i % n];
  return make_result(x.shape(), std::move(out), {x, bias}, "add_bias",
                     [n](Node& self) {
                       if (Node* p = grad_parent(self, 0))
                         for (std::size_t i = 0; i < self.grad.size(); ++i)
                           p->grad[i] += self.grad[i];
                       if (Node* p = grad_parent(self, 1))
                         for (std::size_t i = 0; i < self.grad.size(); ++i)
                           p->grad[i % n] += self.grad[i];
                     });
}

Tensor apply_activation(const Tensor& x, Activation kind) {
  std::vector<double> out(x.size());
  auto v = x.values();
  switch (kind) {
    case Activation::kTanh:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(v[i]);
      return make_result(x.shape(), std::move(out), {x}, "tanh", [](Node& self) {
        Node* p = grad_parent(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          const double y = self.value[i];
          p->grad[i] += self.grad[i] * (1.0 - y * y);
        }
      });
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = sigmoid_scalar(v[i]);
      return make_result(x.shape(), std::move(out), {x}, "sigmoid",
                         [](Node& self) {
                           Node* p = grad_parent(self, 0);
                           for (std::size_t i = 0; i < self.grad.size(); ++i) {
                             const double y = self.value[i];
                             p->grad[i] += self.grad[i] * y * (1.0 - y);
                           }
                         });
    case Activation::kRelu:
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = v[i] > 0.0 ? v[i] : 0.0;
      return make_result(x.shape(), std::move(out), {x}, "relu", [](Node& self) {
        Node* p = grad_parent(self, 0);
        const auto& in = p->value;
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          if (in[i] > 0.0) p->grad[i] += self.grad[i];
      });
  }
  throw ContractError("unhandled activation");
}

Tensor tanh(const Tensor& x) { return apply_activation(x, Activation::kTanh); }
Tensor sigmoid(const Tensor& x) {
  return apply_activation(x, Activation::kSigmoid);
}
Tensor relu(const Tensor& x) { return apply_activation(x, Activation::kRelu); }

Tensor softmax_rows(const Tensor& x) {
  const std::size_t n = last_dim(x), rows = row_count(x);
  std::vector<double> out(x.size());
  auto v = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = v.data() + r * n;
    double* o = out.data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += (o[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < n; ++j) o[j] /= z;
  }
  return make_result(x.shape(), std::move(out), {x}, "softmax",
                     [n, rows](Node& self) {
                       Node* p = grad_parent(self, 0);
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* y = self.value.data() + r * n;
                         const double* g = self.grad.data() + r * n;
                         double dot = 0.0;
                         for (std::size_t j = 0; j < n; ++j) dot += y[j] * g[j];
                         for (std::size_t j = 0; j < n; ++j)
                           p->grad[r * n + j] += y[j] * (g[j] - dot);
                       }
                     });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> targets,
                             std::optional<int> ignore_index) {
  const std::size_t k = last_dim(logits), rows = row_count(logits);
  if (targets.size() != rows)
    throw ShapeError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(rows) + " rows");
  auto v = logits.values();
  auto probs = std::make_shared<std::vector<double>>(logits.size());
  auto tgt = std::make_shared<std::vector<int>>(targets.begin(), targets.end());
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const int t = targets[r];
    if (ignore_index && t == *ignore_index) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= k)
      throw ContractError("softmax_cross_entropy: target " + std::to_string(t) +
                          " outside [0, " + std::to_string(k) + ") at row " +
                          std::to_string(r));
    const double* in = v.data() + r * k;
    double* pr = probs->data() + r * k;
    const double mx = *std::max_element(in, in + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += (pr[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < k; ++j) pr[j] /= z;
    total += (mx + std::log(z)) - in[t];
    ++used;
  }
  if (used == 0)
    throw DegenerateError("softmax_cross_entropy: every row is ignored");
  const double inv = 1.0 / static_cast<double>(used);
  const int ignore = ignore_index.value_or(-1);
  const bool has_ignore = ignore_index.has_value();
  return make_result({1}, {total * inv}, {logits}, "softmax_cross_entropy",
                     [=](Node& self) {
                       Node* p = grad_parent(self, 0);
                       const double g = self.grad[0] * inv;
                       for (std::size_t r = 0; r < rows; ++r) {
                         const int t = (*tgt)[r];
                         if (has_ignore && t == ignore) continue;
                         const double* pr = probs->data() + r * k;
                         double* out = p->grad.data() + r * k;
                         for (std::size_t j = 0; j < k; ++j) out[j] += g * pr[j];
                         out[t] -= g;
                       }
                     });
}

Tensor binary_cross_entropy_with_logits(const Tensor& logits,
                                        std::span<const double> targets) {
  if (targets.size() != logits.size())
    throw ShapeError("binary_cross_entropy_with_logits: " +
                     std::to_string(targets.size()) + " targets for " +
                     to_string(logits.shape()));
  auto v = logits.values();
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double z = v[i], y = targets[i];
    total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  const double inv = 1.0 / static_cast<double>(v.size());
  auto y = std::make_shared<std::vector<double>>(targets.begin(), targets.end());
  return make_result({1}, {total * inv}, {logits}, "bce_with_logits",
                     [inv, y](Node& self) {
                       Node* p = grad_parent(self, 0);
                       const double g = self.grad[0] * inv;
                       for (std::size_t i = 0; i < y->size(); ++i)
                         p->grad[i] += g * (sigmoid_scalar(p->value[i]) - (*y)[i]);
                     });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_result({1}, {s}, {x}, "sum", [](Node& self) {
    Node* p = grad_parent(self, 0);
    for (double& g : p->grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size())
    throw ShapeError("reshape: " + to_string(x.shape()) + " -> " +
                     to_string(shape));
  std::vector<double> out(x.values().begin(), x.values().end());
  return make_result(std::move(shape), std::move(out), {x}, "reshape",
                     [](Node& self) {
                       Node* p = grad_parent(self, 0);
                       for (std::size_t i = 0; i < self.grad.size(); ++i)
                         p->grad[i] += self.grad[i];
                     });
}

Tensor concat_last(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_last: no inputs");
  const std::size_t rows = row_count(parts[0]);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != parts[0].rank() || row_count(p) != rows)
      throw ShapeError("concat_last: " + to_string(p.shape()) +
                       " incompatible with " + to_string(parts[0].shape()));
    widths.push_back(last_dim(p));
    total += widths.back();
  }
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto v = parts[k].values();
    const std::size_t w = widths[k];
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(v.data() + r * w, w, out.data() + r * total + offset);
    offset += w;
  }
  Shape shape = parts[0].shape();
  shape.back() = total;
  return make_result(std::move(shape), std::move(out),
                     std::vector<Tensor>(parts.begin(), parts.end()), "concat",
                     [rows, total, widths](Node& self) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         const std::size_t w = widths[k];
                         if (Node* p = grad_parent(self, k))
                           for (std::size_t r = 0; r < rows; ++r)
                             for (std::size_t j = 0; j < w; ++j)
                               p->grad[r * w + j] +=
                                   self.grad[r * total + off + j];
                         off += w;
                       }
                     });
}

Tensor slice_last(const Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t n = last_dim(x), rows = row_count(x);
  if (begin >= end || end > n)
    throw ShapeError("slice_last: [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") outside width " +
                     std::to_string(n));
  const std::size_t w = end - begin;
  std::vector<double> out(rows * w);
  auto v = x.values();
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(v.data() + r * n + begin, w, out.data() + r * w);
  Shape shape = x.shape();
  shape.back() = w;
  return make_result(std::move(shape), std::move(out), {x}, "slice",
                     [rows, n, w, begin](Node& self) {
                       Node* p = grad_parent(self, 0);
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t j = 0; j < w; ++j)
                           p->grad[r * n + begin + j] += self.grad[r * w + j];
                     });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const std::size_t width = parts[0].cols();
  std::size_t rows = 0;
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    if (p.cols() != width)
      throw ShapeError("concat_rows: " + to_string(p.shape()) + " vs " +
                       to_string(parts[0].shape()));
    rows += p.rows();
    sizes.push_back(p.size());
  }
  std::vector<double> out;
  out.reserve(rows * width);
  for (const auto& p : parts)
    out.insert(out.end(), p.values().begin(), p.values().end());
  return make_result({rows, width}, std::move(out),
                     std::vector<Tensor>(parts.begin(), parts.end()),
                     "concat_rows", [sizes](Node& self) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < sizes.size(); ++k) {
                         if (Node* p = grad_parent(self, k))
                           for (std::size_t i = 0; i < sizes[k]; ++i)
                             p->grad[i] += self.grad[off + i];
                         off += sizes[k];
                       }
                     });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank2(x, "slice_rows");
  if (begin >= end || end > x.rows())
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") outside " + to_string(x.shape()));
  const std::size_t w = x.cols();
  std::vector<double> out(x.values().begin() + begin * w,
                          x.values().begin() + end * w);
  return make_result({end - begin, w}, std::move(out), {x}, "slice_rows",
                     [begin, w](Node& self) {
                       Node* p = grad_parent(self, 0);
                       for (std::size_t i = 0; i < self.grad.size(); ++i)
                         p->grad[begin * w + i] += self.grad[i];
                     });
}

Tensor gather_rows(const Tensor& table, std::span<const int> ids,
                   std::optional<int> padding_id) {
  require_rank2(table, "gather_rows");
  const std::size_t vocab = table.rows(), d = table.cols();
  if (ids.empty()) throw ContractError("gather_rows: empty id list");
  std::vector<double> out(ids.size() * d, 0.0);
  auto v = table.values();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int id = ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= vocab)
      throw ContractError("gather_rows: id " + std::to_string(id) +
                          " out of range for table of " +
                          std::to_string(vocab) + " rows");
    if (padding_id && id == *padding_id) continue;
    std::copy_n(v.data() + id * d, d, out.data() + i * d);
  }
  auto saved = std::make_shared<std::vector<int>>(ids.begin(), ids.end());
  const int pad = padding_id.value_or(-1);
  return make_result({ids.size(), d}, std::move(out), {table}, "gather_rows",
                     [saved, d, pad](Node& self) {
                       Node* p = grad_parent(self, 0);
                       for (std::size_t i = 0; i < saved->size(); ++i) {
                         const int id = (*saved)[i];
                         if (id == pad) continue;
                         for (std::size_t j = 0; j < d; ++j)
                           p->grad[id * d + j] += self.grad[i * d + j];
                       }
                     });
}

Tensor select_rows(std::span<const std::uint8_t> take_a, const Tensor& a,
                   const Tensor& b) {
  require_same_shape(a, b, "select_rows");
  const std::size_t w = last_dim(a), rows = row_count(a);
  if (take_a.size() != rows)
    throw ShapeError("select_rows: mask of " + std::to_string(take_a.size()) +
                     " for " + std::to_string(rows) + " rows");
  std::vector<double> out(a.size());
  auto va = a.values(), vb = b.values();
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n((take_a[r] ? va : vb).data() + r * w, w, out.data() + r * w);
  auto mask = std::make_shared<Mask>(take_a.begin(), take_a.end());
  return make_result(a.shape(), std::move(out), {a, b}, "select_rows",
                     [mask, w](Node& self) {
                       Node* pa = grad_parent(self, 0);
                       Node* pb = grad_parent(self, 1);
                       for (std::size_t r = 0; r < mask->size(); ++r) {
                         Node* dst = (*mask)[r] ? pa : pb;
                         if (!dst) continue;
                         for (std::size_t j = 0; j < w; ++j)
                           dst->grad[r * w + j] += self.grad[r * w + j];
                       }
                     });
}

Tensor mul_rows(const Tensor& x, std::span<const double> weights) {
  const std::size_t w = last_dim(x), rows = row_count(x);
  if (weights.size() != rows)
    throw ShapeError("mul_rows: " + std::to_string(weights.size()) +
                     " weights for " + std::to_string(rows) + " rows");
  std::vector<double> out(x.values().begin(), x.values().end());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < w; ++j) out[r * w + j] *= weights[r];
  auto saved = std::make_shared<std::vector<double>>(weights.begin(),
                                                     weights.end());
  return make_result(x.shape(), std::move(out), {x}, "mul_rows",
                     [saved, w](Node& self) {
                       Node* p = grad_parent(self, 0);
                       for (std::size_t r = 0; r < saved->size(); ++r)
                         for (std::size_t j = 0; j < w; ++j)
                           p->grad[r * w + j] += self.grad[r * w + j] * (*saved)[r];
                     });
}

Tensor scale_groups(const Tensor& x, const Tensor& factors) {
  const std::size_t groups = factors.size();
  if (groups == 0 || x.size() % groups != 0)
    throw ShapeError("scale_groups: " + to_string(x.shape()) +
                     " not divisible into " + std::to_string(groups) + " groups");
  const std::size_t m = x.size() / groups;
  std::vector<double> out(x.values().begin(), x.values().end());
  auto f = factors.values();
  for (std::size_t g = 0; g < groups; ++g)
    for (std::size_t j = 0; j < m; ++j) out[g * m + j] *= f[g];
  return make_result(x.shape(), std::move(out), {x, factors}, "scale_groups",
                     [groups, m](Node& self) {
                       const auto& xv = self.parents[0]->value;
                       const auto& fv = self.parents[1]->value;
                       if (Node* p = grad_parent(self, 0))
                         for (std::size_t g = 0; g < groups; ++g)
                           for (std::size_t j = 0; j < m; ++j)
                             p->grad[g * m + j] += self.grad[g * m + j] * fv[g];
                       if (Node* p = grad_parent(self, 1))
                         for (std::size_t g = 0; g < groups; ++g) {
                           double s = 0.0;
                           for (std::size_t j = 0; j < m; ++j)
                             s += self.grad[g * m + j] * xv[g * m + j];
                           p->grad[g] += s;
                         }
                     });
}

Tensor stack_steps(std::span<const Tensor> steps) {
  if (steps.empty()) throw ContractError("stack_steps: no steps");
  const std::size_t t_len = steps.size();
  const std::size_t batch = steps[0].rows(), h = steps[0].cols();
  for (const auto& s : steps)
    if (s.rank() != 2 || s.rows() != batch || s.cols() != h)
      throw ShapeError("stack_steps: step " + to_string(s.shape()) + " vs " +
                       to_string(steps[0].shape()));
  std::vector<double> out(batch * t_len * h);
  for (std::size_t t = 0; t < t_len; ++t) {
    auto v = steps[t].values();
    for (std::size_t b = 0; b < batch; ++b)
      std::copy_n(v.data() + b * h, h, out.data() + (b * t_len + t) * h);
  }
  return make_result({batch, t_len, h}, std::move(out),
                     std::vector<Tensor>(steps.begin(), steps.end()),
                     "stack_steps", [batch, t_len, h](Node& self) {
                       for (std::size_t t = 0; t < t_len; ++t) {
                         Node* p = grad_parent(self, t);
                         if (!p) continue;
                         for (std::size_t b = 0; b < batch; ++b)
                           for (std::size_t j = 0; j < h; ++j)
                             p->grad[b * h + j] +=
                                 self.grad[(b * t_len + t) * h + j];
                       }
                     });
}

Tensor mean_pool(const Tensor& x, std::span<const std::uint8_t> mask) {
  if (x.rank() != 3)
    throw ShapeError("mean_pool: expected [B×T×H], got " + to_string(x.shape()));
  const std::size_t batch = x.dim(0), t_len = x.dim(1), h = x.dim(2);
  if (mask.size() != batch * t_len)
    throw ShapeError("mean_pool: mask size " + std::to_string(mask.size()) +
                     " for " + to_string(x.shape()));
  auto inv = std::make_shared<std::vector<double>>(batch);
  std::vector<double> out(batch * h, 0.0);
  auto v = x.values();
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t count = 0;
    for (std::size_t t = 0; t < t_len; ++t) {
      if (!mask[b * t_len + t]) continue;
      ++count;
      for (std::size_t j = 0; j < h; ++j)
        out[b * h + j] += v[(b * t_len + t) * h + j];
    }
    if (count == 0)
      throw DegenerateError("mean_pool: row " + std::to_string(b) +
                            " is fully masked");
    (*inv)[b] = 1.0 / static_cast<double>(count);
    for (std::size_t j = 0; j < h; ++j) out[b * h + j] *= (*inv)[b];
  }
  auto m = std::make_shared<Mask>(mask.begin(), mask.end());
  return make_result({batch, h}, std::move(out), {x}, "mean_pool",
                     [inv, m, batch, t_len, h](Node& self) {
                       Node* p = grad_parent(self, 0);
                       for (std::size_t b = 0; b < batch; ++b)
                         for (std::size_t t = 0; t < t_len; ++t) {
                           if (!(*m)[b * t_len + t]) continue;
                           for (std::size_t j = 0; j < h; ++j)
                             p->grad[(b * t_len + t) * h + j] +=
                                 self.grad[b * h + j] * (*inv)[b];
                         }
                     });
}

Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng) {
  if (p <= 0.0) return x;
  if (p >= 1.0) throw ContractError("dropout probability must be < 1");
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double keep = 1.0 / (1.0 - p);
  auto factors = std::make_shared<std::vector<double>>(x.size());
  for (double& f : *factors) f = uni(rng) < p ? 0.0 : keep;
  std::vector<double> out(x.values().begin(), x.values().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= (*factors)[i];
  return make_result(x.shape(), std::move(out), {x}, "dropout",
                     [factors](Node& self) {
                       Node* p = grad_parent(self, 0);
                       for (std::size_t i = 0; i < self.grad.size(); ++i)
                         p->grad[i] += self.grad[i] * (*factors)[i];
                     });
}

Tensor mask_columns(const Tensor& scores, std::span<const std::uint8_t> mask) {
  require_rank2(scores, "mask_columns");
  const std::size_t cols = scores.cols();
  if (mask.size() != cols)
    throw ShapeError("mask_columns: mask of " + std::to_string(mask.size()) +
                     " for " + std::to_string(cols) + " columns");
  std::vector<double> out(scores.values().begin(), scores.values().end());
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!mask[i % cols]) out[i] += kMaskedScore;
  return make_result(scores.shape(), std::move(out), {scores}, "mask_columns",
                     [](Node& self) {
                       Node* p = grad_parent(self, 0);
                       for (std::size_t i = 0; i < self.grad.size(); ++i)
                         p->grad[i] += self.grad[i];
                     });
}

Tensor attention_weights(const Tensor& q, const Tensor& k,
                         std::span<const std::uint8_t> mask) {
  require_rank2(q, "attention");
  require_rank2(k, "attention");
  if (q.cols() != k.cols())
    throw ShapeError("attention: query width " + to_string(q.shape()) +
                     " vs key width " + to_string(k.shape()));
  if (std::none_of(mask.begin(), mask.end(), [](auto m) { return m != 0; }))
    throw DegenerateError("attention: every key position is masked");
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  return softmax_rows(mask_columns(scale(matmul_nt(q, k), inv_sqrt_d), mask));
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::span<const std::uint8_t> mask) {
  require_rank2(v, "attention");
  if (v.rows() != k.rows())
    throw ShapeError("attention: " + to_string(k.shape()) + " keys but " +
                     to_string(v.shape()) + " values");
  return matmul(attention_weights(q, k, mask), v);
}

Tensor batched_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                         std::span<const std::uint8_t> mask) {
  if (q.rank() != 3 || k.rank() != 3 || v.rank() != 3)
    throw ShapeError("batched_attention: expected rank-3 q, k, v; got " +
                     to_string(q.shape()) + ", " + to_string(k.shape()) + ", " +
                     to_string(v.shape()));
  const std::size_t batch = q.dim(0), tq = q.dim(1), d = q.dim(2);
  const std::size_t tk = k.dim(1), dv = v.dim(2);
  if (k.dim(0) != batch || v.dim(0) != batch || k.dim(2) != d || v.dim(1) != tk)
    throw ShapeError("batched_attention: q " + to_string(q.shape()) + ", k " +
                     to_string(k.shape()) + ", v " + to_string(v.shape()));
  if (mask.size() != batch * tk)
    throw ShapeError("batched_attention: mask size " + std::to_string(mask.size()) +
                     " for " + std::to_string(batch) + "x" + std::to_string(tk) + " keys");
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  auto weights = std::make_shared<std::vector<double>>(batch * tq * tk);
  std::vector<double> out(batch * tq * dv, 0.0);
  auto qv = q.values(), kv = k.values(), vv = v.values();
  std::vector<double> scores(tk);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::uint8_t* m = mask.data() + b * tk;
    if (std::none_of(m, m + tk, [](auto x) { return x != 0; }))
      throw DegenerateError("attention: every key position is masked in row " +
                            std::to_string(b));
    for (std::size_t i = 0; i < tq; ++i) {
      const double* qi = qv.data() + (b * tq + i) * d;
      for (std::size_t j = 0; j < tk; ++j) {
        const double* kj = kv.data() + (b * tk + j) * d;
        double s = 0.0;
        for (std::size_t p = 0; p < d; ++p) s += qi[p] * kj[p];
        s *= inv_sqrt_d;
        if (!m[j]) s += kMaskedScore;
        scores[j] = s;
      }
      const double mx = *std::max_element(scores.begin(), scores.end());
      double* w = weights->data() + (b * tq + i) * tk;
      double z = 0.0;
      for (std::size_t j = 0; j < tk; ++j) z += (w[j] = std::exp(scores[j] - mx));
      for (std::size_t j = 0; j < tk; ++j) w[j] /= z;
      double* o = out.data() + (b * tq + i) * dv;
      for (std::size_t j = 0; j < tk; ++j) {
        const double* vj = vv.data() + (b * tk + j) * dv;
        for (std::size_t c = 0; c < dv; ++c) o[c] += w[j] * vj[c];
      }
    }
  }
  return make_result(
      {batch, tq, dv}, std::move(out), {q, k, v}, "batched_attention",
      [weights, batch, tq, tk, d, dv, inv_sqrt_d](Node& self) {
        const auto& qv = self.parents[0]->value;
        const auto& kv = self.parents[1]->value;
        const auto& vv = self.parents[2]->value;
        Node* pq = grad_parent(self, 0);
        Node* pk = grad_parent(self, 1);
        Node* pv = grad_parent(self, 2);
        std::vector<double> dw(tk);
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t i = 0; i < tq; ++i) {
            const double* w = weights->data() + (b * tq + i) * tk;
            const double* g = self.grad.data() + (b * tq + i) * dv;
            double dot = 0.0;
            for (std::size_t j = 0; j < tk; ++j) {
              const double* vj = vv.data() + (b * tk + j) * dv;
              double s = 0.0;
              for (std::size_t c = 0; c < dv; ++c) s += g[c] * vj[c];
              dw[j] = s;
              dot += w[j] * s;
              if (pv)
                for (std::size_t c = 0; c < dv; ++c)
                  pv->grad[(b * tk + j) * dv + c] += w[j] * g[c];
            }
            const double* qi = qv.data() + (b * tq + i) * d;
            for (std::size_t j = 0; j < tk; ++j) {
              const double ds = w[j] * (dw[j] - dot) * inv_sqrt_d;
              if (ds == 0.0) continue;
              const double* kj = kv.data() + (b * tk + j) * d;
              if (pq)
                for (std::size_t p = 0; p < d; ++p)
                  pq->grad[(b * tq + i) * d + p] += ds * kj[p];
              if (pk)
                for (std::size_t p = 0; p < d; ++p)
                  pk->grad[(b * tk + j) * d + p] += ds * qi[p];
            }
          }
      });
}

NamedParams LstmParams::named() const {
  return {{"w_x", w_x}, {"w_h", w_h}, {"bias", bias}};
}

namespace {

// Fused gate nonlinearities and state update. Input z is the full
// pre-activation [B×4H]; output packs [h' | c'] as [B×2H].
Tensor lstm_pointwise(const Tensor& z, const Tensor& c) {
  const std::size_t batch = c.rows(), h = c.cols();
  if (z.rows() != batch || z.cols() != 4 * h)
    throw ShapeError("lstm: gate pre-activations " + to_string(z.shape()) +
                     " do not match state " + to_string(c.shape()));
  // Saved activations: i, f, g, o, tanh(c') per cell.
  auto acts = std::make_shared<std::vector<double>>(batch * h * 5);
  std::vector<double> out(batch * 2 * h);
  auto zv = z.values(), cv = c.values();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* zr = zv.data() + b * 4 * h;
    for (std::size_t j = 0; j < h; ++j) {
      const double ig = sigmoid_scalar(zr[j]);
      const double fg = sigmoid_scalar(zr[h + j]);
      const double gg = std::tanh(zr[2 * h + j]);
      const double og = sigmoid_scalar(zr[3 * h + j]);
      const double cn = fg * cv[b * h + j] + ig * gg;
      const double tc = std::tanh(cn);
      double* a = acts->data() + (b * h + j) * 5;
      a[0] = ig; a[1] = fg; a[2] = gg; a[3] = og; a[4] = tc;
      out[b * 2 * h + j] = og * tc;
      out[b * 2 * h + h + j] = cn;
    }
  }
  return make_result({batch, 2 * h}, std::move(out), {z, c}, "lstm_pointwise",
                     [acts, batch, h](Node& self) {
                       Node* pz = grad_parent(self, 0);
                       Node* pc = grad_parent(self, 1);
                       const auto& cprev = self.parents[1]->value;
                       for (std::size_t b = 0; b < batch; ++b)
                         for (std::size_t j = 0; j < h; ++j) {
                           const double* a = acts->data() + (b * h + j) * 5;
                           const double ig = a[0], fg = a[1], gg = a[2],
                                        og = a[3], tc = a[4];
                           const double dh = self.grad[b * 2 * h + j];
                           const double dc = self.grad[b * 2 * h + h + j] +
                                             dh * og * (1.0 - tc * tc);
                           if (pz) {
                             double* gz = pz->grad.data() + b * 4 * h;
                             gz[j] += dc * gg * ig * (1.0 - ig);
                             gz[h + j] += dc * cprev[b * h + j] * fg * (1.0 - fg);
                             gz[2 * h + j] += dc * ig * (1.0 - gg * gg);
                             gz[3 * h + j] += dh * tc * og * (1.0 - og);
                           }
                           if (pc) pc->grad[b * h + j] += dc * fg;
                         }
                     });
}

}  // namespace

LstmState lstm_cell_preact(const Tensor& x_proj, const Tensor& h,
                           const Tensor& c, const LstmParams& params) {
  const std::size_t hidden = params.hidden_size();
  if (h.rank() != 2 || h.cols() != hidden || c.shape() != h.shape())
    throw ShapeError("lstm: state " + to_string(h.shape()) + "/" +
                     to_string(c.shape()) + " for hidden size " +
                     std::to_string(hidden));
  const Tensor z = add_bias(add(x_proj, matmul(h, params.w_h)), params.bias);
  const Tensor packed = lstm_pointwise(z, c);
  return {slice_last(packed, 0, hidden), slice_last(packed, hidden, 2 * hidden)};
}

LstmState lstm_cell(const Tensor& x, const Tensor& h, const Tensor& c,
                    const LstmParams& params) {
  return lstm_cell_preact(matmul(x, params.w_x), h, c, params);
}

}  // namespace slukit::ad
