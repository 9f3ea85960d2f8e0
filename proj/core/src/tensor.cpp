#include "ipcnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace ipcnet::ad {

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

std::vector<double>& Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

}  // namespace detail

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;
using BackwardFn = std::function<void(Node&)>;

thread_local bool g_no_grad = false;
thread_local std::uint64_t* g_branch_hash = nullptr;

void check_shape(const Shape& shape) {
  for (std::size_t e : shape) {
    if (e == 0) throw std::invalid_argument("tensor extents must be positive, got " + to_string(shape));
  }
}

Tensor make_result(Shape shape, std::vector<double> value, std::vector<NodePtr> parents,
                   const char* op, BackwardFn backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  const bool tracked = !g_no_grad &&
      std::any_of(parents.begin(), parents.end(), [](const NodePtr& p) { return p->requires_grad; });
  if (tracked) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

// C[m x n] += A[m x k] . B[k x n]; i-k-j order so every output element
// accumulates over k in the same sequence regardless of its row.
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
             double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      if (aip == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// C[k x n] += A[m x k]^T . B[m x n]
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
             double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      if (aip == 0.0) continue;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

std::vector<double> transposed(const double* a, std::size_t rows, std::size_t cols) {
  std::vector<double> t(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = a[i * cols + j];
  return t;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) +
                                " input, got " + to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + to_string(a.shape()) +
                                " vs " + to_string(b.shape()));
  }
}

}  // namespace

// ---- Tensor ---------------------------------------------------------------

Tensor::Tensor() : Tensor(Shape{1}, std::vector<double>{0.0}) {}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  check_shape(shape);
  if (element_count(shape) != values.size()) {
    throw std::invalid_argument("tensor shape " + to_string(shape) + " needs " +
                                std::to_string(element_count(shape)) + " values, got " +
                                std::to_string(values.size()));
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  check_shape(shape);
  const std::size_t n = element_count(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<double>{value}, requires_grad);
}

Tensor Tensor::eye(std::size_t d) {
  Tensor t = zeros({d, d});
  for (std::size_t i = 0; i < d; ++i) t.mutable_values()[i * d + i] = 1.0;
  return t;
}

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= rank()) {
    throw std::out_of_range("axis " + std::to_string(axis) + " out of range for " + to_string(shape()));
  }
  return node_->shape[axis];
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item() on non-scalar tensor " + to_string(shape()));
  return node_->value[0];
}

Tensor Tensor::detach() const { return Tensor(node_->shape, node_->value, false); }

void Tensor::backward() const {
  if (size() != 1) {
    throw std::invalid_argument("backward() needs a scalar loss, got shape " + to_string(shape()));
  }
  if (!requires_grad()) return;
  DiffGraph graph(*this);
  node_->grad_buffer()[0] += 1.0;
  graph.run_backward();
}

NoGradScope::NoGradScope() : previous_(g_no_grad) { g_no_grad = true; }
NoGradScope::~NoGradScope() { g_no_grad = previous_; }
bool NoGradScope::active() { return g_no_grad; }

BranchFingerprint::BranchFingerprint() : hash_(0xcbf29ce484222325ull) {
  if (g_branch_hash) throw std::logic_error("BranchFingerprint scopes do not nest");
  g_branch_hash = &hash_;
}
BranchFingerprint::~BranchFingerprint() { g_branch_hash = nullptr; }

void BranchFingerprint::record(std::uint64_t branch) {
  if (!g_branch_hash) return;
  *g_branch_hash = (*g_branch_hash ^ branch) * 0x100000001b3ull;  // FNV-1a step
}

// ---- DiffGraph ------------------------------------------------------------

DiffGraph::DiffGraph(const Tensor& root) {
  // Iterative post-order DFS; a node is emitted after all of its parents.
  std::unordered_set<const Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order_.push_back(node);
      stack.pop_back();
    }
  }
}

std::vector<detail::Node*> DiffGraph::leaves() const {
  std::vector<Node*> out;
  for (Node* n : order_)
    if (n->parents.empty()) out.push_back(n);
  return out;
}

void DiffGraph::run_backward() {
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    Node* n = *it;
    if (!n->backward || n->grad.empty()) continue;
    n->backward(*n);
    // Interior gradients are not needed once propagated.
    if (!n->parents.empty()) std::vector<double>().swap(n->grad);
  }
}

// ---- primitives -----------------------------------------------------------

std::size_t valid_output_extent(std::size_t extent, std::size_t window, std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("stride must be >= 1");
  if (window == 0) throw std::invalid_argument("window must be >= 1");
  if (window > extent) {
    throw std::invalid_argument("window " + std::to_string(window) + " larger than input extent " +
                                std::to_string(extent));
  }
  return (extent - window) / stride + 1;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
    throw std::invalid_argument("matmul: incompatible shapes " + to_string(a.shape()) + " and " +
                                to_string(b.shape()));
  }
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  std::vector<double> out(m * n, 0.0);
  gemm_nn(m, k, n, a.values().data(), b.values().data(), out.data());
  return make_result({m, n}, std::move(out), {a.node(), b.node()}, "matmul", [m, k, n](Node& self) {
    const NodePtr& pa = self.parents[0];
    const NodePtr& pb = self.parents[1];
    if (pa->requires_grad) {
      const std::vector<double> bt = transposed(pb->value.data(), k, n);
      gemm_nn(m, n, k, self.grad.data(), bt.data(), pa->grad_buffer().data());
    }
    if (pb->requires_grad) gemm_tn(m, k, n, pa->value.data(), self.grad.data(), pb->grad_buffer().data());
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t r = a.extent(0), c = a.extent(1);
  return make_result({c, r}, transposed(a.values().data(), r, c), {a.node()}, "transpose",
                     [r, c](Node& self) {
                       auto& g = self.parents[0]->grad_buffer();
                       const std::vector<double> back = transposed(self.grad.data(), c, r);
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += back[i];
                     });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, "add", [](Node& self) {
    for (const NodePtr& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, "sub", [](Node& self) {
    if (self.parents[0]->requires_grad) {
      auto& g = self.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (self.parents[1]->requires_grad) {
      auto& g = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, "mul", [](Node& self) {
    const NodePtr& pa = self.parents[0];
    const NodePtr& pb = self.parents[1];
    if (pa->requires_grad) {
      auto& g = pa->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb->value[i];
    }
    if (pb->requires_grad) {
      auto& g = pb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa->value[i];
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * c;
  return make_result(a.shape(), std::move(out), {a.node()}, "scale", [c](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * c;
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  const std::size_t c = x.shape().back();
  if (bias.size() != c) {
    throw std::invalid_argument("add_bias: bias " + to_string(bias.shape()) + " does not match last axis of " +
                                to_string(x.shape()));
  }
  const std::size_t rows = x.size() / c;
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] = x[r * c + j] + bias[j];
  return make_result(x.shape(), std::move(out), {x.node(), bias.node()}, "add_bias", [rows, c](Node& self) {
    if (self.parents[0]->requires_grad) {
      auto& g = self.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (self.parents[1]->requires_grad) {
      auto& g = self.parents[1]->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[r * c + j];
    }
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  if (g_branch_hash)
    for (std::size_t i = 0; i < out.size(); ++i) BranchFingerprint::record(out[i] > 0.0 ? 2 * i + 1 : 2 * i);
  return make_result(x.shape(), std::move(out), {x.node()}, "relu", [](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (self.value[i] > 0.0) g[i] += self.grad[i];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  check_shape(shape);
  if (element_count(shape) != x.size()) {
    throw std::invalid_argument("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return make_result(std::move(shape), std::move(out), {x.node()}, "reshape", [](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) {
    throw std::invalid_argument("concat: axis " + std::to_string(axis) + " out of range for " + to_string(first));
  }
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor& t : parts) {
    const Shape& s = t.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d)
      if (d != axis && s[d] != first[d]) ok = false;
    if (!ok) {
      throw std::invalid_argument("concat: incompatible shapes " + to_string(first) + " and " + to_string(s) +
                                  " along axis " + std::to_string(axis));
    }
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  std::vector<std::size_t> chunk;  // contiguous run each part contributes per outer index
  std::size_t row = 0;
  for (const Tensor& t : parts) {
    chunk.push_back(t.size() / outer);
    row += chunk.back();
  }
  std::vector<double> out(outer * row);
  for (std::size_t o = 0; o < outer; ++o) {
    std::size_t offset = o * row;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      const auto src = parts[p].values().subspan(o * chunk[p], chunk[p]);
      std::copy(src.begin(), src.end(), out.begin() + static_cast<std::ptrdiff_t>(offset));
      offset += chunk[p];
    }
  }
  std::vector<NodePtr> parents;
  for (const Tensor& t : parts) parents.push_back(t.node());
  return make_result(std::move(out_shape), std::move(out), std::move(parents), "concat",
                     [outer, row, chunk](Node& self) {
                       std::size_t base = 0;
                       for (std::size_t p = 0; p < self.parents.size(); ++p) {
                         if (self.parents[p]->requires_grad) {
                           auto& g = self.parents[p]->grad_buffer();
                           for (std::size_t o = 0; o < outer; ++o)
                             for (std::size_t i = 0; i < chunk[p]; ++i)
                               g[o * chunk[p] + i] += self.grad[o * row + base + i];
                         }
                         base += chunk[p];
                       }
                     });
}

Tensor tile_rows(const Tensor& v, std::size_t n) {
  if (n == 0) throw std::invalid_argument("tile_rows: row count must be positive");
  const std::size_t c = v.size();
  std::vector<double> out(n * c);
  for (std::size_t r = 0; r < n; ++r) std::copy(v.values().begin(), v.values().end(), out.begin() + r * c);
  return make_result({n, c}, std::move(out), {v.node()}, "tile_rows", [n, c](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[r * c + j];
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_result({1}, {s}, {x.node()}, "sum", [](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (double& gi : g) gi += self.grad[0];
  });
}

Tensor sum_squares(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v * v;
  return make_result({1}, {s}, {x.node()}, "sum_squares", [](Node& self) {
    const NodePtr& p = self.parents[0];
    auto& g = p->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * p->value[i] * self.grad[0];
  });
}

Tensor softmax_rows(const Tensor& logits) {
  require_rank(logits, 2, "softmax_rows");
  const std::size_t n = logits.extent(0), k = logits.extent(1);
  std::vector<double> out(n * k);
  for (std::size_t r = 0; r < n; ++r) {
    const double* x = logits.values().data() + r * k;
    double* y = out.data() + r * k;
    const double m = *std::max_element(x, x + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += (y[j] = std::exp(x[j] - m));
    for (std::size_t j = 0; j < k; ++j) y[j] /= z;
  }
  return make_result({n, k}, std::move(out), {logits.node()}, "softmax_rows", [n, k](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < n; ++r) {
      const double* y = self.value.data() + r * k;
      const double* gy = self.grad.data() + r * k;
      double dot = 0.0;
      for (std::size_t j = 0; j < k; ++j) dot += gy[j] * y[j];
      for (std::size_t j = 0; j < k; ++j) g[r * k + j] += y[j] * (gy[j] - dot);
    }
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank(logits, 2, "cross_entropy");
  const std::size_t n = logits.extent(0), k = logits.extent(1);
  if (labels.size() != n) {
    throw std::invalid_argument("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(n) + " rows");
  }
  for (std::size_t r = 0; r < n; ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= k) {
      throw std::invalid_argument("cross_entropy: label " + std::to_string(labels[r]) + " at row " +
                                  std::to_string(r) + " outside class range [0, " + std::to_string(k) + ")");
    }
  }
  // Cache the softmax for the backward pass.
  std::vector<double> prob(n * k);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double* x = logits.values().data() + r * k;
    double* p = prob.data() + r * k;
    const double m = *std::max_element(x, x + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += (p[j] = std::exp(x[j] - m));
    for (std::size_t j = 0; j < k; ++j) p[j] /= z;
    total += m + std::log(z) - x[labels[r]];
  }
  std::vector<int> lab(labels.begin(), labels.end());
  return make_result({1}, {total / static_cast<double>(n)}, {logits.node()}, "cross_entropy",
                     [n, k, prob = std::move(prob), lab = std::move(lab)](Node& self) {
                       auto& g = self.parents[0]->grad_buffer();
                       const double s = self.grad[0] / static_cast<double>(n);
                       for (std::size_t r = 0; r < n; ++r) {
                         for (std::size_t j = 0; j < k; ++j) g[r * k + j] += s * prob[r * k + j];
                         g[r * k + static_cast<std::size_t>(lab[r])] -= s;
                       }
                     });
}

Tensor conv_valid(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride_h,
                  std::size_t stride_w) {
  require_rank(input, 3, "conv_valid");
  require_rank(weight, 4, "conv_valid weight");
  const std::size_t h = input.extent(0), w = input.extent(1), cin = input.extent(2);
  const std::size_t kh = weight.extent(0), kw = weight.extent(1), cout = weight.extent(3);
  if (weight.extent(2) != cin) {
    throw std::invalid_argument("conv_valid: weight " + to_string(weight.shape()) + " expects " +
                                std::to_string(weight.extent(2)) + " input channels, input is " +
                                to_string(input.shape()));
  }
  if (bias.size() != cout) {
    throw std::invalid_argument("conv_valid: bias " + to_string(bias.shape()) + " for " + std::to_string(cout) +
                                " output channels");
  }
  if (kh > h || kw > w) {
    throw std::invalid_argument("conv_valid: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                                " larger than input " + to_string(input.shape()));
  }
  const std::size_t ho = valid_output_extent(h, kh, stride_h);
  const std::size_t wo = valid_output_extent(w, kw, stride_w);
  const std::size_t patch = kh * kw * cin;
  const std::size_t positions = ho * wo;

  // im2col: one row per output position, columns ordered (dh, dw, c) to match
  // the weight layout.
  std::vector<double> cols(positions * patch);
  const double* x = input.values().data();
  for (std::size_t oh = 0; oh < ho; ++oh)
    for (std::size_t ow = 0; ow < wo; ++ow) {
      double* dst = cols.data() + (oh * wo + ow) * patch;
      for (std::size_t dh = 0; dh < kh; ++dh) {
        const double* src = x + ((oh * stride_h + dh) * w + ow * stride_w) * cin;
        std::copy(src, src + kw * cin, dst + dh * kw * cin);
      }
    }
  std::vector<double> out(positions * cout);
  for (std::size_t p = 0; p < positions; ++p)
    std::copy(bias.values().begin(), bias.values().end(), out.begin() + p * cout);
  gemm_nn(positions, patch, cout, cols.data(), weight.values().data(), out.data());

  return make_result(
      {ho, wo, cout}, std::move(out), {input.node(), weight.node(), bias.node()}, "conv_valid",
      [=, cols = std::move(cols)](Node& self) {
        const NodePtr& pin = self.parents[0];
        const NodePtr& pw = self.parents[1];
        const NodePtr& pb = self.parents[2];
        if (pw->requires_grad) gemm_tn(positions, patch, cout, cols.data(), self.grad.data(), pw->grad_buffer().data());
        if (pb->requires_grad) {
          auto& g = pb->grad_buffer();
          for (std::size_t p = 0; p < positions; ++p)
            for (std::size_t j = 0; j < cout; ++j) g[j] += self.grad[p * cout + j];
        }
        if (pin->requires_grad) {
          const std::vector<double> wt = transposed(pw->value.data(), patch, cout);
          std::vector<double> dcols(positions * patch, 0.0);
          gemm_nn(positions, cout, patch, self.grad.data(), wt.data(), dcols.data());
          auto& g = pin->grad_buffer();
          for (std::size_t oh = 0; oh < ho; ++oh)
            for (std::size_t ow = 0; ow < wo; ++ow) {
              const double* src = dcols.data() + (oh * wo + ow) * patch;
              for (std::size_t dh = 0; dh < kh; ++dh) {
                double* dst = g.data() + ((oh * stride_h + dh) * w + ow * stride_w) * cin;
                const double* s = src + dh * kw * cin;
                for (std::size_t i = 0; i < kw * cin; ++i) dst[i] += s[i];
              }
            }
        }
      });
}

Tensor maxpool(const Tensor& input, std::size_t pool_h, std::size_t pool_w, std::size_t stride_h,
               std::size_t stride_w) {
  require_rank(input, 3, "maxpool");
  const std::size_t h = input.extent(0), w = input.extent(1), c = input.extent(2);
  if (pool_h > h || pool_w > w) {
    throw std::invalid_argument("maxpool: window " + std::to_string(pool_h) + "x" + std::to_string(pool_w) +
                                " larger than input " + to_string(input.shape()));
  }
  const std::size_t ho = valid_output_extent(h, pool_h, stride_h);
  const std::size_t wo = valid_output_extent(w, pool_w, stride_w);
  std::vector<double> out(ho * wo * c);
  std::vector<std::size_t> argmax(out.size());
  const double* x = input.values().data();
  for (std::size_t oh = 0; oh < ho; ++oh)
    for (std::size_t ow = 0; ow < wo; ++ow) {
      double* best = out.data() + (oh * wo + ow) * c;
      std::size_t* where = argmax.data() + (oh * wo + ow) * c;
      const std::size_t origin = (oh * stride_h * w + ow * stride_w) * c;
      std::copy(x + origin, x + origin + c, best);
      for (std::size_t ch = 0; ch < c; ++ch) where[ch] = origin + ch;
      for (std::size_t dh = 0; dh < pool_h; ++dh)
        for (std::size_t dw = 0; dw < pool_w; ++dw) {
          const std::size_t base = ((oh * stride_h + dh) * w + ow * stride_w + dw) * c;
          for (std::size_t ch = 0; ch < c; ++ch) {
            if (x[base + ch] > best[ch]) {
              best[ch] = x[base + ch];
              where[ch] = base + ch;
            }
          }
        }
    }
  if (g_branch_hash)
    for (std::size_t where : argmax) BranchFingerprint::record(where);
  return make_result({ho, wo, c}, std::move(out), {input.node()}, "maxpool",
                     [argmax = std::move(argmax)](Node& self) {
                       auto& g = self.parents[0]->grad_buffer();
                       for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += self.grad[i];
                     });
}

}  // namespace ipcnet::ad
