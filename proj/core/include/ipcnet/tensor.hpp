#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// 64-bit tensors. Tensors are shared handles: copying a Tensor aliases the
// same storage, as in most autograd libraries. Every op records its parents
// and a backward closure when at least one input tracks gradients; the
// graph is released with the last handle referring to its output.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ipcnet::ad {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something flows into it
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads self.grad and accumulates into the tracked parents.
  std::function<void(Node& self)> backward;

  std::vector<double>& grad_buffer();
};

}  // namespace detail

class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor eye(std::size_t d);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t extent(std::size_t axis) const;
  std::size_t size() const { return node_->value.size(); }

  std::span<const double> values() const { return node_->value; }
  // Direct write access; intended for leaves (optimizer updates, probes).
  std::span<double> mutable_values() { return node_->value; }
  double operator[](std::size_t i) const { return node_->value[i]; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  // Empty span when no gradient has reached this tensor.
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad.clear(); }

  const char* op_name() const { return node_->op; }
  bool is_leaf() const { return node_->parents.empty(); }

  // Fresh leaf holding a copy of the values; no graph, no gradient.
  Tensor detach() const;

  // Seeds d(self)/d(self) = 1 and accumulates gradients into every tracked
  // leaf reachable from this scalar. Gradients add up across calls until
  // zero_grad().
  void backward() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Ordered record of the operations reachable from a root. order() is a
// topological order (parents before children), so the backward sweep walks
// it in reverse.
class DiffGraph {
 public:
  explicit DiffGraph(const Tensor& root);

  const std::vector<detail::Node*>& order() const { return order_; }
  std::vector<detail::Node*> leaves() const;
  void run_backward();

 private:
  std::vector<detail::Node*> order_;
};

// While alive, ops on this thread record no graph (outputs never track
// gradients). Nests; used for evaluation passes.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

  static bool active();

 private:
  bool previous_;
};

// While alive, folds every branch taken by a piecewise-linear op on this
// thread (ReLU sign, max-pool winner) into a running hash. Two evaluations
// with equal fingerprints lie on the same linear piece, which is what a
// finite-difference stencil needs. Does not nest.
class BranchFingerprint {
 public:
  BranchFingerprint();
  ~BranchFingerprint();
  BranchFingerprint(const BranchFingerprint&) = delete;
  BranchFingerprint& operator=(const BranchFingerprint&) = delete;

  std::uint64_t value() const { return hash_; }
  static void record(std::uint64_t branch);

 private:
  std::uint64_t hash_;
};

// ---- primitives -----------------------------------------------------------

// [m x k] . [k x n]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
// x[..., C] + bias[C], broadcast over every leading index.
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor relu(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
// Repeats a vector of C entries as n identical rows: n x C.
Tensor tile_rows(const Tensor& v, std::size_t n);

Tensor sum(const Tensor& x);
Tensor sum_squares(const Tensor& x);

Tensor softmax_rows(const Tensor& logits);
// Mean over rows of -log softmax(logits)[row, label[row]].
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

// Valid (unpadded) cross-correlation. input H x W x Cin, weight
// kh x kw x Cin x Cout, bias Cout. Output extents floor((H - kh)/sh) + 1 and
// floor((W - kw)/sw) + 1.
Tensor conv_valid(const Tensor& input, const Tensor& weight, const Tensor& bias,
                  std::size_t stride_h, std::size_t stride_w);

// Per-window, per-channel maximum over an H x W x C input. The gradient goes
// to the first maximal element of each window in row-major order.
Tensor maxpool(const Tensor& input, std::size_t pool_h, std::size_t pool_w,
               std::size_t stride_h, std::size_t stride_w);

// floor((extent - window) / stride) + 1, rejecting windows that do not fit.
std::size_t valid_output_extent(std::size_t extent, std::size_t window, std::size_t stride);

}  // namespace ipcnet::ad
