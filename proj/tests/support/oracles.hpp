#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Nothing here calls into the library's numeric kernels.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <numeric>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "ipcnet/rng.hpp"
#include "ipcnet/tensor.hpp"

namespace oracle {

using ipcnet::CounterRng;
using ipcnet::ad::Shape;
using ipcnet::ad::Tensor;

inline Tensor random_tensor(Shape shape, CounterRng& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = false) {
  std::vector<double> v(ipcnet::ad::element_count(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

// [m x k] . [k x n], textbook triple loop.
inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t m,
                                  std::size_t k, std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
  return c;
}

// Direct sliding-window cross-correlation over H x W x Cin with a
// kh x kw x Cin x Cout kernel.
inline std::vector<double> conv(const std::vector<double>& in, std::size_t h, std::size_t w, std::size_t cin,
                                const std::vector<double>& wt, std::size_t kh, std::size_t kw, std::size_t cout,
                                const std::vector<double>& bias, std::size_t sh, std::size_t sw) {
  const std::size_t oh = (h - kh) / sh + 1, ow = (w - kw) / sw + 1;
  std::vector<double> out(oh * ow * cout);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x)
      for (std::size_t o = 0; o < cout; ++o) {
        double s = bias[o];
        for (std::size_t dy = 0; dy < kh; ++dy)
          for (std::size_t dx = 0; dx < kw; ++dx)
            for (std::size_t c = 0; c < cin; ++c)
              s += in[((y * sh + dy) * w + (x * sw + dx)) * cin + c] * wt[((dy * kw + dx) * cin + c) * cout + o];
        out[(y * ow + x) * cout + o] = s;
      }
  return out;
}

// Per-block scan for the maximum.
inline std::vector<double> maxpool(const std::vector<double>& in, std::size_t h, std::size_t w, std::size_t c,
                                   std::size_t ph, std::size_t pw, std::size_t sh, std::size_t sw) {
  const std::size_t oh = (h - ph) / sh + 1, ow = (w - pw) / sw + 1;
  std::vector<double> out(oh * ow * c);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) {
        double m = -INFINITY;
        for (std::size_t dy = 0; dy < ph; ++dy)
          for (std::size_t dx = 0; dx < pw; ++dx) m = std::max(m, in[((y * sh + dy) * w + x * sw + dx) * c + ch]);
        out[(y * ow + x) * c + ch] = m;
      }
  return out;
}

// Mean over rows of log(sum exp(row)) - row[label].
inline double cross_entropy(const std::vector<double>& logits, std::size_t rows, std::size_t k,
                            const std::vector<int>& labels) {
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = logits.data() + r * k;
    const double m = *std::max_element(row, row + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(row[j] - m);
    total += m + std::log(s) - row[labels[r]];
  }
  return total / static_cast<double>(rows);
}

// Rotation by `angle` about the (normalised) axis, Rodrigues' formula.
inline std::vector<double> axis_angle(std::array<double, 3> axis, double angle) {
  const double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  const double x = axis[0] / n, y = axis[1] / n, z = axis[2] / n;
  const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  return {t * x * x + c,     t * x * y - s * z, t * x * z + s * y,  //
          t * x * y + s * z, t * y * y + c,     t * y * z - s * x,  //
          t * x * z - s * y, t * y * z + s * x, t * z * z + c};
}

// K x K Euclidean distances between the columns of a rows x K matrix.
inline std::vector<double> pairwise_column_distances(const std::vector<double>& w, std::size_t rows,
                                                     std::size_t k) {
  std::vector<double> d(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < rows; ++r) {
        const double diff = w[r * k + i] - w[r * k + j];
        s += diff * diff;
      }
      d[i * k + j] = std::sqrt(s);
    }
  return d;
}

// Upper-tail probability of Pearson's statistic with `dof` degrees of freedom.
inline double chi_square_p(const std::vector<double>& observed, const std::vector<double>& expected) {
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double d = observed[i] - expected[i];
    stat += d * d / expected[i];
  }
  const double dof = static_cast<double>(observed.size() - 1);
  return boost::math::gamma_q(dof / 2.0, stat / 2.0);
}

// ---- finite differences ---------------------------------------------------

inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  const double scale = std::max({std::fabs(analytic), std::fabs(numeric), floor});
  return std::fabs(analytic - numeric) / scale;
}

// Central difference of `loss` with respect to element `index` of `leaf`,
// step h. The leaf value is restored afterwards.
inline double central_difference(const std::function<double()>& loss, Tensor& leaf, std::size_t index,
                                 double h = 1e-5) {
  auto v = leaf.mutable_values();
  const double saved = v[index];
  v[index] = saved + h;
  const double up = loss();
  v[index] = saved - h;
  const double down = loss();
  v[index] = saved;
  return (up - down) / (2.0 * h);
}

struct GradCheck {
  std::size_t checked = 0;
  // Coordinates whose stencil crossed a ReLU or max-pool branch change; the
  // function is not differentiable across them, so they are not compared.
  std::size_t straddled = 0;
  double worst = 0.0;
  bool passed(double tolerance = 1e-4) const { return checked > 0 && worst <= tolerance; }
};

// Analytic gradients of one loss graph, compared coordinate by coordinate
// with central differences taken on the same linear piece.
class GradProbe {
 public:
  GradProbe(std::function<Tensor()> build, std::vector<Tensor> leaves)
      : build_(std::move(build)), leaves_(std::move(leaves)) {
    for (Tensor& t : leaves_) t.zero_grad();
    build_().backward();
    for (const Tensor& t : leaves_) {
      std::vector<double> g(t.size(), 0.0);
      if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), g.begin());
      analytic_.push_back(std::move(g));
    }
    base_ = fingerprint();
  }

  std::size_t leaf_count() const { return leaves_.size(); }
  std::size_t leaf_size(std::size_t l) const { return leaves_[l].size(); }

  // Relative error at element i of leaf l, or nullopt when x - h or x + h
  // lies on a different linear piece than x.
  std::optional<double> error(std::size_t l, std::size_t i, double h = 1e-5) {
    Tensor& leaf = leaves_[l];
    auto v = leaf.mutable_values();
    const double saved = v[i];
    v[i] = saved + h;
    const auto [up, up_print] = evaluate();
    v[i] = saved - h;
    const auto [down, down_print] = evaluate();
    v[i] = saved;
    if (up_print != base_ || down_print != base_) return std::nullopt;
    return relative_error(analytic_[l][i], (up - down) / (2.0 * h));
  }

  void probe(std::size_t l, std::size_t i, GradCheck& into) {
    const auto e = error(l, i);
    if (!e) {
      ++into.straddled;
      return;
    }
    into.worst = std::max(into.worst, *e);
    ++into.checked;
  }

 private:
  std::pair<double, std::uint64_t> evaluate() {
    ipcnet::ad::NoGradScope no_grad;
    ipcnet::ad::BranchFingerprint print;
    const double value = build_().item();
    return {value, print.value()};
  }
  std::uint64_t fingerprint() { return evaluate().second; }

  std::function<Tensor()> build_;
  std::vector<Tensor> leaves_;
  std::vector<std::vector<double>> analytic_;
  std::uint64_t base_ = 0;
};

// Compares d(loss)/d(leaf) from backward() with central differences for the
// listed element indices of each leaf (all elements when `indices` is empty).
inline GradCheck check_gradients(const std::function<Tensor()>& build, std::vector<Tensor> leaves,
                                 const std::vector<std::vector<std::size_t>>& indices = {}) {
  GradProbe probe(build, std::move(leaves));
  GradCheck r;
  for (std::size_t l = 0; l < probe.leaf_count(); ++l) {
    if (indices.empty() || indices[l].empty()) {
      for (std::size_t i = 0; i < probe.leaf_size(l); ++i) probe.probe(l, i, r);
    } else {
      for (std::size_t i : indices[l]) probe.probe(l, i, r);
    }
  }
  return r;
}

}  // namespace oracle
