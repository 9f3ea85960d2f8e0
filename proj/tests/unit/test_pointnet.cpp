#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "grad_suite.hpp"
#include "ipcnet/pointnet.hpp"
#include "oracles.hpp"

using namespace ipcnet;
using ad::Tensor;
using model::PointNetSegModel;

namespace {

std::vector<std::size_t> permutation(std::size_t n, CounterRng& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n - 1; i > 0; --i) std::swap(p[i], p[rng.below(i + 1)]);
  return p;
}

Tensor permute_rows(const Tensor& t, const std::vector<std::size_t>& p) {
  const std::size_t cols = t.size() / t.extent(0);
  std::vector<double> v(t.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    std::copy_n(t.values().begin() + static_cast<std::ptrdiff_t>(p[i] * cols), cols, v.begin() + static_cast<std::ptrdiff_t>(i * cols));
  return Tensor(t.shape(), std::move(v));
}

std::vector<double> as_vector(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST(Config, PaperWidthsConcatenateTo1088) {
  model::PointNetConfig c;
  c.num_classes = 4;
  PointNetSegModel m(c, 1);
  EXPECT_EQ(c.local_width(), 64u);
  EXPECT_EQ(c.global_width(), 1024u);
  EXPECT_EQ(m.head_input_width(), 1088u);
}

TEST(Transforms, UntrainedTNetIsIdentity) {
  PointNetSegModel m(grad_suite::tiny_pointnet(3), 2);
  CounterRng rng(1);
  const Tensor pts = oracle::random_tensor({20, 3}, rng);
  const auto [mat, out] = model::input_transform(pts, m.input_tnet());
  EXPECT_EQ(as_vector(mat), as_vector(Tensor::eye(3)));
  EXPECT_EQ(as_vector(out), as_vector(pts));
  const Tensor feats = oracle::random_tensor({20, 8}, rng);
  const auto [a, fout] = model::feature_transform(feats, m.feature_tnet());
  EXPECT_EQ(as_vector(a), as_vector(Tensor::eye(8)));
  EXPECT_EQ(as_vector(fout), as_vector(feats));
}

TEST(Transforms, FeatureTransformIsIdentityAt64) {
  model::PointNetConfig c = grad_suite::tiny_pointnet(3);
  c.trunk = {64, 64, 64, 128, 64};
  PointNetSegModel m(c, 3);
  CounterRng rng(2);
  const Tensor feats = oracle::random_tensor({10, 64}, rng);
  const auto [a, out] = model::feature_transform(feats, m.feature_tnet());
  EXPECT_EQ(a.shape(), (ad::Shape{64, 64}));
  EXPECT_EQ(as_vector(a), as_vector(Tensor::eye(64)));
  EXPECT_EQ(as_vector(out), as_vector(feats));
}

TEST(Transforms, MatrixPermutationInvariantAndAppliedByMatmul) {
  PointNetSegModel m(grad_suite::tiny_pointnet(3), 4);
  CounterRng rng(3);
  grad_suite::jitter(m, rng, 0.2);
  const Tensor pts = oracle::random_tensor({30, 3}, rng);
  const auto [mat, out] = model::input_transform(pts, m.input_tnet());
  const auto want = oracle::matmul(as_vector(pts), as_vector(mat), 30, 3, 3);
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(out[i], want[i], 1e-12);
  for (int t = 0; t < 10; ++t) {
    const auto p = permutation(30, rng);
    const auto [mat_p, out_p] = model::input_transform(permute_rows(pts, p), m.input_tnet());
    EXPECT_EQ(as_vector(mat_p), as_vector(mat));
  }
  const Tensor feats = oracle::random_tensor({30, 8}, rng);
  const auto [a, fout] = model::feature_transform(feats, m.feature_tnet());
  const auto fwant = oracle::matmul(as_vector(feats), as_vector(a), 30, 8, 8);
  for (std::size_t i = 0; i < fwant.size(); ++i) EXPECT_NEAR(fout[i], fwant[i], 1e-12);
  const auto p = permutation(30, rng);
  EXPECT_EQ(as_vector(model::feature_transform(permute_rows(feats, p), m.feature_tnet()).first), as_vector(a));
}

TEST(Regularizer, Examples) {
  EXPECT_EQ(model::l_reg(Tensor::eye(3)).item(), 0.0);
  EXPECT_EQ(model::l_reg(Tensor::eye(64)).item(), 0.0);
  EXPECT_EQ(model::l_reg(ad::scale(Tensor::eye(3), 2.0)).item(), 27.0);
  EXPECT_THROW(model::l_reg(Tensor::zeros({2, 3})), std::invalid_argument);
}

TEST(Regularizer, RotationsVanishAndValuesNonNegative) {
  CounterRng rng(4);
  for (int i = 0; i < 100; ++i) {
    const auto r = oracle::axis_angle({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)},
                                      rng.uniform(-M_PI, M_PI));
    EXPECT_LT(model::l_reg(Tensor({3, 3}, r)).item(), 1e-9);
    EXPECT_GE(model::l_reg(oracle::random_tensor({4, 4}, rng, -2, 2)).item(), 0.0);
  }
}

TEST(GlobalFeature, Examples) {
  CounterRng rng(5);
  const Tensor one = oracle::random_tensor({1, 16}, rng);
  EXPECT_EQ(as_vector(model::global_feature(one)), as_vector(one));

  const Tensor feats = oracle::random_tensor({12, 16}, rng);
  std::vector<double> doubled = as_vector(feats);
  doubled.insert(doubled.end(), doubled.begin(), doubled.end());
  EXPECT_EQ(as_vector(model::global_feature(Tensor({24, 16}, doubled))), as_vector(model::global_feature(feats)));

  const auto want = oracle::maxpool(as_vector(feats), 12, 1, 16, 12, 1, 1, 1);
  const auto got = as_vector(model::global_feature(feats));
  EXPECT_EQ(got, want);
  for (int t = 0; t < 100; ++t) EXPECT_EQ(as_vector(model::global_feature(permute_rows(feats, permutation(12, rng)))), got);
}

TEST(Segment, IdenticalPointsGiveIdenticalRows) {
  PointNetSegModel m(grad_suite::tiny_pointnet(3), 6);
  CounterRng rng(6);
  grad_suite::jitter(m, rng, 0.1);
  std::vector<double> v = as_vector(oracle::random_tensor({10, 3}, rng));
  std::copy_n(v.begin(), 3, v.begin() + 21);  // row 7 duplicates row 0
  const Tensor logits = m.forward(Tensor({10, 3}, v)).logits;
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(logits[j], logits[7 * 3 + j]);
}

TEST(Segment, PermutationEquivariantBitwise) {
  PointNetSegModel m(grad_suite::tiny_pointnet(4), 7);
  CounterRng rng(7);
  grad_suite::jitter(m, rng, 0.1);
  const Tensor pts = oracle::random_tensor({64, 3}, rng);
  const Tensor logits = m.forward(pts).logits;
  for (int t = 0; t < 10; ++t) {
    const auto p = permutation(64, rng);
    EXPECT_EQ(as_vector(m.forward(permute_rows(pts, p)).logits), as_vector(permute_rows(logits, p)));
  }
}

TEST(Segment, UntrainedLogitsFinite) {
  model::PointNetConfig c;
  c.num_classes = 3;
  c.trunk = {64, 64, 64, 128, 256};
  PointNetSegModel m(c, 8);
  CounterRng rng(8);
  const auto fr = m.forward(oracle::random_tensor({40, 3}, rng));
  EXPECT_EQ(fr.logits.shape(), (ad::Shape{40, 3}));
  for (double v : fr.logits.values()) EXPECT_TRUE(std::isfinite(v));
  ASSERT_TRUE(fr.feature_matrix.has_value());
  EXPECT_EQ(model::l_reg(*fr.feature_matrix).item(), 0.0);
}

TEST(Segment, IdentityTNetsMatchAblatedNetwork) {
  const model::PointNetConfig with = grad_suite::tiny_pointnet(3);
  model::PointNetConfig without = with;
  without.input_transform = false;
  without.feature_transform = false;
  PointNetSegModel a(with, 9), b(without, 10);
  for (auto& p : b.parameters()) {
    const Tensor* src = a.find_parameter(p.name);
    ASSERT_NE(src, nullptr) << p.name;
    std::copy(src->values().begin(), src->values().end(), p.tensor.mutable_values().begin());
  }
  CounterRng rng(9);
  const Tensor pts = oracle::random_tensor({25, 3}, rng);
  const Tensor la = a.forward(pts).logits, lb = b.forward(pts).logits;
  for (std::size_t i = 0; i < la.size(); ++i) EXPECT_NEAR(la[i], lb[i], 1e-12);
  EXPECT_FALSE(b.forward(pts).feature_matrix.has_value());
}

TEST(Segment, ActivationsRecordedPerLayer) {
  PointNetSegModel m(grad_suite::tiny_pointnet(3), 11);
  CounterRng rng(10);
  const auto fr = m.forward(oracle::random_tensor({12, 3}, rng));
  for (const char* name : {"trunk.0", "trunk.1", "local", "trunk.4", "head.0", "head.out"}) {
    const Tensor* t = fr.activation(name);
    ASSERT_NE(t, nullptr) << name;
    EXPECT_EQ(t->extent(0), 12u) << name;
  }
  EXPECT_EQ(fr.activation("nope"), nullptr);
}

TEST(Segment, RejectsBadInputShape) {
  PointNetSegModel m(grad_suite::tiny_pointnet(3), 12);
  EXPECT_THROW(m.forward(Tensor::zeros({5, 2})), std::invalid_argument);
}
