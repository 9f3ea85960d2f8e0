#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "grad_suite.hpp"
#include "ipcnet/analysis.hpp"
#include "ipcnet/models.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace ipcnet;
using analysis::Axis;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ipcnet_analysis_test";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

geometry::LabeledPointCloud random_cloud(std::size_t n, int k, CounterRng& rng) {
  geometry::LabeledPointCloud c;
  c.class_count = k;
  for (std::size_t i = 0; i < n; ++i) {
    c.points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    c.labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(k))));
  }
  return c;
}

// Per-class IoU straight from set definitions.
double miou_oracle(const std::vector<int>& p, const std::vector<int>& t, int k) {
  double total = 0.0;
  for (int c = 0; c < k; ++c) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      inter += p[i] == c && t[i] == c;
      uni += p[i] == c || t[i] == c;
    }
    total += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  }
  return 100.0 * total / k;
}

}  // namespace

TEST(Miou, HandExamples) {
  const std::vector<int> t{0, 0, 1, 1};
  EXPECT_EQ(analysis::miou(t, t, 2), 100.0);
  EXPECT_EQ(analysis::miou(std::vector<int>{1, 1, 0, 0}, t, 2), 0.0);
  EXPECT_NEAR(analysis::miou(std::vector<int>{0, 0, 0, 1}, t, 2), 175.0 / 3.0, 1e-12);
  EXPECT_NEAR(analysis::miou(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 1, 1, 1}, 2), 58.33, 0.01);
  EXPECT_NEAR(analysis::miou(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 1, 1, 1}, 2),
              100.0 * (1.0 / 2.0 + 2.0 / 3.0) / 2.0, 1e-12);
}

TEST(Miou, AbsentClassScoresOne) {
  const std::vector<int> t{0, 0, 1, 1};
  EXPECT_EQ(analysis::miou(t, t, 3), 100.0);
  EXPECT_NEAR(analysis::miou(std::vector<int>{0, 0, 0, 1}, t, 3), 100.0 * (2.0 / 3.0 + 0.5 + 1.0) / 3.0, 1e-12);
}

TEST(Miou, MatchesOracleAndBounds) {
  CounterRng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 1 + static_cast<int>(rng.below(6));
    const std::size_t n = 1 + rng.below(50);
    std::vector<int> p(n), t(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = static_cast<int>(rng.below(k));
      t[i] = static_cast<int>(rng.below(k));
    }
    const double m = analysis::miou(p, t, k);
    EXPECT_NEAR(m, miou_oracle(p, t, k), 1e-12);
    EXPECT_GE(m, 0.0);
    EXPECT_LE(m, 100.0);
    EXPECT_NEAR(analysis::miou(t, p, k), m, 1e-12);  // symmetric in its arguments
    EXPECT_EQ(analysis::miou(t, t, k), 100.0);
  }
}

TEST(Miou, Errors) {
  EXPECT_THROW(analysis::miou(std::vector<int>{0}, std::vector<int>{0, 1}, 2), std::invalid_argument);
  EXPECT_THROW(analysis::miou(std::vector<int>{2}, std::vector<int>{0}, 2), std::invalid_argument);
  EXPECT_THROW(analysis::miou(std::vector<int>{0}, std::vector<int>{0}, 0), std::invalid_argument);
}

TEST(Accuracy, ExamplesAndConstantPrediction) {
  EXPECT_EQ(analysis::point_accuracy(std::vector<int>{0, 1, 1, 0}, std::vector<int>{0, 1, 0, 0}), 75.0);
  std::vector<int> half(1000);
  for (std::size_t i = 0; i < half.size(); ++i) half[i] = static_cast<int>(i % 2);
  EXPECT_EQ(analysis::point_accuracy(std::vector<int>(1000, 0), half), 50.0);
  EXPECT_THROW(analysis::point_accuracy(std::vector<int>{}, std::vector<int>{}), std::invalid_argument);
}

TEST(Argmax, FirstOnTies) {
  const ad::Tensor t({3, 3}, {1, 3, 3, -1, -2, -1, 0, 0, 5});
  EXPECT_EQ(analysis::argmax_rows(t), (std::vector<int>{1, 0, 2}));
}

TEST(ActivationMap, MatchesTraceColumn) {
  const auto m = model::build_model(grad_suite::tiny_model(model::ModelKind::PointNet, 40, 3), 2);
  CounterRng rng(2);
  const auto cloud = random_cloud(40, 3, rng);
  const auto trace = m->forward(model::points_tensor(cloud.points));
  const ad::Tensor* t0 = trace.activation("trunk.0");
  ASSERT_NE(t0, nullptr);
  for (std::size_t k : {std::size_t{0}, std::size_t{5}, std::size_t{7}}) {
    const auto map = analysis::kernel_activation_map(*m, cloud, "trunk.0", k);
    ASSERT_EQ(map.values.size(), 40u);
    for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(map.values[i], (*t0)[i * 8 + k]);
    EXPECT_EQ(map.points, cloud.points);
    std::size_t active = 0;
    for (double v : map.values) {
      EXPECT_GE(v, 0.0);  // post-ReLU
      active += v > 0.0;
    }
    EXPECT_EQ(map.active_count(), active);
  }
}

TEST(ActivationMap, Errors) {
  const auto m = model::build_model(grad_suite::tiny_model(model::ModelKind::IPCNet, 64, 3), 3);
  CounterRng rng(3);
  const auto cloud = random_cloud(64, 3, rng);
  EXPECT_THROW(analysis::kernel_activation_map(*m, cloud, "nope", 0), std::invalid_argument);
  EXPECT_THROW(analysis::kernel_activation_map(*m, cloud, "trunk.0", 8), std::invalid_argument);
  EXPECT_THROW(analysis::kernel_activation_map(*m, cloud, "ipc.zero_removal", 0), std::invalid_argument);
  const auto layers = analysis::per_point_layers(*m, cloud);
  EXPECT_NE(std::find(layers.begin(), layers.end(), "trunk.0"), layers.end());
  EXPECT_NE(std::find(layers.begin(), layers.end(), "ipc.feature_extraction"), layers.end());
  EXPECT_EQ(std::find(layers.begin(), layers.end(), "ipc.downsample1"), layers.end());
}

TEST(Projection, SelectsCoordinates) {
  analysis::KernelActivationMap map;
  map.points = {{1, 2, 3}, {4, 5, 6}};
  map.values = {0.5, 0.0};
  const auto xz = analysis::field_view_projection(map, Axis::X, Axis::Z);
  ASSERT_EQ(xz.rows.size(), 2u);
  EXPECT_EQ(xz.rows[0], (std::array<double, 3>{1, 3, 0.5}));
  EXPECT_EQ(xz.rows[1], (std::array<double, 3>{4, 6, 0.0}));
  const auto zy = analysis::field_view_projection(map, Axis::Z, Axis::Y);
  EXPECT_EQ(zy.rows[1], (std::array<double, 3>{6, 5, 0.0}));
  EXPECT_THROW(analysis::field_view_projection(map, Axis::Y, Axis::Y), std::invalid_argument);
  EXPECT_EQ(analysis::parse_axis('Z'), Axis::Z);
  EXPECT_THROW(analysis::parse_axis('w'), std::invalid_argument);
}

TEST(Heatmap, MatchesPairwiseOracleUnderPermutation) {
  CounterRng rng(4);
  const ad::Tensor w = oracle::random_tensor({5, 7}, rng);
  const auto hm = analysis::redundancy_heatmap(w);
  const auto raw = oracle::pairwise_column_distances(std::vector<double>(w.values().begin(), w.values().end()), 5, 7);
  ASSERT_EQ(hm.kernels, 7u);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 7; ++j) EXPECT_NEAR(hm.at(i, j), raw[hm.order[i] * 7 + hm.order[j]], 1e-12);

  std::vector<double> sums(7, 0.0);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 7; ++j) sums[i] += hm.at(i, j);
  for (std::size_t i = 1; i < 7; ++i) EXPECT_LE(sums[i - 1], sums[i] + 1e-12);
  std::vector<std::size_t> sorted = hm.order;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> iota(7);
  std::iota(iota.begin(), iota.end(), std::size_t{0});
  EXPECT_EQ(sorted, iota);
}

TEST(Heatmap, SymmetricZeroDiagonalTriangle) {
  CounterRng rng(5);
  const ad::Tensor w = oracle::random_tensor({3, 4, 6}, rng);
  const auto hm = analysis::redundancy_heatmap(w);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(hm.at(i, i), 0.0);
    for (std::size_t j = 0; j < 6; ++j) {
      EXPECT_EQ(hm.at(i, j), hm.at(j, i));
      for (std::size_t l = 0; l < 6; ++l) EXPECT_LE(hm.at(i, l), hm.at(i, j) + hm.at(j, l) + 1e-12);
    }
  }
}

TEST(Heatmap, TiesKeepKernelOrderAndDuplicatesScoreZero) {
  const auto same = analysis::redundancy_heatmap(ad::Tensor({2, 4}, std::vector<double>(8, 0.3)));
  EXPECT_EQ(same.order, (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(analysis::redundancy_score(same), 0.0);
  // Columns e0, e1 and 0: distances sqrt2, 1, 1 give row sums 1+sqrt2, 1+sqrt2, 2.
  const auto hm = analysis::redundancy_heatmap(ad::Tensor({2, 3}, {1, 0, 0, 0, 1, 0}));
  EXPECT_EQ(hm.order, (std::vector<std::size_t>{2, 0, 1}));
  EXPECT_NEAR(analysis::redundancy_score(hm), (2.0 + 2.0 * std::sqrt(2.0) + 2.0) / 6.0, 1e-12);
  EXPECT_THROW(analysis::redundancy_heatmap(ad::Tensor({3, 1}, {1, 2, 3})), std::invalid_argument);
}

TEST(Heatmap, ModelLayerLookup) {
  const auto m = model::build_model(grad_suite::tiny_model(model::ModelKind::PointNet, 32, 3), 6);
  const auto hm = analysis::redundancy_heatmap(*m, "trunk.4");
  EXPECT_EQ(hm.kernels, 32u);
  EXPECT_GT(analysis::redundancy_score(hm), 0.0);
  EXPECT_THROW(analysis::redundancy_heatmap(*m, "trunk.9"), std::invalid_argument);
}

TEST(Writers, CsvAndPgmLayout) {
  analysis::KernelActivationMap map;
  map.layer = "trunk.0";
  map.points = {{0.1, 0.2, 0.3}};
  map.values = {0.5};
  analysis::write_activation_csv(scratch("act.csv"), map);
  EXPECT_EQ(read_lines(scratch("act.csv")),
            (std::vector<std::string>{"x,y,z,activation",
                                      "0.10000000000000001,0.20000000000000001,0.29999999999999999,0.5"}));
  analysis::write_projection_csv(scratch("proj.csv"), analysis::field_view_projection(map, Axis::Y, Axis::Z));
  EXPECT_EQ(read_lines(scratch("proj.csv"))[0], "y,z,activation");

  const auto hm = analysis::redundancy_heatmap(ad::Tensor({2, 3}, {1, 0, 0, 0, 1, 0}));
  analysis::write_heatmap_csv(scratch("hm.csv"), hm);
  const auto rows = read_lines(scratch("hm.csv"));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], "0,1,1");
  analysis::write_permutation_csv(scratch("perm.csv"), hm);
  EXPECT_EQ(read_lines(scratch("perm.csv")), std::vector<std::string>{"2,0,1"});

  analysis::write_heatmap_pgm(scratch("hm.pgm"), hm);
  std::ifstream in(scratch("hm.pgm"), std::ios::binary);
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  in.get();
  std::vector<unsigned char> px(9);
  in.read(reinterpret_cast<char*>(px.data()), 9);
  EXPECT_EQ(magic, "P5");
  EXPECT_EQ(w, 3u);
  EXPECT_EQ(h, 3u);
  EXPECT_EQ(maxval, 255u);
  ASSERT_TRUE(in);
  EXPECT_EQ(px[0], 255);  // zero distance is white
  EXPECT_EQ(px[5], 0);    // sqrt2 between kernels 0 and 1 is the largest
}
