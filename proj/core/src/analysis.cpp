#include "ipcnet/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "ipcnet/mesh_io.hpp"

namespace ipcnet::analysis {

namespace fs = std::filesystem;

namespace {

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

model::ForwardResult run_forward(const model::SegmentationModel& model, const geometry::LabeledPointCloud& cloud) {
  return model.forward(model::points_tensor(cloud.points));
}

}  // namespace

double miou(std::span<const int> predicted, std::span<const int> truth, int class_count) {
  if (predicted.size() != truth.size()) {
    throw std::invalid_argument("miou: " + std::to_string(predicted.size()) + " predictions for " +
                                std::to_string(truth.size()) + " labels");
  }
  if (class_count < 1) throw std::invalid_argument("miou: class count must be positive");
  std::vector<std::size_t> inter(class_count, 0), uni(class_count, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int p = predicted[i], t = truth[i];
    if (p < 0 || p >= class_count || t < 0 || t >= class_count) {
      throw std::invalid_argument("miou: label outside [0, " + std::to_string(class_count) + ") at point " +
                                  std::to_string(i));
    }
    if (p == t) {
      ++inter[p];
      ++uni[p];
    } else {
      ++uni[p];
      ++uni[t];
    }
  }
  double total = 0.0;
  for (int c = 0; c < class_count; ++c)
    total += uni[c] == 0 ? 1.0 : static_cast<double>(inter[c]) / static_cast<double>(uni[c]);
  return 100.0 * total / class_count;
}

double point_accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size() || truth.empty()) {
    throw std::invalid_argument("point_accuracy: need equal, non-empty label arrays");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return 100.0 * static_cast<double>(hits) / static_cast<double>(truth.size());
}

std::vector<int> argmax_rows(const ad::Tensor& logits) {
  if (logits.rank() != 2) throw std::invalid_argument("argmax_rows: expected a matrix");
  const std::size_t n = logits.extent(0), k = logits.extent(1);
  std::vector<int> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = logits.values().subspan(r * k, k);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

std::size_t KernelActivationMap::active_count() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](double v) { return v > 0.0; }));
}

std::vector<std::string> per_point_layers(const model::SegmentationModel& model, const geometry::LabeledPointCloud& cloud) {
  const auto trace = run_forward(model, cloud);
  std::vector<std::string> out;
  for (const auto& a : trace.activations)
    if (a.value.rank() == 2 && a.value.extent(0) == cloud.size()) out.push_back(a.layer);
  return out;
}

KernelActivationMap kernel_activation_map(const model::SegmentationModel& model, const geometry::LabeledPointCloud& cloud,
                                          const std::string& layer, std::size_t kernel) {
  const auto trace = run_forward(model, cloud);
  const ad::Tensor* act = trace.activation(layer);
  if (!act) throw std::invalid_argument("kernel_activation_map: unknown layer '" + layer + "'");
  if (act->rank() != 2 || act->extent(0) != cloud.size()) {
    throw std::invalid_argument("kernel_activation_map: layer '" + layer + "' does not have one row per point");
  }
  const std::size_t c = act->extent(1);
  if (kernel >= c) {
    throw std::invalid_argument("kernel_activation_map: layer '" + layer + "' has " + std::to_string(c) +
                                " kernels, asked for " + std::to_string(kernel));
  }
  KernelActivationMap map;
  map.layer = layer;
  map.kernel = kernel;
  map.points = cloud.points;
  map.values.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) map.values.push_back((*act)[i * c + kernel]);
  return map;
}

Axis parse_axis(char c) {
  switch (c) {
    case 'x': case 'X': return Axis::X;
    case 'y': case 'Y': return Axis::Y;
    case 'z': case 'Z': return Axis::Z;
    default: throw std::invalid_argument(std::string("unknown axis '") + c + "'");
  }
}

char axis_name(Axis a) { return "xyz"[static_cast<int>(a)]; }

FieldViewProjection field_view_projection(const KernelActivationMap& map, Axis first, Axis second) {
  if (first == second) throw std::invalid_argument("field_view_projection: axes must differ");
  FieldViewProjection out;
  out.first = first;
  out.second = second;
  out.rows.reserve(map.points.size());
  for (std::size_t i = 0; i < map.points.size(); ++i) {
    const auto& p = map.points[i];
    out.rows.push_back({p[static_cast<int>(first)], p[static_cast<int>(second)], map.values[i]});
  }
  return out;
}

RedundancyHeatmap redundancy_heatmap(const ad::Tensor& weight) {
  const std::size_t k = weight.shape().back();
  if (k < 2) throw std::invalid_argument("redundancy_heatmap: layer needs at least 2 kernels, has " + std::to_string(k));
  const std::size_t len = weight.size() / k;
  const auto w = weight.values();
  std::vector<double> dist(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      double s = 0.0;
      for (std::size_t e = 0; e < len; ++e) {
        const double d = w[e * k + i] - w[e * k + j];
        s += d * d;
      }
      dist[i * k + j] = dist[j * k + i] = std::sqrt(s);
    }
  std::vector<double> row_sum(k, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) row_sum[i] += dist[i * k + j];

  RedundancyHeatmap hm;
  hm.kernels = k;
  hm.order.resize(k);
  std::iota(hm.order.begin(), hm.order.end(), 0);
  std::stable_sort(hm.order.begin(), hm.order.end(), [&](std::size_t a, std::size_t b) { return row_sum[a] < row_sum[b]; });
  hm.distances.resize(k * k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) hm.distances[i * k + j] = dist[hm.order[i] * k + hm.order[j]];
  return hm;
}

RedundancyHeatmap redundancy_heatmap(const model::SegmentationModel& model, const std::string& layer) {
  const ad::Tensor* w = model.layer_weight(layer);
  if (!w) throw std::invalid_argument("redundancy_heatmap: unknown layer '" + layer + "'");
  return redundancy_heatmap(*w);
}

double redundancy_score(const RedundancyHeatmap& heatmap) {
  const std::size_t k = heatmap.kernels;
  if (k < 2) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      if (i != j) s += heatmap.at(i, j);
  return s / static_cast<double>(k * k - k);
}

void write_activation_csv(const fs::path& path, const KernelActivationMap& map) {
  auto out = open_output(path);
  out << "x,y,z,activation\n";
  for (std::size_t i = 0; i < map.points.size(); ++i) {
    const auto& p = map.points[i];
    out << io::format_real(p[0]) << ',' << io::format_real(p[1]) << ',' << io::format_real(p[2]) << ','
        << io::format_real(map.values[i]) << '\n';
  }
}

void write_projection_csv(const fs::path& path, const FieldViewProjection& projection) {
  auto out = open_output(path);
  out << axis_name(projection.first) << ',' << axis_name(projection.second) << ",activation\n";
  for (const auto& r : projection.rows)
    out << io::format_real(r[0]) << ',' << io::format_real(r[1]) << ',' << io::format_real(r[2]) << '\n';
}

void write_heatmap_csv(const fs::path& path, const RedundancyHeatmap& heatmap) {
  auto out = open_output(path);
  for (std::size_t i = 0; i < heatmap.kernels; ++i) {
    for (std::size_t j = 0; j < heatmap.kernels; ++j) {
      if (j) out << ',';
      out << io::format_real(heatmap.at(i, j));
    }
    out << '\n';
  }
}

void write_permutation_csv(const fs::path& path, const RedundancyHeatmap& heatmap) {
  auto out = open_output(path);
  for (std::size_t i = 0; i < heatmap.order.size(); ++i) {
    if (i) out << ',';
    out << heatmap.order[i];
  }
  out << '\n';
}

void write_heatmap_pgm(const fs::path& path, const RedundancyHeatmap& heatmap) {
  auto out = open_output(path);
  const auto [lo_it, hi_it] = std::minmax_element(heatmap.distances.begin(), heatmap.distances.end());
  const double lo = *lo_it, hi = *hi_it;
  out << "P5\n" << heatmap.kernels << ' ' << heatmap.kernels << "\n255\n";
  for (double d : heatmap.distances) {
    const double t = hi > lo ? (d - lo) / (hi - lo) : 0.0;
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * (1.0 - t)))));
  }
}

}  // namespace ipcnet::analysis
