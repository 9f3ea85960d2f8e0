#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ipcnet/geometry.hpp"
#include "ipcnet/model.hpp"

namespace ipcnet::analysis {

// Mean over classes of |pred ∩ true| / |pred ∪ true|, times 100. A class
// absent from both prediction and ground truth scores 1.
double miou(std::span<const int> predicted, std::span<const int> truth, int class_count);

// Percentage of points whose predicted label equals the true label.
double point_accuracy(std::span<const int> predicted, std::span<const int> truth);

// Index of the largest entry of every row (first on ties).
std::vector<int> argmax_rows(const ad::Tensor& logits);

struct KernelActivationMap {
  std::string layer;
  std::size_t kernel = 0;
  std::vector<double> values;               // one per point
  std::vector<geometry::Vec3> points;       // the cloud that produced them

  // Points with a strictly positive response.
  std::size_t active_count() const;
};

// Names of the layers whose activations have one row per point.
std::vector<std::string> per_point_layers(const model::SegmentationModel& model, const geometry::LabeledPointCloud& cloud);

KernelActivationMap kernel_activation_map(const model::SegmentationModel& model, const geometry::LabeledPointCloud& cloud,
                                          const std::string& layer, std::size_t kernel);

enum class Axis { X = 0, Y = 1, Z = 2 };
Axis parse_axis(char c);
char axis_name(Axis a);

struct FieldViewProjection {
  Axis first = Axis::X;
  Axis second = Axis::Y;
  // (first coordinate, second coordinate, activation) per point.
  std::vector<std::array<double, 3>> rows;
};

FieldViewProjection field_view_projection(const KernelActivationMap& map, Axis first, Axis second);

struct RedundancyHeatmap {
  std::size_t kernels = 0;
  // Row-major K x K distances, rows and columns already reordered.
  std::vector<double> distances;
  // order[i] is the original kernel index shown at position i.
  std::vector<std::size_t> order;

  double at(std::size_t i, std::size_t j) const { return distances[i * kernels + j]; }
};

// Pairwise Euclidean distances between kernel weight vectors (the slices of
// `weight` along its last axis; biases are not part of the vector), with
// rows and columns sorted by ascending row sum, ties by kernel index.
RedundancyHeatmap redundancy_heatmap(const ad::Tensor& weight);
RedundancyHeatmap redundancy_heatmap(const model::SegmentationModel& model, const std::string& layer);

// Mean off-diagonal distance.
double redundancy_score(const RedundancyHeatmap& heatmap);

void write_activation_csv(const std::filesystem::path& path, const KernelActivationMap& map);
void write_projection_csv(const std::filesystem::path& path, const FieldViewProjection& projection);
void write_heatmap_csv(const std::filesystem::path& path, const RedundancyHeatmap& heatmap);
void write_permutation_csv(const std::filesystem::path& path, const RedundancyHeatmap& heatmap);
// 8-bit binary PGM, smallest distance white, largest black.
void write_heatmap_pgm(const std::filesystem::path& path, const RedundancyHeatmap& heatmap);

}  // namespace ipcnet::analysis
