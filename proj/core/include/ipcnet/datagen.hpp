#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ipcnet/geometry.hpp"

namespace ipcnet::datagen {

enum class Family { Rocket, Aircraft, Car, Motorbike };

Family parse_family(const std::string& name);
std::string family_name(Family f);
// Part names in label order.
const std::vector<std::string>& family_labels(Family f);
inline int family_class_count(Family f) { return static_cast<int>(family_labels(f).size()); }

struct ShapeSpec {
  Family family = Family::Rocket;
  // Overall size multiplier range and per-part proportion jitter (relative).
  double min_scale = 0.8;
  double max_scale = 1.25;
  double jitter = 0.25;
  // Every part must carry at least this share of the sampling weight.
  double min_part_fraction = 0.04;
  int max_attempts = 32;

  static ShapeSpec for_family(Family f);
};

// Procedural labelled mesh (e.g. rocket: capped cylinder body, cone nose,
// 3-4 box fins at the tail). Deterministic in `seed`; a draw that leaves a
// part under `min_part_fraction` is re-drawn up to `max_attempts` times.
geometry::TriangleMesh gen_shape(const ShapeSpec& spec, std::uint64_t seed);

// gen_shape + sample_surface + unit-sphere normalisation of the sampled
// cloud, one derived seed per cloud.
std::vector<geometry::LabeledPointCloud> gen_dataset(const ShapeSpec& spec, std::size_t count, std::size_t points,
                                                     std::uint64_t seed);

struct Dataset {
  std::string family;
  int class_count = 0;
  std::vector<std::string> names;
  std::vector<geometry::LabeledPointCloud> clouds;
};

// Layout: <root>/<family>/points/<name>.pts, <root>/<family>/labels/<name>.seg
// and <root>/manifest.txt listing one "points labels" relative path pair per
// line after a "# family=<f> classes=<k>" header.
void write_dataset(const std::filesystem::path& root, const Dataset& dataset);

// Reads the manifest when present, otherwise scans <root>/<family>/points
// with labels from labels/ or points_label/ (the annotated-ShapeNet layout).
// `label_base` is subtracted from every label (1 for 1-based label files).
// Without a manifest header the class count is the largest label + 1.
Dataset read_dataset(const std::filesystem::path& root, const std::string& family = "", int label_base = 0);

}  // namespace ipcnet::datagen
