#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ipcnet/adam.hpp"
#include "ipcnet/config.hpp"
#include "ipcnet/geometry.hpp"
#include "ipcnet/models.hpp"

namespace ipcnet::training {

// Config-file keys (flags use the same names with dashes):
//   model, preset, epochs, batch_size, learning_rate, beta1, beta2, epsilon,
//   lambda, seed, train_fraction, points, strict_holdout
struct TrainConfig {
  model::ModelKind model = model::ModelKind::PointNet;
  std::string preset = "paper";
  std::size_t epochs = 150;
  std::size_t batch_size = 8;
  AdamHyper adam;
  double lambda = 0.001;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  std::size_t points = 2048;
  // Keep the last epoch's weights instead of the best-test-accuracy ones.
  bool strict_holdout = false;

  static const std::vector<std::string>& keys();
  // Rejects unknown keys and out-of-range values with ConfigError.
  static TrainConfig from_key_values(const KeyValues& kv, const TrainConfig& defaults);
  static TrainConfig from_key_values(const KeyValues& kv);
  KeyValues to_key_values() const;
  void validate() const;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Fisher-Yates shuffle of 0..n-1 driven by `seed`; the first round(f * n)
// indices train, the rest test.
Split split_indices(std::size_t n, double fraction, std::uint64_t seed);

std::pair<std::vector<geometry::LabeledPointCloud>, std::vector<geometry::LabeledPointCloud>> split_dataset(
    const std::vector<geometry::LabeledPointCloud>& clouds, double fraction, std::uint64_t seed);

// Means over clouds; accuracy and miou in percent.
struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  double miou = 0.0;
};

// Batch means of the per-cloud terms; total = cross_entropy + lambda * regularizer.
struct StepRecord {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  double cross_entropy = 0.0;
  double regularizer = 0.0;
  double total = 0.0;
};

struct TrainRun {
  model::ModelConfig model_config;
  std::vector<EpochMetrics> train;
  std::vector<EpochMetrics> test;
  std::vector<StepRecord> steps;
  std::vector<double> epoch_seconds;
  // 1-based epoch whose weights `model` holds.
  std::size_t selected_epoch = 0;
  std::unique_ptr<model::SegmentationModel> model;
  std::filesystem::path checkpoint;  // empty unless written
};

using EpochCallback = std::function<void(const EpochMetrics& train, const EpochMetrics& test)>;

// Splits `dataset` by (train_fraction, seed) and trains on the first part.
TrainRun train(const std::vector<geometry::LabeledPointCloud>& dataset, const TrainConfig& config,
               const EpochCallback& on_epoch = {});

// Trains on explicit sets; the test set may be empty, in which case test
// metrics are zero and the final epoch is selected.
TrainRun train_on(const std::vector<geometry::LabeledPointCloud>& train_set,
                  const std::vector<geometry::LabeledPointCloud>& test_set, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

struct CloudMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
  double miou = 0.0;
  std::vector<int> predicted;
};

struct Evaluation {
  std::vector<CloudMetrics> clouds;
  double accuracy = 0.0;
  double miou = 0.0;
  double loss = 0.0;
};

// Rejects an empty dataset and clouds whose class count differs from the
// model's.
Evaluation evaluate(const model::SegmentationModel& model, const std::vector<geometry::LabeledPointCloud>& dataset,
                    double lambda = 0.0);

// First epoch (1-based) whose test accuracy reaches `threshold`, or
// epochs + 1 when it never does.
std::size_t epochs_to_reach(const TrainRun& run, double threshold);

// `epoch,split,loss,accuracy,miou`, train row then test row per epoch.
void write_metrics_csv(const std::filesystem::path& path, const TrainRun& run);

}  // namespace ipcnet::training
