#include "ipcnet/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "ipcnet/analysis.hpp"
#include "ipcnet/mesh_io.hpp"
#include "ipcnet/pointnet.hpp"
#include "ipcnet/rng.hpp"

namespace ipcnet::training {

namespace {

using geometry::LabeledPointCloud;

constexpr std::uint64_t kSplitStream = 0x5b117;
constexpr std::uint64_t kInitTag = 1;
constexpr std::uint64_t kShuffleTag = 2;

struct LossTerms {
  ad::Tensor cross_entropy;
  ad::Tensor regularizer;
  model::ForwardResult forward;
};

LossTerms loss_terms(const model::SegmentationModel& model, const LabeledPointCloud& cloud) {
  LossTerms t;
  t.forward = model.forward(model::points_tensor(cloud.points));
  t.cross_entropy = ad::cross_entropy(t.forward.logits, cloud.labels);
  t.regularizer = t.forward.feature_matrix ? model::l_reg(*t.forward.feature_matrix) : ad::Tensor::scalar(0.0);
  return t;
}

void check_dataset(const std::vector<LabeledPointCloud>& clouds, std::size_t points, int class_count,
                   const char* role) {
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    const auto& c = clouds[i];
    c.validate();
    if (c.size() != points) {
      throw std::invalid_argument(std::string(role) + " cloud " + std::to_string(i) + " has " +
                                  std::to_string(c.size()) + " points, config expects " + std::to_string(points));
    }
    if (c.class_count != class_count) {
      throw std::invalid_argument(std::string(role) + " cloud " + std::to_string(i) + " has " +
                                  std::to_string(c.class_count) + " classes, expected " +
                                  std::to_string(class_count));
    }
  }
}

EpochMetrics to_epoch(std::size_t epoch, const Evaluation& e) { return {epoch, e.loss, e.accuracy, e.miou}; }

}  // namespace

// ---- TrainConfig ----------------------------------------------------------

const std::vector<std::string>& TrainConfig::keys() {
  static const std::vector<std::string> k = {"model", "preset", "epochs", "batch_size", "learning_rate",
                                             "beta1", "beta2", "epsilon", "lambda", "seed",
                                             "train_fraction", "points", "strict_holdout"};
  return k;
}

TrainConfig TrainConfig::from_key_values(const KeyValues& kv, const TrainConfig& defaults) {
  const auto unknown = kv.unknown_keys(keys());
  if (!unknown.empty()) throw ConfigError("unknown config key '" + unknown.front() + "'");
  TrainConfig c = defaults;
  try {
    c.model = model::parse_model_kind(kv.get_string("model", model::to_string(defaults.model)));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config key 'model': ") + e.what());
  }
  c.preset = kv.get_string("preset", defaults.preset);
  c.epochs = kv.get_uint("epochs", defaults.epochs);
  c.batch_size = kv.get_uint("batch_size", defaults.batch_size);
  c.adam.learning_rate = kv.get_real("learning_rate", defaults.adam.learning_rate);
  c.adam.beta1 = kv.get_real("beta1", defaults.adam.beta1);
  c.adam.beta2 = kv.get_real("beta2", defaults.adam.beta2);
  c.adam.epsilon = kv.get_real("epsilon", defaults.adam.epsilon);
  c.lambda = kv.get_real("lambda", defaults.lambda);
  c.seed = kv.get_uint("seed", defaults.seed);
  c.train_fraction = kv.get_real("train_fraction", defaults.train_fraction);
  c.points = kv.get_uint("points", defaults.points);
  c.strict_holdout = kv.get_bool("strict_holdout", defaults.strict_holdout);
  c.validate();
  return c;
}

TrainConfig TrainConfig::from_key_values(const KeyValues& kv) { return from_key_values(kv, TrainConfig{}); }

KeyValues TrainConfig::to_key_values() const {
  KeyValues kv;
  kv.set("model", model::to_string(model));
  kv.set("preset", preset);
  kv.set("epochs", std::to_string(epochs));
  kv.set("batch_size", std::to_string(batch_size));
  kv.set("learning_rate", io::format_real(adam.learning_rate));
  kv.set("beta1", io::format_real(adam.beta1));
  kv.set("beta2", io::format_real(adam.beta2));
  kv.set("epsilon", io::format_real(adam.epsilon));
  kv.set("lambda", io::format_real(lambda));
  kv.set("seed", std::to_string(seed));
  kv.set("train_fraction", io::format_real(train_fraction));
  kv.set("points", std::to_string(points));
  kv.set("strict_holdout", strict_holdout ? "true" : "false");
  return kv;
}

void TrainConfig::validate() const {
  if (preset != "paper" && preset != "desk") throw ConfigError("config key 'preset': expected paper or desk");
  if (epochs == 0) throw ConfigError("config key 'epochs' must be positive");
  if (batch_size == 0) throw ConfigError("config key 'batch_size' must be positive");
  if (points == 0) throw ConfigError("config key 'points' must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("config key 'train_fraction' must lie in (0, 1)");
  }
  if (!(adam.learning_rate > 0.0) || !std::isfinite(adam.learning_rate)) {
    throw ConfigError("config key 'learning_rate' must be positive");
  }
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ConfigError("config key 'beta1' must lie in [0, 1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ConfigError("config key 'beta2' must lie in [0, 1)");
  if (!(adam.epsilon > 0.0)) throw ConfigError("config key 'epsilon' must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("config key 'lambda' must be >= 0");
}

// ---- split ----------------------------------------------------------------

Split split_indices(std::size_t n, double fraction, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("split_dataset: empty dataset");
  if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("split_dataset: fraction must lie in (0, 1)");
  const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train == n) {
    throw std::invalid_argument("split_dataset: fraction " + io::format_real(fraction) + " of " +
                                std::to_string(n) + " clouds leaves one side empty");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng(seed, kSplitStream);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return s;
}

std::pair<std::vector<LabeledPointCloud>, std::vector<LabeledPointCloud>> split_dataset(
    const std::vector<LabeledPointCloud>& clouds, double fraction, std::uint64_t seed) {
  const Split s = split_indices(clouds.size(), fraction, seed);
  std::pair<std::vector<LabeledPointCloud>, std::vector<LabeledPointCloud>> out;
  for (std::size_t i : s.train) out.first.push_back(clouds[i]);
  for (std::size_t i : s.test) out.second.push_back(clouds[i]);
  return out;
}

// ---- evaluation -----------------------------------------------------------

Evaluation evaluate(const model::SegmentationModel& model, const std::vector<LabeledPointCloud>& dataset,
                    double lambda) {
  if (dataset.empty()) throw std::invalid_argument("evaluate: empty dataset");
  const int k = static_cast<int>(model.num_classes());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset[i].class_count != k) {
      throw std::invalid_argument("evaluate: class count mismatch, cloud " + std::to_string(i) + " has " +
                                  std::to_string(dataset[i].class_count) + " classes, model predicts " +
                                  std::to_string(k));
    }
    dataset[i].validate();
  }
  ad::NoGradScope no_grad;
  Evaluation e;
  for (const auto& cloud : dataset) {
    const LossTerms t = loss_terms(model, cloud);
    CloudMetrics m;
    m.loss = t.cross_entropy.item() + lambda * t.regularizer.item();
    m.predicted = analysis::argmax_rows(t.forward.logits);
    m.accuracy = analysis::point_accuracy(m.predicted, cloud.labels);
    m.miou = analysis::miou(m.predicted, cloud.labels, k);
    e.loss += m.loss;
    e.accuracy += m.accuracy;
    e.miou += m.miou;
    e.clouds.push_back(std::move(m));
  }
  const auto n = static_cast<double>(dataset.size());
  e.loss /= n;
  e.accuracy /= n;
  e.miou /= n;
  return e;
}

// ---- training -------------------------------------------------------------

TrainRun train(const std::vector<LabeledPointCloud>& dataset, const TrainConfig& config,
               const EpochCallback& on_epoch) {
  config.validate();
  auto [train_set, test_set] = split_dataset(dataset, config.train_fraction, config.seed);
  return train_on(train_set, test_set, config, on_epoch);
}

TrainRun train_on(const std::vector<LabeledPointCloud>& train_set, const std::vector<LabeledPointCloud>& test_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  const int k = train_set.front().class_count;
  check_dataset(train_set, config.points, k, "training");
  check_dataset(test_set, config.points, k, "test");

  TrainRun run;
  run.model_config =
      model::make_model_config(config.model, config.preset, static_cast<std::size_t>(k), config.points);
  run.model = model::build_model(run.model_config, CounterRng::derive(config.seed, kInitTag));
  model::SegmentationModel& net = *run.model;

  AdamState adam{config.adam, 0, {}, {}};
  const std::uint64_t shuffle_seed = CounterRng::derive(config.seed, kShuffleTag);
  double best_accuracy = -1.0;
  std::vector<std::vector<double>> best;

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng(shuffle_seed, epoch);
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

    EpochMetrics train_metrics{epoch, 0.0, 0.0, 0.0};
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const double inv = 1.0 / static_cast<double>(stop - start);
      net.zero_grad();
      StepRecord step{epoch, batch_index + 1, 0.0, 0.0, 0.0};
      for (std::size_t b = start; b < stop; ++b) {
        const LabeledPointCloud& cloud = train_set[order[b]];
        const LossTerms t = loss_terms(net, cloud);
        const ad::Tensor total = ad::add(t.cross_entropy, ad::scale(t.regularizer, config.lambda));
        const double ce = t.cross_entropy.item();
        const double reg = t.regularizer.item();
        const double value = total.item();
        if (!std::isfinite(value)) {
          throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index + 1));
        }
        ad::scale(total, inv).backward();
        step.cross_entropy += ce;
        step.regularizer += reg;
        step.total += value;

        const std::vector<int> predicted = analysis::argmax_rows(t.forward.logits);
        train_metrics.loss += value;
        train_metrics.accuracy += analysis::point_accuracy(predicted, cloud.labels);
        train_metrics.miou += analysis::miou(predicted, cloud.labels, k);
      }
      step.cross_entropy *= inv;
      step.regularizer *= inv;
      step.total *= inv;
      run.steps.push_back(step);
      try {
        adam_step(net.parameters(), adam);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index + 1) +
                                 ": " + e.what());
      }
    }
    net.zero_grad();
    const auto n = static_cast<double>(train_set.size());
    train_metrics.loss /= n;
    train_metrics.accuracy /= n;
    train_metrics.miou /= n;

    const EpochMetrics test_metrics =
        test_set.empty() ? EpochMetrics{epoch, 0.0, 0.0, 0.0} : to_epoch(epoch, evaluate(net, test_set, config.lambda));
    run.train.push_back(train_metrics);
    run.test.push_back(test_metrics);
    run.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());

    if (!config.strict_holdout && !test_set.empty() && test_metrics.accuracy > best_accuracy) {
      best_accuracy = test_metrics.accuracy;
      best = net.snapshot();
      run.selected_epoch = epoch;
    }
    if (on_epoch) on_epoch(train_metrics, test_metrics);
  }

  if (best.empty()) {
    run.selected_epoch = config.epochs;
  } else {
    net.restore(best);
  }
  return run;
}

std::size_t epochs_to_reach(const TrainRun& run, double threshold) {
  for (const auto& m : run.test)
    if (m.accuracy >= threshold) return m.epoch;
  return run.test.size() + 1;
}

void write_metrics_csv(const std::filesystem::path& path, const TrainRun& run) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,split,loss,accuracy,miou\n";
  auto row = [&](const EpochMetrics& m, const char* split) {
    out << m.epoch << ',' << split << ',' << io::format_real(m.loss) << ',' << io::format_real(m.accuracy) << ','
        << io::format_real(m.miou) << '\n';
  };
  for (std::size_t i = 0; i < run.train.size(); ++i) {
    row(run.train[i], "train");
    row(run.test[i], "test");
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace ipcnet::training
