#include "ipcnet_cli/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <ostream>
#include <thread>

#include "ipcnet/analysis.hpp"
#include "ipcnet/checkpoint.hpp"
#include "ipcnet/config.hpp"
#include "ipcnet/datagen.hpp"
#include "ipcnet/geometry.hpp"
#include "ipcnet/mesh_io.hpp"
#include "ipcnet/training.hpp"

namespace ipcnet::cli {

namespace fs = std::filesystem;

namespace {

struct Key {
  std::string name;
  std::string fallback;  // empty: required
  std::string help;
  bool flag = false;
};

std::string dashed(std::string key) {
  for (char& c : key)
    if (c == '_') c = '-';
  return "--" + key;
}

std::string default_seed() {
  const char* env = std::getenv("IPCNET_SEED");
  return env && *env ? std::string(env) : std::string("0");
}

// One subcommand whose flags mirror config keys one-to-one. Resolution order:
// defaults, then --config file, then flags.
class Command {
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& description, std::vector<Key> keys)
      : app_(parent.add_subcommand(name, description)), keys_(std::move(keys)) {
    app_->add_option("--config", config_path_, "key = value file; flags override it");
    for (const Key& k : keys_) {
      if (k.flag) {
        flags_[k.name] = false;
        app_->add_flag(dashed(k.name), flags_[k.name], k.help);
      } else {
        std::string help = k.help;
        help += k.fallback.empty() ? " (required)" : " [" + k.fallback + "]";
        app_->add_option(dashed(k.name), given_[k.name], help);
      }
    }
  }

  CLI::App* app() const { return app_; }
  const std::string& name() const { return app_->get_name(); }

  KeyValues resolve() const {
    KeyValues kv;
    for (const Key& k : keys_)
      if (!k.fallback.empty()) kv.set(k.name, k.fallback);
    if (!config_path_.empty()) {
      const KeyValues file = KeyValues::load(config_path_);
      std::vector<std::string> known;
      for (const Key& k : keys_) known.push_back(k.name);
      const auto unknown = file.unknown_keys(known);
      if (!unknown.empty()) {
        throw ConfigError(config_path_ + ": unknown key '" + unknown.front() + "' for command " + name());
      }
      kv.merge(file);
    }
    for (const Key& k : keys_) {
      const CLI::Option* opt = app_->get_option(dashed(k.name));
      if (opt->count() == 0) continue;
      kv.set(k.name, k.flag ? (flags_.at(k.name) ? "true" : "false") : given_.at(k.name));
    }
    for (const Key& k : keys_) {
      if (!kv.has(k.name) || kv.get_string(k.name, "").empty()) {
        throw ConfigError("missing required key '" + k.name + "' (" + dashed(k.name) + ")");
      }
    }
    return kv;
  }

 private:
  CLI::App* app_;
  std::vector<Key> keys_;
  std::string config_path_;
  std::map<std::string, std::string> given_;
  std::map<std::string, bool> flags_;
};

std::vector<Key> training_keys(const std::string& preset, const std::string& points, const std::string& epochs) {
  return {
      {"preset", preset, "layer widths: paper or desk"},
      {"epochs", epochs, "training epochs"},
      {"batch_size", "8", "clouds per Adam step"},
      {"learning_rate", "0.001", "Adam step size"},
      {"beta1", "0.9", "Adam first-moment decay"},
      {"beta2", "0.999", "Adam second-moment decay"},
      {"epsilon", "1e-08", "Adam denominator floor"},
      {"lambda", "0.001", "weight of the feature-transform orthogonality term"},
      {"seed", default_seed(), "seed for split, initialisation and shuffling"},
      {"train_fraction", "0.8", "share of clouds used for training"},
      {"points", points, "points per cloud ('auto' reads it from the data)"},
      {"strict_holdout", "false", "keep the last epoch instead of the best test epoch", true},
  };
}

std::vector<Key> concat(std::vector<Key> a, const std::vector<Key>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void print_config(std::ostream& out, const std::string& command, const KeyValues& kv) {
  out << "# " << command << " resolved config\n" << kv.to_text();
  out.flush();
}

fs::path output_dir(const KeyValues& kv) {
  const fs::path dir = kv.get_string("out", "");
  fs::create_directories(dir);
  return dir;
}

training::TrainConfig train_config(const KeyValues& kv, std::size_t data_points) {
  KeyValues t;
  for (const std::string& key : training::TrainConfig::keys())
    if (kv.has(key)) t.set(key, kv.get_string(key, ""));
  if (t.get_string("points", "") == "auto") t.set("points", std::to_string(data_points));
  return training::TrainConfig::from_key_values(t);
}

datagen::Dataset load_data(const KeyValues& kv) {
  std::string family = kv.get_string("family", "none");
  if (family == "none") family.clear();
  datagen::Dataset ds = datagen::read_dataset(kv.get_string("data", ""), family,
                                              static_cast<int>(kv.get_int("label_base", 0)));
  if (ds.clouds.empty()) throw io::InputError("no clouds found under " + kv.get_string("data", ""));
  return ds;
}

void warn_concat_width(const model::ModelConfig& config, std::ostream& out) {
  if (config.kind != model::ModelKind::IPCNet) return;
  const std::string w = model::concat_width_warning(config.pointnet, config.interpoint, config.points);
  if (!w.empty()) out << "warning: " << w << "\n";
}

std::string last_shared_layer(const model::ModelConfig& config) {
  return "trunk." + std::to_string(config.pointnet.trunk.size() - 1);
}

// ---- commands -------------------------------------------------------------

int gen_data(const KeyValues& kv, std::ostream& out) {
  const datagen::Family family = datagen::parse_family(kv.get_string("family", ""));
  const std::size_t count = kv.get_uint("count", 0);
  const std::size_t points = kv.get_uint("points", 0);
  if (count == 0) throw ConfigError("config key 'count' must be positive");
  if (points == 0) throw ConfigError("config key 'points' must be positive");
  datagen::Dataset ds;
  ds.family = datagen::family_name(family);
  ds.class_count = datagen::family_class_count(family);
  ds.clouds = datagen::gen_dataset(datagen::ShapeSpec::for_family(family), count, points, kv.get_uint("seed", 0));
  for (std::size_t i = 0; i < count; ++i) ds.names.push_back(ds.family + "_" + std::to_string(i));
  const fs::path dir = output_dir(kv);
  datagen::write_dataset(dir, ds);
  out << "wrote " << count << " " << ds.family << " clouds to " << dir.string() << "\n";
  return kExitOk;
}

int sample(const KeyValues& kv, std::ostream& out) {
  const fs::path mesh_path = kv.get_string("mesh", "");
  geometry::TriangleMesh mesh = io::read_mesh(mesh_path);
  const geometry::CenterMode mode = kv.get_bool("half_extent_centre", false) ? geometry::CenterMode::LiteralHalfExtent
                                                                       : geometry::CenterMode::BoundingBoxMidpoint;
  const std::size_t points = kv.get_uint("points", 0);
  if (points == 0) throw ConfigError("config key 'points' must be positive");
  mesh.vertices = geometry::unit_sphere_normalize(mesh.vertices, mode);
  const geometry::LabeledPointCloud cloud = geometry::sample_surface(mesh, points, kv.get_uint("seed", 0));
  const fs::path dir = output_dir(kv);
  const std::string stem = mesh_path.stem().string();
  io::write_pts(dir / (stem + ".pts"), cloud.points);
  io::write_seg(dir / (stem + ".seg"), cloud.labels);
  out << "wrote " << cloud.size() << " points to " << (dir / (stem + ".pts")).string() << "\n";
  return kExitOk;
}

int train(const KeyValues& kv, std::ostream& out) {
  const datagen::Dataset ds = load_data(kv);
  const training::TrainConfig config = train_config(kv, ds.clouds.front().size());
  warn_concat_width(
      model::make_model_config(config.model, config.preset, static_cast<std::size_t>(ds.class_count), config.points), out);
  const fs::path dir = output_dir(kv);
  training::TrainRun run = training::train(ds.clouds, config, [&](const auto& tr, const auto& te) {
    out << "epoch " << tr.epoch << " train_loss " << io::format_real(tr.loss) << " train_acc "
        << io::format_real(tr.accuracy) << " test_acc " << io::format_real(te.accuracy) << " test_miou "
        << io::format_real(te.miou) << "\n";
    out.flush();
  });
  run.checkpoint = dir / "model.ckpt";
  save_checkpoint(run.checkpoint, run.model_config, *run.model);
  training::write_metrics_csv(dir / "metrics.csv", run);
  std::ofstream(dir / "config.txt") << kv.to_text();
  out << "selected epoch " << run.selected_epoch << ", checkpoint " << run.checkpoint.string() << "\n";
  return kExitOk;
}

int eval(const KeyValues& kv, std::ostream& out) {
  const LoadedModel loaded = load_checkpoint(kv.get_string("checkpoint", ""));
  const datagen::Dataset ds = load_data(kv);
  const training::Evaluation e = training::evaluate(*loaded.model, ds.clouds);
  const fs::path dir = output_dir(kv);
  fs::create_directories(dir / "predictions");
  std::ofstream csv(dir / "eval.csv", std::ios::binary);
  csv << "cloud,accuracy,miou\n";
  for (std::size_t i = 0; i < ds.clouds.size(); ++i) {
    io::write_seg(dir / "predictions" / (ds.names[i] + ".seg"), e.clouds[i].predicted);
    csv << ds.names[i] << ',' << io::format_real(e.clouds[i].accuracy) << ',' << io::format_real(e.clouds[i].miou)
        << '\n';
  }
  if (!csv) throw std::runtime_error("failed writing " + (dir / "eval.csv").string());
  out << "clouds " << ds.clouds.size() << " accuracy " << io::format_real(e.accuracy) << " miou "
      << io::format_real(e.miou) << "\n";
  return kExitOk;
}

int compare(const KeyValues& kv, std::ostream& out) {
  std::vector<geometry::LabeledPointCloud> clouds;
  if (kv.get_string("data", "none") != "none") {
    clouds = load_data(kv).clouds;
  } else {
    const datagen::Family family = datagen::parse_family(kv.get_string("family", ""));
    const std::size_t points = kv.get_string("points", "") == "auto" ? 512 : kv.get_uint("points", 0);
    const std::size_t count = kv.get_uint("count", 0);
    if (count == 0) throw ConfigError("config key 'count' must be positive");
    clouds = datagen::gen_dataset(datagen::ShapeSpec::for_family(family), count, points, kv.get_uint("seed", 0));
  }
  const training::TrainConfig base = train_config(kv, clouds.front().size());
  warn_concat_width(model::make_model_config(model::ModelKind::IPCNet, base.preset,
                                             static_cast<std::size_t>(clouds.front().class_count), base.points),
                    out);
  const fs::path dir = output_dir(kv);

  const model::ModelKind kinds[2] = {model::ModelKind::PointNet, model::ModelKind::IPCNet};
  training::TrainRun runs[2];
  std::exception_ptr failures[2];
  // Epoch lines are buffered per model so stdout does not depend on thread
  // interleaving.
  std::ostringstream logs[2];
  auto job = [&](int i) {
    try {
      training::TrainConfig c = base;
      c.model = kinds[i];
      runs[i] = training::train(clouds, c, [&](const auto& tr, const auto& te) {
        logs[i] << model::to_string(kinds[i]) << " epoch " << tr.epoch << " train_acc "
                << io::format_real(tr.accuracy) << " test_acc " << io::format_real(te.accuracy) << "\n";
      });
    } catch (...) {
      failures[i] = std::current_exception();
    }
  };
  std::thread second(job, 1);
  job(0);
  second.join();
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  out << logs[0].str() << logs[1].str();

  std::ofstream side(dir / "compare.csv", std::ios::binary);
  side << "epoch,pointnet_train_accuracy,pointnet_test_accuracy,pointnet_test_miou,ipcnet_train_accuracy,"
          "ipcnet_test_accuracy,ipcnet_test_miou\n";
  for (std::size_t e = 0; e < base.epochs; ++e) {
    side << e + 1;
    for (const auto& run : runs) {
      side << ',' << io::format_real(run.train[e].accuracy) << ',' << io::format_real(run.test[e].accuracy) << ','
           << io::format_real(run.test[e].miou);
    }
    side << '\n';
  }
  if (!side) throw std::runtime_error("failed writing " + (dir / "compare.csv").string());

  std::ofstream summary(dir / "summary.txt", std::ios::binary);
  for (int i = 0; i < 2; ++i) {
    const std::string name = model::to_string(kinds[i]);
    training::TrainRun& run = runs[i];
    run.checkpoint = dir / (name + ".ckpt");
    save_checkpoint(run.checkpoint, run.model_config, *run.model);
    training::write_metrics_csv(dir / (name + "_metrics.csv"), run);
    const std::string layer = last_shared_layer(run.model_config);
    const double redundancy = analysis::redundancy_score(analysis::redundancy_heatmap(*run.model, layer));
    summary << name << " final_test_accuracy " << io::format_real(run.test.back().accuracy) << " final_test_miou "
            << io::format_real(run.test.back().miou) << " selected_epoch " << run.selected_epoch
            << " epochs_to_80 " << training::epochs_to_reach(run, 80.0) << " redundancy_" << layer << ' '
            << io::format_real(redundancy) << '\n';
  }
  if (!summary) throw std::runtime_error("failed writing " + (dir / "summary.txt").string());
  out << "final test accuracy: pointnet " << io::format_real(runs[0].test.back().accuracy) << ", ipcnet "
      << io::format_real(runs[1].test.back().accuracy) << "\n";
  return kExitOk;
}

geometry::LabeledPointCloud read_cloud(const KeyValues& kv, std::size_t classes) {
  geometry::LabeledPointCloud cloud;
  cloud.points = io::read_pts(kv.get_string("cloud", ""));
  const std::string labels = kv.get_string("labels", "none");
  cloud.labels = labels == "none" ? std::vector<int>(cloud.points.size(), 0) : io::read_seg(labels);
  cloud.class_count = static_cast<int>(classes);
  cloud.validate();
  return cloud;
}

int kernels(const KeyValues& kv, std::ostream& out) {
  const LoadedModel loaded = load_checkpoint(kv.get_string("checkpoint", ""));
  const geometry::LabeledPointCloud cloud = read_cloud(kv, loaded.model->num_classes());
  const std::string layer = kv.get_string("layer", "");
  const std::size_t kernel = kv.get_uint("kernel", 0);
  const analysis::KernelActivationMap map = analysis::kernel_activation_map(*loaded.model, cloud, layer, kernel);
  const fs::path dir = output_dir(kv);
  const std::string stem = layer + "_k" + std::to_string(kernel);
  analysis::write_activation_csv(dir / ("activation_" + stem + ".csv"), map);
  std::string axes = kv.get_string("axes", "");
  std::size_t start = 0;
  while (start <= axes.size()) {
    const std::size_t comma = std::min(axes.find(',', start), axes.size());
    const std::string pair = axes.substr(start, comma - start);
    if (pair.size() != 2) throw ConfigError("config key 'axes': expected pairs like xy,xz, got '" + pair + "'");
    const auto projection =
        analysis::field_view_projection(map, analysis::parse_axis(pair[0]), analysis::parse_axis(pair[1]));
    analysis::write_projection_csv(dir / ("projection_" + stem + "_" + pair + ".csv"), projection);
    start = comma + 1;
  }
  out << layer << " kernel " << kernel << ": " << map.active_count() << " of " << cloud.size()
      << " points active\n";
  return kExitOk;
}

int heatmap(const KeyValues& kv, std::ostream& out) {
  const LoadedModel loaded = load_checkpoint(kv.get_string("checkpoint", ""));
  const std::string layer = kv.get_string("layer", "");
  const analysis::RedundancyHeatmap h = analysis::redundancy_heatmap(*loaded.model, layer);
  const fs::path dir = output_dir(kv);
  analysis::write_heatmap_csv(dir / ("heatmap_" + layer + ".csv"), h);
  analysis::write_permutation_csv(dir / ("permutation_" + layer + ".csv"), h);
  analysis::write_heatmap_pgm(dir / ("heatmap_" + layer + ".pgm"), h);
  out << layer << ": " << h.kernels << " kernels, redundancy score " << io::format_real(analysis::redundancy_score(h))
      << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Point-cloud part segmentation with PointNet and IPC-Net", "ipcnet");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");

  const Key out_key{"out", "", "output directory"};
  const Key data_key{"data", "", "dataset root"};
  const Key family_key{"family", "", "object family (rocket, aircraft, car, motorbike); empty reads every family"};
  const Key label_base_key{"label_base", "0", "subtracted from every label (1 for 1-based files)"};

  std::vector<std::unique_ptr<Command>> commands;
  using Handler = int (*)(const KeyValues&, std::ostream&);
  std::vector<Handler> handlers;
  auto add = [&](const std::string& name, const std::string& description, std::vector<Key> keys, Handler h) {
    commands.push_back(std::make_unique<Command>(app, name, description, std::move(keys)));
    handlers.push_back(h);
  };

  add("gen-data", "Generate a labelled synthetic dataset",
      {{"family", "rocket", "object family"},
       {"count", "75", "number of shapes"},
       {"points", "2048", "points per cloud"},
       {"seed", default_seed(), "generator seed"},
       out_key},
      gen_data);
  add("sample", "Normalise a mesh and sample a labelled point cloud from its surface",
      {{"mesh", "", "OFF or OBJ mesh; face labels from <mesh>.flab"},
       {"points", "2048", "points to sample"},
       {"seed", default_seed(), "sampling seed"},
       {"half_extent_centre", "false", "centre on the half bounding-box extent instead of its midpoint", true},
       out_key},
      sample);
  add("train", "Train one model and write a checkpoint and metrics CSV",
      concat({{"model", "pointnet", "pointnet or ipcnet"}, data_key,
              {"family", "none", family_key.help}, label_base_key, out_key},
             training_keys("paper", "auto", "150")),
      train);
  add("eval", "Evaluate a checkpoint and write predicted labels",
      {{"checkpoint", "", "model checkpoint"}, data_key, {"family", "none", family_key.help}, label_base_key,
       out_key},
      eval);
  add("compare", "Train PointNet and IPC-Net on the same split and seed",
      concat({{"family", "rocket", "object family for generated data"},
              {"count", "75", "shapes to generate"},
              {"data", "none", "dataset root instead of generated shapes"},
              label_base_key, out_key},
             training_keys("desk", "512", "40")),
      compare);
  add("kernels", "Write a kernel's per-point activations and their 2D projections",
      {{"checkpoint", "", "model checkpoint"},
       {"cloud", "", ".pts point file"},
       {"labels", "none", ".seg label file (optional)"},
       {"layer", "trunk.0", "per-point layer name"},
       {"kernel", "0", "kernel index within the layer"},
       {"axes", "xy,xz,yz", "projection planes"},
       out_key},
      kernels);
  add("heatmap", "Write the kernel redundancy heatmap of a layer",
      {{"checkpoint", "", "model checkpoint"}, {"layer", "trunk.0", "layer name"}, out_key}, heatmap);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = &app;
    for (const auto& c : commands)
      if (c->app()->parsed()) target = c->app();
    out << target->help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  for (std::size_t i = 0; i < commands.size(); ++i) {
    if (!commands[i]->app()->parsed()) continue;
    try {
      const KeyValues kv = commands[i]->resolve();
      print_config(out, commands[i]->name(), kv);
      return handlers[i](kv, out);
    } catch (const std::invalid_argument& e) {
      err << "error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const std::exception& e) {
      err << "failed: " << e.what() << "\n";
      return kExitRuntime;
    }
  }
  return kExitUsage;
}

}  // namespace ipcnet::cli
