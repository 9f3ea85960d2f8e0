#include "ipcnet/models.hpp"

#include <sstream>
#include <stdexcept>

#include "ipcnet/config.hpp"

namespace ipcnet::model {

namespace {

std::string layer_to_text(const InterPointLayer& l) {
  const char* kind = l.kind == InterPointKind::Conv ? "conv" : l.kind == InterPointKind::MaxPool ? "maxpool" : "concat";
  std::ostringstream os;
  os << kind << ':' << l.name << ':' << l.out_channels << ':' << l.kernel_h << 'x' << l.kernel_w << ':' << l.stride_h
     << 'x' << l.stride_w;
  return os.str();
}

std::pair<std::size_t, std::size_t> parse_pair(const std::string& text) {
  const auto x = text.find('x');
  if (x == std::string::npos) throw ConfigError("interpoint: expected HxW, got '" + text + "'");
  return {std::stoul(text.substr(0, x)), std::stoul(text.substr(x + 1))};
}

InterPointLayer layer_from_text(const std::string& text) {
  std::vector<std::string> f;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ':')) f.push_back(item);
  if (f.size() != 5) throw ConfigError("interpoint: malformed layer '" + text + "'");
  InterPointLayer l;
  if (f[0] == "conv") {
    l.kind = InterPointKind::Conv;
  } else if (f[0] == "maxpool") {
    l.kind = InterPointKind::MaxPool;
  } else if (f[0] == "concat") {
    l.kind = InterPointKind::Concat;
  } else {
    throw ConfigError("interpoint: unknown layer kind '" + f[0] + "'");
  }
  l.name = f[1];
  l.out_channels = std::stoul(f[2]);
  std::tie(l.kernel_h, l.kernel_w) = parse_pair(f[3]);
  std::tie(l.stride_h, l.stride_w) = parse_pair(f[4]);
  return l;
}

}  // namespace

std::string to_string(ModelKind kind) { return kind == ModelKind::PointNet ? "pointnet" : "ipcnet"; }

ModelKind parse_model_kind(const std::string& text) {
  if (text == "pointnet") return ModelKind::PointNet;
  if (text == "ipcnet") return ModelKind::IPCNet;
  throw ConfigError("model: expected 'pointnet' or 'ipcnet', got '" + text + "'");
}

std::string ModelConfig::to_text() const {
  KeyValues kv;
  kv.set("model", to_string(kind));
  kv.set("num_classes", std::to_string(pointnet.num_classes));
  kv.set("points", std::to_string(points));
  kv.set("trunk", join_sizes(pointnet.trunk));
  kv.set("local_layers", std::to_string(pointnet.local_layers));
  kv.set("head", join_sizes(pointnet.head));
  kv.set("input_tnet_mlp", join_sizes(pointnet.input_tnet.point_mlp));
  kv.set("input_tnet_fc", join_sizes(pointnet.input_tnet.fc));
  kv.set("feature_tnet_mlp", join_sizes(pointnet.feature_tnet.point_mlp));
  kv.set("feature_tnet_fc", join_sizes(pointnet.feature_tnet.fc));
  kv.set("input_transform", pointnet.input_transform ? "true" : "false");
  kv.set("feature_transform", pointnet.feature_transform ? "true" : "false");
  std::string chain;
  for (const InterPointLayer& l : interpoint.layers) {
    if (!chain.empty()) chain += ';';
    chain += layer_to_text(l);
  }
  kv.set("interpoint", chain);
  return kv.to_text();
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  const KeyValues kv = KeyValues::parse(text, "model config");
  ModelConfig c;
  c.kind = parse_model_kind(kv.get_string("model", "pointnet"));
  c.points = kv.get_uint("points", c.points);
  PointNetConfig& p = c.pointnet;
  p.num_classes = kv.get_uint("num_classes", p.num_classes);
  p.trunk = kv.get_sizes("trunk", p.trunk);
  p.local_layers = kv.get_uint("local_layers", p.local_layers);
  p.head = kv.get_sizes("head", p.head);
  p.input_tnet.point_mlp = kv.get_sizes("input_tnet_mlp", p.input_tnet.point_mlp);
  p.input_tnet.fc = kv.get_sizes("input_tnet_fc", p.input_tnet.fc);
  p.feature_tnet.point_mlp = kv.get_sizes("feature_tnet_mlp", p.feature_tnet.point_mlp);
  p.feature_tnet.fc = kv.get_sizes("feature_tnet_fc", p.feature_tnet.fc);
  p.input_transform = kv.get_bool("input_transform", p.input_transform);
  p.feature_transform = kv.get_bool("feature_transform", p.feature_transform);
  if (kv.has("interpoint")) {
    c.interpoint.layers.clear();
    std::istringstream in(kv.get_string("interpoint", ""));
    std::string item;
    while (std::getline(in, item, ';'))
      if (!item.empty()) c.interpoint.layers.push_back(layer_from_text(item));
  }
  return c;
}

PointNetConfig pointnet_preset(const std::string& preset, std::size_t num_classes) {
  PointNetConfig p;
  p.num_classes = num_classes;
  if (preset == "paper") return p;
  if (preset == "desk") {
    p.trunk = {64, 64, 64, 128, 256};
    p.head = {128, 64};
    p.input_tnet = {{32, 64, 128}, {64, 32}};
    p.feature_tnet = {{32, 64, 128}, {64, 32}};
    return p;
  }
  throw ConfigError("preset: expected 'paper' or 'desk', got '" + preset + "'");
}

ModelConfig make_model_config(ModelKind kind, const std::string& preset, std::size_t num_classes, std::size_t points) {
  ModelConfig c;
  c.kind = kind;
  c.points = points;
  c.pointnet = pointnet_preset(preset, num_classes);
  c.interpoint = InterPointConfig::reference_chain().scaled_for(points, c.pointnet.local_width());
  return c;
}

std::unique_ptr<SegmentationModel> build_model(const ModelConfig& config, std::uint64_t seed) {
  if (config.kind == ModelKind::PointNet) return std::make_unique<PointNetSegModel>(config.pointnet, seed);
  return std::make_unique<IPCNetSegModel>(config.pointnet, config.interpoint, config.points, seed);
}

}  // namespace ipcnet::model
