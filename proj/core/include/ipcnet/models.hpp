#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "ipcnet/ipcnet.hpp"
#include "ipcnet/pointnet.hpp"

namespace ipcnet::model {

enum class ModelKind { PointNet, IPCNet };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

// Everything needed to rebuild a model, serialisable as canonical text.
struct ModelConfig {
  ModelKind kind = ModelKind::PointNet;
  PointNetConfig pointnet;
  InterPointConfig interpoint = InterPointConfig::reference_chain();
  std::size_t points = 2048;

  std::string to_text() const;
  static ModelConfig from_text(const std::string& text);
};

// "paper": 64-64-64-128-1024 trunk, 512-256-128 head, full TNets.
// "desk":  64-64-64-128-256 trunk, 128-64 head, slimmer TNets; keeps the
//          64-channel local tap so the inter-point chain reads the same width.
PointNetConfig pointnet_preset(const std::string& preset, std::size_t num_classes);

// Preset widths plus the inter-point chain scaled for `points`.
ModelConfig make_model_config(ModelKind kind, const std::string& preset, std::size_t num_classes, std::size_t points);

std::unique_ptr<SegmentationModel> build_model(const ModelConfig& config, std::uint64_t seed);

}  // namespace ipcnet::model
