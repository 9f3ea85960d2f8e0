#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>

#include "ipcnet/models.hpp"

namespace ipcnet {

// Binary container, all integers and reals little-endian:
//   8 bytes   magic "IPCNETCK"
//   u32       format version (1)
//   u64 + n   canonical model config text
//   u64       parameter count
//   per parameter: u32 + n name, u32 rank, u64 extents..., f64 values...
inline constexpr char kCheckpointMagic[8] = {'I', 'P', 'C', 'N', 'E', 'T', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const model::ModelConfig& config,
                     const model::SegmentationModel& model);

struct LoadedModel {
  model::ModelConfig config;
  std::unique_ptr<model::SegmentationModel> model;
};

LoadedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace ipcnet
