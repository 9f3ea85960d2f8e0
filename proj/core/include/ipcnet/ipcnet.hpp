#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ipcnet/pointnet.hpp"

namespace ipcnet::model {

enum class InterPointKind { Conv, MaxPool, Concat };

struct InterPointLayer {
  std::string name;
  InterPointKind kind = InterPointKind::Conv;
  std::size_t out_channels = 0;  // conv only
  std::size_t kernel_h = 1, kernel_w = 1;
  std::size_t stride_h = 1, stride_w = 1;
};

// Layer chain run over the N x C kernel activations of the local tap.
//
//   feature_extraction  conv     64 out, kernel 1x64, stride 1x1
//   zero_removal        maxpool  kernel 10x1, stride 10x1
//   downsample1         conv     32 out, kernel 6x1, stride 5x1
//   downsample2         conv     16 out, kernel 4x1, stride 3x1
//   downsample3         conv      8 out, kernel 3x1, stride 2x1
//   transform_concat    reshape + concatenation with local and global features
//
// The feature-extraction kernel spans the whole channel axis, so it acts as
// a per-point channel mix producing N x 64; every later layer slides along
// the point axis in index order. Each conv is followed by a ReLU.
struct InterPointConfig {
  std::vector<InterPointLayer> layers;

  static constexpr std::size_t kReferencePoints = 2048;

  static InterPointConfig reference_chain();

  // For clouds smaller than kReferencePoints, point-axis kernels and strides
  // become max(2, ceil(v * points / 2048)); the feature-extraction kernel
  // width is set to `tap_width`. Larger clouds keep the chain unchanged.
  InterPointConfig scaled_for(std::size_t points, std::size_t tap_width) const;

  // Point-axis extent after each pooling/conv layer (the input extent is not
  // included). Throws std::invalid_argument naming the first layer whose
  // window does not fit.
  std::vector<std::size_t> point_extents(std::size_t points) const;
  std::size_t output_channels() const;
  std::size_t flattened_length(std::size_t points) const;
  void validate(std::size_t points, std::size_t tap_width) const;
};

struct InterPointParams {
  struct Conv {
    std::string layer;
    ad::Tensor weight;  // kh x kw x Cin x Cout
    ad::Tensor bias;
  };
  std::vector<Conv> convs;  // in chain order
};

// Runs the chain on N x C activations and flattens the last feature map
// row-major into a 1 x L tensor. Each layer's output (H x C) is appended to
// `trace` under "ipc.<layer>" when given.
ad::Tensor interpoint_features(const ad::Tensor& activations, const InterPointConfig& config,
                               const InterPointParams& params, ForwardResult* trace = nullptr);

// [local | tile(global) | tile(interpoint)] : N x (C + G + L).
ad::Tensor concat_features(const ad::Tensor& local, const ad::Tensor& global, const ad::Tensor& interpoint);

class IPCNetSegModel final : public SegmentationModel {
 public:
  // `interpoint` is used as given; call scaled_for() beforehand for small N.
  IPCNetSegModel(PointNetConfig pointnet, InterPointConfig interpoint, std::size_t points, std::uint64_t seed);

  ForwardResult forward(const ad::Tensor& points) const override;
  std::string kind() const override { return "ipcnet"; }
  std::size_t num_classes() const override { return backbone_.num_classes(); }

  const PointNetSegModel& backbone() const { return backbone_; }
  const InterPointConfig& interpoint_config() const { return interpoint_; }
  const InterPointParams& interpoint_params() const { return ipc_params_; }
  std::size_t points() const { return points_; }
  std::size_t interpoint_length() const { return interpoint_length_; }
  std::size_t concat_width() const { return backbone_.head_input_width(); }

 private:
  InterPointConfig interpoint_;
  std::size_t points_;
  std::size_t interpoint_length_;
  PointNetSegModel backbone_;
  InterPointParams ipc_params_;
};

inline ForwardResult ipc_segment(const ad::Tensor& points, const IPCNetSegModel& model) { return model.forward(points); }

// Channel count of the concatenated feature matrix that the reference layer
// table reports. The chain above yields a different count at every N; this
// constant exists so the mismatch can be reported.
inline constexpr std::size_t kReferenceConcatChannels = 1392;

// Warning text when local + global + L differs from kReferenceConcatChannels
// (always, for the chain above); empty when they agree.
std::string concat_width_warning(const PointNetConfig& pointnet, const InterPointConfig& interpoint,
                                 std::size_t points);

}  // namespace ipcnet::model
