#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ipcnet/model.hpp"

namespace ipcnet::model {

struct TNetConfig {
  std::vector<std::size_t> point_mlp{64, 128, 1024};
  std::vector<std::size_t> fc{512, 256};
};

// Shared per-point MLP, max over points, fully connected stack, then a
// final layer emitting d*d values. The final layer starts with zero weights
// and the flattened identity as bias, so an untrained TNet returns I.
struct TNetParams {
  std::size_t dim = 0;
  std::vector<Dense> point_mlp;
  std::vector<Dense> fc;
  Dense out;
};

struct PointNetConfig {
  std::size_t num_classes = 2;
  // Shared per-point widths; the feature transform acts after the first
  // `local_layers` of them.
  std::vector<std::size_t> trunk{64, 64, 64, 128, 1024};
  std::size_t local_layers = 2;
  std::vector<std::size_t> head{512, 256, 128};
  TNetConfig input_tnet;
  TNetConfig feature_tnet;
  bool input_transform = true;
  bool feature_transform = true;

  std::size_t local_width() const { return trunk.at(local_layers - 1); }
  std::size_t global_width() const { return trunk.back(); }
  void validate() const;
};

ad::Tensor tnet_matrix(const TNetParams& tnet, const ad::Tensor& x);

// (matrix, x . matrix) for an N x 3 cloud.
std::pair<ad::Tensor, ad::Tensor> input_transform(const ad::Tensor& points, const TNetParams& tnet);
// (A, features . A) for N x d features.
std::pair<ad::Tensor, ad::Tensor> feature_transform(const ad::Tensor& features, const TNetParams& tnet);

// ||I - A A^T||_F^2
ad::Tensor l_reg(const ad::Tensor& a);

// Per-channel max over the point axis: N x C -> 1 x C.
ad::Tensor global_feature(const ad::Tensor& point_features);

class PointNetSegModel final : public SegmentationModel {
 public:
  // `extra_head_inputs` widens the head input beyond local + global; used by
  // models that append further per-cloud features.
  PointNetSegModel(PointNetConfig config, std::uint64_t seed, std::size_t extra_head_inputs = 0);

  ForwardResult forward(const ad::Tensor& points) const override;
  std::string kind() const override { return "pointnet"; }
  std::size_t num_classes() const override { return config_.num_classes; }
  const PointNetConfig& config() const { return config_; }

  // Stages, exposed so extended models can reuse the trunk and head.
  // Runs transforms and the local layers; returns the N x local_width tap.
  ad::Tensor local_features(const ad::Tensor& points, ForwardResult& trace) const;
  // Remaining shared layers and the max-pool: returns 1 x global_width.
  ad::Tensor global_features(const ad::Tensor& local, ForwardResult& trace) const;
  ad::Tensor head(const ad::Tensor& features, ForwardResult& trace) const;

  std::size_t head_input_width() const { return config_.local_width() + config_.global_width() + extra_head_inputs_; }
  const TNetParams& input_tnet() const { return input_tnet_; }
  const TNetParams& feature_tnet() const { return feature_tnet_; }

 private:
  TNetParams make_tnet(const std::string& prefix, std::size_t dim, const TNetConfig& cfg, std::uint64_t seed);

  PointNetConfig config_;
  std::size_t extra_head_inputs_;
  TNetParams input_tnet_;
  TNetParams feature_tnet_;
  std::vector<Dense> trunk_;
  std::vector<Dense> head_;  // hidden layers followed by the k-way output layer
};

// Forward pass: logits plus the transform matrices.
inline ForwardResult segment(const ad::Tensor& points, const SegmentationModel& model) { return model.forward(points); }

}  // namespace ipcnet::model
