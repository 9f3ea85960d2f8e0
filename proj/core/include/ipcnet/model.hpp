#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ipcnet/adam.hpp"
#include "ipcnet/tensor.hpp"

namespace ipcnet::model {

// Fully connected layer applied independently to every row: x W + b, with
// W stored in x out so that column j is the weight vector of kernel j.
struct Dense {
  ad::Tensor weight;
  ad::Tensor bias;

  std::size_t inputs() const { return weight.extent(0); }
  std::size_t outputs() const { return weight.extent(1); }
  ad::Tensor apply(const ad::Tensor& x) const;
};

// Per-point activation recorded during a forward pass (N rows).
struct LayerActivation {
  std::string layer;
  ad::Tensor value;
};

struct ForwardResult {
  ad::Tensor logits;  // N x k
  std::optional<ad::Tensor> input_matrix;
  std::optional<ad::Tensor> feature_matrix;
  std::vector<LayerActivation> activations;

  const ad::Tensor* activation(const std::string& layer) const;
};

// Parameters are registered under "<layer>.weight" / "<layer>.bias"; the
// layer ids double as activation names in ForwardResult.
class SegmentationModel {
 public:
  virtual ~SegmentationModel() = default;
  SegmentationModel() = default;
  SegmentationModel(const SegmentationModel&) = delete;
  SegmentationModel& operator=(const SegmentationModel&) = delete;

  virtual ForwardResult forward(const ad::Tensor& points) const = 0;
  virtual std::string kind() const = 0;
  virtual std::size_t num_classes() const = 0;

  std::vector<NamedTensor>& parameters() { return params_; }
  const std::vector<NamedTensor>& parameters() const { return params_; }
  const ad::Tensor* find_parameter(const std::string& name) const;
  // Weight tensor of `layer`; the last axis indexes kernels.
  const ad::Tensor* layer_weight(const std::string& layer) const;
  std::size_t parameter_count() const;

  void zero_grad();
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

 protected:
  ad::Tensor register_parameter(const std::string& name, ad::Tensor t);
  Dense make_dense(const std::string& layer, std::size_t in, std::size_t out, std::uint64_t seed);

  std::vector<NamedTensor> params_;
};

// Points as an N x 3 tensor.
ad::Tensor points_tensor(const std::vector<std::array<double, 3>>& points);

}  // namespace ipcnet::model
