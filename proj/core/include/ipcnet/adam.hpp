#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ipcnet/tensor.hpp"

namespace ipcnet {

struct NamedTensor {
  std::string name;
  ad::Tensor tensor;
};

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamHyper hyper;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

// Bias-corrected Adam update of every parameter in place, reading gradients
// from the parameters themselves (a parameter without a gradient is treated
// as having a zero gradient). Accumulators are created on the first call.
// Throws std::runtime_error naming the parameter if a gradient is not finite;
// no parameter is modified in that case.
void adam_step(std::span<NamedTensor> params, AdamState& state);

}  // namespace ipcnet
