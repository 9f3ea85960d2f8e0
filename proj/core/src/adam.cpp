#include "ipcnet/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace ipcnet {

void adam_step(std::span<NamedTensor> params, AdamState& state) {
  if (state.first_moment.empty()) {
    for (const NamedTensor& p : params) {
      state.first_moment.emplace_back(p.tensor.size(), 0.0);
      state.second_moment.emplace_back(p.tensor.size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw std::invalid_argument("adam_step: state holds " + std::to_string(state.first_moment.size()) +
                                " accumulators for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (state.first_moment[p].size() != params[p].tensor.size()) {
      throw std::invalid_argument("adam_step: accumulator shape mismatch for parameter '" + params[p].name + "'");
    }
    for (double g : params[p].tensor.grad()) {
      if (!std::isfinite(g)) throw std::runtime_error("non-finite gradient in parameter '" + params[p].name + "'");
    }
  }

  const AdamHyper& h = state.hyper;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(h.beta1, t);
  const double correction2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    ad::Tensor& param = params[p].tensor;
    const auto grad = param.grad();
    auto& m = state.first_moment[p];
    auto& v = state.second_moment[p];
    auto values = param.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i];
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      values[i] -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon);
    }
  }
}

}  // namespace ipcnet
