#include "ipcnet/model.hpp"

#include <cmath>
#include <stdexcept>

#include "ipcnet/rng.hpp"

namespace ipcnet::model {

ad::Tensor Dense::apply(const ad::Tensor& x) const { return ad::add_bias(ad::matmul(x, weight), bias); }

const ad::Tensor* ForwardResult::activation(const std::string& layer) const {
  for (const LayerActivation& a : activations)
    if (a.layer == layer) return &a.value;
  return nullptr;
}

const ad::Tensor* SegmentationModel::find_parameter(const std::string& name) const {
  for (const NamedTensor& p : params_)
    if (p.name == name) return &p.tensor;
  return nullptr;
}

const ad::Tensor* SegmentationModel::layer_weight(const std::string& layer) const {
  return find_parameter(layer + ".weight");
}

std::size_t SegmentationModel::parameter_count() const {
  std::size_t n = 0;
  for (const NamedTensor& p : params_) n += p.tensor.size();
  return n;
}

void SegmentationModel::zero_grad() {
  for (NamedTensor& p : params_) p.tensor.zero_grad();
}

std::vector<std::vector<double>> SegmentationModel::snapshot() const {
  std::vector<std::vector<double>> out;
  out.reserve(params_.size());
  for (const NamedTensor& p : params_) out.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  return out;
}

void SegmentationModel::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != params_.size()) throw std::invalid_argument("restore: parameter count mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto dst = params_[i].tensor.mutable_values();
    if (values[i].size() != dst.size()) {
      throw std::invalid_argument("restore: size mismatch for parameter '" + params_[i].name + "'");
    }
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

ad::Tensor SegmentationModel::register_parameter(const std::string& name, ad::Tensor t) {
  if (find_parameter(name)) throw std::logic_error("duplicate parameter name '" + name + "'");
  t.set_requires_grad(true);
  params_.push_back({name, t});
  return t;
}

Dense SegmentationModel::make_dense(const std::string& layer, std::size_t in, std::size_t out, std::uint64_t seed) {
  // He-uniform on fan-in; zero bias.
  CounterRng rng(seed, params_.size());
  const double bound = std::sqrt(6.0 / static_cast<double>(in));
  std::vector<double> w(in * out);
  for (double& v : w) v = rng.uniform(-bound, bound);
  Dense d;
  d.weight = register_parameter(layer + ".weight", ad::Tensor({in, out}, std::move(w)));
  d.bias = register_parameter(layer + ".bias", ad::Tensor::zeros({out}));
  return d;
}

ad::Tensor points_tensor(const std::vector<std::array<double, 3>>& points) {
  if (points.empty()) throw std::invalid_argument("points_tensor: empty cloud");
  std::vector<double> v;
  v.reserve(points.size() * 3);
  for (const auto& p : points) v.insert(v.end(), p.begin(), p.end());
  return ad::Tensor({points.size(), 3}, std::move(v));
}

}  // namespace ipcnet::model
