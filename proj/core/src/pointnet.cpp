#include "ipcnet/pointnet.hpp"

#include <stdexcept>

namespace ipcnet::model {

void PointNetConfig::validate() const {
  if (num_classes < 1) throw std::invalid_argument("num_classes must be >= 1");
  if (trunk.empty()) throw std::invalid_argument("trunk needs at least one layer");
  if (local_layers < 1 || local_layers > trunk.size()) {
    throw std::invalid_argument("local_layers must lie in [1, " + std::to_string(trunk.size()) + "]");
  }
  for (std::size_t w : trunk)
    if (w == 0) throw std::invalid_argument("trunk widths must be positive");
  for (std::size_t w : head)
    if (w == 0) throw std::invalid_argument("head widths must be positive");
  for (const TNetConfig* t : {&input_tnet, &feature_tnet}) {
    if (t->point_mlp.empty()) throw std::invalid_argument("TNet needs at least one per-point layer");
    for (std::size_t w : t->point_mlp)
      if (w == 0) throw std::invalid_argument("TNet widths must be positive");
    for (std::size_t w : t->fc)
      if (w == 0) throw std::invalid_argument("TNet widths must be positive");
  }
}

ad::Tensor tnet_matrix(const TNetParams& tnet, const ad::Tensor& x) {
  if (x.rank() != 2 || x.extent(1) != tnet.dim) {
    throw std::invalid_argument("TNet of dimension " + std::to_string(tnet.dim) + " applied to " +
                                ad::to_string(x.shape()));
  }
  ad::Tensor h = x;
  for (const Dense& layer : tnet.point_mlp) h = ad::relu(layer.apply(h));
  ad::Tensor g = global_feature(h);
  for (const Dense& layer : tnet.fc) g = ad::relu(layer.apply(g));
  return ad::reshape(tnet.out.apply(g), {tnet.dim, tnet.dim});
}

std::pair<ad::Tensor, ad::Tensor> input_transform(const ad::Tensor& points, const TNetParams& tnet) {
  ad::Tensor m = tnet_matrix(tnet, points);
  return {m, ad::matmul(points, m)};
}

std::pair<ad::Tensor, ad::Tensor> feature_transform(const ad::Tensor& features, const TNetParams& tnet) {
  ad::Tensor a = tnet_matrix(tnet, features);
  return {a, ad::matmul(features, a)};
}

ad::Tensor l_reg(const ad::Tensor& a) {
  if (a.rank() != 2 || a.extent(0) != a.extent(1)) {
    throw std::invalid_argument("l_reg: expected a square matrix, got " + ad::to_string(a.shape()));
  }
  const ad::Tensor residual = ad::sub(ad::Tensor::eye(a.extent(0)), ad::matmul(a, ad::transpose(a)));
  return ad::sum_squares(residual);
}

ad::Tensor global_feature(const ad::Tensor& point_features) {
  if (point_features.rank() != 2) {
    throw std::invalid_argument("global_feature: expected N x C features, got " + ad::to_string(point_features.shape()));
  }
  const std::size_t n = point_features.extent(0), c = point_features.extent(1);
  const ad::Tensor pooled = ad::maxpool(ad::reshape(point_features, {n, 1, c}), n, 1, n, 1);
  return ad::reshape(pooled, {1, c});
}

PointNetSegModel::PointNetSegModel(PointNetConfig config, std::uint64_t seed, std::size_t extra_head_inputs)
    : config_(std::move(config)), extra_head_inputs_(extra_head_inputs) {
  config_.validate();
  if (config_.input_transform) input_tnet_ = make_tnet("input_tnet", 3, config_.input_tnet, seed);
  std::size_t width = 3;
  for (std::size_t i = 0; i < config_.trunk.size(); ++i) {
    if (i == config_.local_layers && config_.feature_transform) {
      feature_tnet_ = make_tnet("feature_tnet", width, config_.feature_tnet, seed);
    }
    trunk_.push_back(make_dense("trunk." + std::to_string(i), width, config_.trunk[i], seed));
    width = config_.trunk[i];
  }
  if (config_.local_layers == config_.trunk.size() && config_.feature_transform) {
    feature_tnet_ = make_tnet("feature_tnet", width, config_.feature_tnet, seed);
  }
  width = head_input_width();
  for (std::size_t i = 0; i < config_.head.size(); ++i) {
    head_.push_back(make_dense("head." + std::to_string(i), width, config_.head[i], seed));
    width = config_.head[i];
  }
  head_.push_back(make_dense("head.out", width, config_.num_classes, seed));
}

TNetParams PointNetSegModel::make_tnet(const std::string& prefix, std::size_t dim, const TNetConfig& cfg,
                                       std::uint64_t seed) {
  TNetParams t;
  t.dim = dim;
  std::size_t width = dim;
  for (std::size_t i = 0; i < cfg.point_mlp.size(); ++i) {
    t.point_mlp.push_back(make_dense(prefix + ".mlp." + std::to_string(i), width, cfg.point_mlp[i], seed));
    width = cfg.point_mlp[i];
  }
  for (std::size_t i = 0; i < cfg.fc.size(); ++i) {
    t.fc.push_back(make_dense(prefix + ".fc." + std::to_string(i), width, cfg.fc[i], seed));
    width = cfg.fc[i];
  }
  t.out.weight = register_parameter(prefix + ".out.weight", ad::Tensor::zeros({width, dim * dim}));
  ad::Tensor bias = ad::Tensor::zeros({dim * dim});
  for (std::size_t i = 0; i < dim; ++i) bias.mutable_values()[i * dim + i] = 1.0;
  t.out.bias = register_parameter(prefix + ".out.bias", bias);
  return t;
}

ad::Tensor PointNetSegModel::local_features(const ad::Tensor& points, ForwardResult& trace) const {
  if (points.rank() != 2 || points.extent(1) != 3) {
    throw std::invalid_argument("segment: expected N x 3 points, got " + ad::to_string(points.shape()));
  }
  ad::Tensor x = points;
  if (config_.input_transform) {
    auto [m, transformed] = input_transform(x, input_tnet_);
    trace.input_matrix = m;
    x = transformed;
  }
  for (std::size_t i = 0; i < config_.local_layers; ++i) {
    x = ad::relu(trunk_[i].apply(x));
    trace.activations.push_back({"trunk." + std::to_string(i), x});
  }
  if (config_.feature_transform) {
    auto [a, transformed] = feature_transform(x, feature_tnet_);
    trace.feature_matrix = a;
    x = transformed;
  }
  trace.activations.push_back({"local", x});
  return x;
}

ad::Tensor PointNetSegModel::global_features(const ad::Tensor& local, ForwardResult& trace) const {
  ad::Tensor x = local;
  for (std::size_t i = config_.local_layers; i < trunk_.size(); ++i) {
    x = ad::relu(trunk_[i].apply(x));
    trace.activations.push_back({"trunk." + std::to_string(i), x});
  }
  return global_feature(x);
}

ad::Tensor PointNetSegModel::head(const ad::Tensor& features, ForwardResult& trace) const {
  if (features.rank() != 2 || features.extent(1) != head_input_width()) {
    throw std::invalid_argument("segmentation head expects " + std::to_string(head_input_width()) +
                                " input channels, got " + ad::to_string(features.shape()));
  }
  ad::Tensor x = features;
  for (std::size_t i = 0; i + 1 < head_.size(); ++i) {
    x = ad::relu(head_[i].apply(x));
    trace.activations.push_back({"head." + std::to_string(i), x});
  }
  x = head_.back().apply(x);
  trace.activations.push_back({"head.out", x});
  return x;
}

ForwardResult PointNetSegModel::forward(const ad::Tensor& points) const {
  if (extra_head_inputs_ != 0) {
    throw std::logic_error("a PointNet backbone with a widened head cannot run on its own");
  }
  ForwardResult trace;
  const ad::Tensor local = local_features(points, trace);
  const ad::Tensor global = global_features(local, trace);
  const std::size_t n = local.extent(0);
  const ad::Tensor parts[] = {local, ad::tile_rows(global, n)};
  trace.logits = head(ad::concat(parts, 1), trace);
  return trace;
}

}  // namespace ipcnet::model
