#include "ipcnet/ipcnet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ipcnet/rng.hpp"

namespace ipcnet::model {

namespace {

std::size_t ceil_scaled(std::size_t v, std::size_t points) {
  const std::size_t ref = InterPointConfig::kReferencePoints;
  return std::max<std::size_t>(2, (v * points + ref - 1) / ref);
}

bool slides_along_points(const InterPointLayer& l) {
  return l.kind == InterPointKind::MaxPool || (l.kind == InterPointKind::Conv && l.kernel_h > 1);
}

}  // namespace

InterPointConfig InterPointConfig::reference_chain() {
  InterPointConfig c;
  c.layers = {
      {"feature_extraction", InterPointKind::Conv, 64, 1, 64, 1, 1},
      {"zero_removal", InterPointKind::MaxPool, 0, 10, 1, 10, 1},
      {"downsample1", InterPointKind::Conv, 32, 6, 1, 5, 1},
      {"downsample2", InterPointKind::Conv, 16, 4, 1, 3, 1},
      {"downsample3", InterPointKind::Conv, 8, 3, 1, 2, 1},
      {"transform_concat", InterPointKind::Concat, 0, 1, 1, 1, 1},
  };
  return c;
}

InterPointConfig InterPointConfig::scaled_for(std::size_t points, std::size_t tap_width) const {
  InterPointConfig c = *this;
  for (InterPointLayer& l : c.layers) {
    if (l.kind == InterPointKind::Conv && l.kernel_h == 1) l.kernel_w = tap_width;
    if (points < kReferencePoints && slides_along_points(l)) {
      l.kernel_h = ceil_scaled(l.kernel_h, points);
      l.stride_h = ceil_scaled(l.stride_h, points);
    }
  }
  return c;
}

std::vector<std::size_t> InterPointConfig::point_extents(std::size_t points) const {
  std::vector<std::size_t> out;
  std::size_t h = points;
  for (const InterPointLayer& l : layers) {
    if (l.kind == InterPointKind::Concat) continue;
    if (l.kernel_h > h) {
      throw std::invalid_argument("inter-point layer '" + l.name + "': window " + std::to_string(l.kernel_h) +
                                  " exceeds point-axis extent " + std::to_string(h) + " (N = " +
                                  std::to_string(points) + ")");
    }
    if (l.stride_h == 0) throw std::invalid_argument("inter-point layer '" + l.name + "': stride must be >= 1");
    h = (h - l.kernel_h) / l.stride_h + 1;
    out.push_back(h);
  }
  return out;
}

std::size_t InterPointConfig::output_channels() const {
  std::size_t c = 0;
  for (const InterPointLayer& l : layers)
    if (l.kind == InterPointKind::Conv) c = l.out_channels;
  return c;
}

std::size_t InterPointConfig::flattened_length(std::size_t points) const {
  const auto extents = point_extents(points);
  if (extents.empty()) throw std::invalid_argument("inter-point chain has no layers");
  return extents.back() * output_channels();
}

void InterPointConfig::validate(std::size_t points, std::size_t tap_width) const {
  if (layers.empty() || layers.front().kind != InterPointKind::Conv) {
    throw std::invalid_argument("inter-point chain must start with the feature-extraction conv");
  }
  for (const InterPointLayer& l : layers) {
    if (l.kind == InterPointKind::Conv && l.out_channels == 0) {
      throw std::invalid_argument("inter-point layer '" + l.name + "' needs output channels");
    }
    if (l.kind != InterPointKind::Concat && l.kernel_w != 1 && !(l.kernel_h == 1 && l.kernel_w == tap_width)) {
      throw std::invalid_argument("inter-point layer '" + l.name + "': kernel width " + std::to_string(l.kernel_w) +
                                  " must be 1 or span the " + std::to_string(tap_width) + "-channel tap");
    }
  }
  point_extents(points);
}

ad::Tensor interpoint_features(const ad::Tensor& activations, const InterPointConfig& config,
                               const InterPointParams& params, ForwardResult* trace) {
  if (activations.rank() != 2) {
    throw std::invalid_argument("interpoint_features: expected N x C activations, got " +
                                ad::to_string(activations.shape()));
  }
  const std::size_t n = activations.extent(0), c = activations.extent(1);
  const std::vector<std::size_t> expected = config.point_extents(n);
  // Points run along H; channels stay on the channel axis with W = 1.
  ad::Tensor x = ad::reshape(activations, {n, 1, c});
  std::size_t conv = 0, step = 0;
  for (const InterPointLayer& l : config.layers) {
    if (l.kind == InterPointKind::Concat) continue;
    if (l.kind == InterPointKind::MaxPool) {
      x = ad::maxpool(x, l.kernel_h, 1, l.stride_h, 1);
    } else {
      if (conv >= params.convs.size()) throw std::invalid_argument("interpoint_features: missing conv parameters");
      // A channel-spanning kernel (1 x C) is stored as a 1 x 1 x C x out
      // weight: one output position per point.
      const auto& p = params.convs[conv++];
      x = ad::relu(ad::conv_valid(x, p.weight, p.bias, l.stride_h, 1));
    }
    if (trace) trace->activations.push_back({"ipc." + l.name, ad::reshape(x, {x.extent(0), x.extent(2)})});
    if (x.extent(0) != expected[step]) {
      throw std::logic_error("inter-point layer '" + l.name + "' produced extent " + std::to_string(x.extent(0)) +
                             ", expected " + std::to_string(expected[step]));
    }
    ++step;
  }
  return ad::reshape(x, {1, x.size()});
}

ad::Tensor concat_features(const ad::Tensor& local, const ad::Tensor& global, const ad::Tensor& interpoint) {
  if (local.rank() != 2) {
    throw std::invalid_argument("concat_features: local features must be N x C, got " + ad::to_string(local.shape()));
  }
  const std::size_t n = local.extent(0);
  const ad::Tensor parts[] = {local, ad::tile_rows(global, n), ad::tile_rows(interpoint, n)};
  return ad::concat(parts, 1);
}

std::string concat_width_warning(const PointNetConfig& pointnet, const InterPointConfig& interpoint,
                                 std::size_t points) {
  const std::size_t l = interpoint.flattened_length(points);
  const std::size_t width = pointnet.local_width() + pointnet.global_width() + l;
  if (width == kReferenceConcatChannels) return {};
  const auto extents = interpoint.point_extents(points);
  std::string chain = std::to_string(points);
  for (std::size_t e : extents) chain += " -> " + std::to_string(e);
  return "inter-point chain at N = " + std::to_string(points) + " gives point extents " + chain +
         " and flattened length " + std::to_string(l) + " (" + std::to_string(extents.back()) + " x " +
         std::to_string(interpoint.output_channels()) + "), so the concatenated width is " + std::to_string(width) +
         ", not the " + std::to_string(kReferenceConcatChannels) + " channels listed for the reference layer table";
}

IPCNetSegModel::IPCNetSegModel(PointNetConfig pointnet, InterPointConfig interpoint, std::size_t points,
                               std::uint64_t seed)
    : interpoint_(std::move(interpoint)),
      points_(points),
      interpoint_length_((pointnet.validate(), interpoint_.validate(points, pointnet.local_width()),
                          interpoint_.flattened_length(points))),
      backbone_(std::move(pointnet), seed, interpoint_length_) {
  params_ = backbone_.parameters();
  // The layer that reads the tap sees C input channels on a W = 1 map.
  std::size_t channels = backbone_.config().local_width();
  CounterRng rng(seed, 0x1bc);
  for (const InterPointLayer& l : interpoint_.layers) {
    if (l.kind != InterPointKind::Conv) continue;
    const std::size_t kh = l.kernel_h;
    const std::size_t cin = channels;
    const std::size_t fan_in = kh * cin;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::vector<double> w(kh * 1 * cin * l.out_channels);
    for (double& v : w) v = rng.uniform(-bound, bound);
    InterPointParams::Conv conv;
    conv.layer = "ipc." + l.name;
    conv.weight = register_parameter(conv.layer + ".weight", ad::Tensor({kh, 1, cin, l.out_channels}, std::move(w)));
    conv.bias = register_parameter(conv.layer + ".bias", ad::Tensor::zeros({l.out_channels}));
    ipc_params_.convs.push_back(conv);
    channels = l.out_channels;
  }
}

ForwardResult IPCNetSegModel::forward(const ad::Tensor& points) const {
  if (points.rank() != 2 || points.extent(0) != points_) {
    throw std::invalid_argument("ipc_segment: model built for " + std::to_string(points_) + " points, got " +
                                ad::to_string(points.shape()));
  }
  ForwardResult trace;
  const ad::Tensor local = backbone_.local_features(points, trace);
  const ad::Tensor global = backbone_.global_features(local, trace);
  const ad::Tensor inter = interpoint_features(local, interpoint_, ipc_params_, &trace);
  const ad::Tensor features = concat_features(local, global, inter);
  if (features.extent(1) != concat_width()) {
    throw std::logic_error("concatenated width " + std::to_string(features.extent(1)) + " != " +
                           std::to_string(concat_width()));
  }
  trace.logits = backbone_.head(features, trace);
  return trace;
}

}  // namespace ipcnet::model
