#pragma once

// Randomised finite-difference checks for every differentiable op and for
// end-to-end model losses. Each trial draws fresh shapes and values.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ipcnet/models.hpp"
#include "ipcnet/pointnet.hpp"
#include "oracles.hpp"

namespace grad_suite {

using ipcnet::CounterRng;
using ipcnet::ad::Shape;
using ipcnet::ad::Tensor;
namespace ad = ipcnet::ad;

struct Result {
  std::string name;
  std::size_t trials = 0;
  std::size_t checked = 0;
  std::size_t straddled = 0;
  double worst = 0.0;
  std::size_t failed_trials = 0;
};

inline std::size_t dim(CounterRng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

// Values bounded away from zero, for ops with a kink there.
inline Tensor away_from_zero(Shape shape, CounterRng& rng) {
  Tensor t = oracle::random_tensor(std::move(shape), rng, 0.05, 1.0, true);
  for (double& v : t.mutable_values())
    if (rng.uniform() < 0.5) v = -v;
  return t;
}

// Scalar probe: sum(out * R) with a fixed random R, so every output element
// carries a distinct upstream gradient.
inline std::function<Tensor()> probe(std::function<Tensor()> op, Shape out_shape, CounterRng& rng) {
  Tensor r = oracle::random_tensor(out_shape, rng);
  return [op = std::move(op), r] { return ad::sum(ad::mul(op(), r)); };
}

using Trial = std::function<oracle::GradCheck(CounterRng&)>;

inline std::map<std::string, Trial> op_trials() {
  std::map<std::string, Trial> t;
  auto rt = [](Shape s, CounterRng& rng) { return oracle::random_tensor(std::move(s), rng, -1.0, 1.0, true); };

  t["matmul"] = [rt](CounterRng& rng) {
    const std::size_t m = dim(rng, 1, 5), k = dim(rng, 1, 5), n = dim(rng, 1, 5);
    Tensor a = rt({m, k}, rng), b = rt({k, n}, rng);
    return oracle::check_gradients(probe([=] { return ad::matmul(a, b); }, {m, n}, rng), {a, b});
  };
  t["transpose"] = [rt](CounterRng& rng) {
    const std::size_t m = dim(rng, 1, 5), n = dim(rng, 1, 5);
    Tensor a = rt({m, n}, rng);
    return oracle::check_gradients(probe([=] { return ad::transpose(a); }, {n, m}, rng), {a});
  };
  t["add"] = [rt](CounterRng& rng) {
    const Shape s{dim(rng, 1, 4), dim(rng, 1, 4)};
    Tensor a = rt(s, rng), b = rt(s, rng);
    return oracle::check_gradients(probe([=] { return ad::add(a, b); }, s, rng), {a, b});
  };
  t["sub"] = [rt](CounterRng& rng) {
    const Shape s{dim(rng, 1, 4), dim(rng, 1, 4)};
    Tensor a = rt(s, rng), b = rt(s, rng);
    return oracle::check_gradients(probe([=] { return ad::sub(a, b); }, s, rng), {a, b});
  };
  t["mul"] = [rt](CounterRng& rng) {
    const Shape s{dim(rng, 1, 4), dim(rng, 1, 4)};
    Tensor a = rt(s, rng), b = rt(s, rng);
    return oracle::check_gradients(probe([=] { return ad::mul(a, b); }, s, rng), {a, b});
  };
  t["scale"] = [rt](CounterRng& rng) {
    const Shape s{dim(rng, 1, 4), dim(rng, 1, 4)};
    Tensor a = rt(s, rng);
    const double c = rng.uniform(-3.0, 3.0);
    return oracle::check_gradients(probe([=] { return ad::scale(a, c); }, s, rng), {a});
  };
  t["add_bias"] = [rt](CounterRng& rng) {
    const Shape s{dim(rng, 1, 3), dim(rng, 1, 3), dim(rng, 1, 4)};
    Tensor x = rt(s, rng), b = rt({s[2]}, rng);
    return oracle::check_gradients(probe([=] { return ad::add_bias(x, b); }, s, rng), {x, b});
  };
  t["relu"] = [](CounterRng& rng) {
    const Shape s{dim(rng, 1, 5), dim(rng, 1, 5)};
    Tensor x = away_from_zero(s, rng);
    return oracle::check_gradients(probe([=] { return ad::relu(x); }, s, rng), {x});
  };
  t["reshape"] = [rt](CounterRng& rng) {
    const std::size_t a = dim(rng, 1, 4), b = dim(rng, 1, 4);
    Tensor x = rt({a, b}, rng);
    return oracle::check_gradients(probe([=] { return ad::reshape(x, {b, 1, a}); }, {b, 1, a}, rng), {x});
  };
  t["concat"] = [rt](CounterRng& rng) {
    const std::size_t axis = rng.below(2);
    const std::size_t r = dim(rng, 1, 4), c = dim(rng, 1, 4), e1 = dim(rng, 1, 3), e2 = dim(rng, 1, 3);
    Tensor a = axis == 0 ? rt({e1, c}, rng) : rt({r, e1}, rng);
    Tensor b = axis == 0 ? rt({e2, c}, rng) : rt({r, e2}, rng);
    const Shape out = axis == 0 ? Shape{e1 + e2, c} : Shape{r, e1 + e2};
    return oracle::check_gradients(probe(
                                       [=] {
                                         const Tensor parts[] = {a, b};
                                         return ad::concat(parts, axis);
                                       },
                                       out, rng),
                                   {a, b});
  };
  t["tile_rows"] = [rt](CounterRng& rng) {
    const std::size_t c = dim(rng, 1, 5), n = dim(rng, 1, 5);
    Tensor v = rt({1, c}, rng);
    return oracle::check_gradients(probe([=] { return ad::tile_rows(v, n); }, {n, c}, rng), {v});
  };
  t["sum"] = [rt](CounterRng& rng) {
    Tensor x = rt({dim(rng, 1, 5), dim(rng, 1, 5)}, rng);
    return oracle::check_gradients([=] { return ad::sum(x); }, {x});
  };
  t["sum_squares"] = [rt](CounterRng& rng) {
    Tensor x = rt({dim(rng, 1, 5), dim(rng, 1, 5)}, rng);
    return oracle::check_gradients([=] { return ad::sum_squares(x); }, {x});
  };
  t["softmax_rows"] = [rt](CounterRng& rng) {
    const Shape s{dim(rng, 1, 4), dim(rng, 2, 5)};
    Tensor x = oracle::random_tensor(s, rng, -3.0, 3.0, true);
    return oracle::check_gradients(probe([=] { return ad::softmax_rows(x); }, s, rng), {x});
  };
  t["cross_entropy"] = [](CounterRng& rng) {
    const std::size_t n = dim(rng, 1, 6), k = dim(rng, 2, 5);
    Tensor x = oracle::random_tensor({n, k}, rng, -3.0, 3.0, true);
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(rng.below(k));
    return oracle::check_gradients([=] { return ad::cross_entropy(x, labels); }, {x});
  };
  t["conv_valid"] = [rt](CounterRng& rng) {
    const std::size_t h = dim(rng, 1, 7), w = dim(rng, 1, 5), cin = dim(rng, 1, 3), cout = dim(rng, 1, 3);
    const std::size_t kh = dim(rng, 1, h), kw = dim(rng, 1, w), sh = dim(rng, 1, 3), sw = dim(rng, 1, 3);
    Tensor x = rt({h, w, cin}, rng), k = rt({kh, kw, cin, cout}, rng), b = rt({cout}, rng);
    const Shape out{(h - kh) / sh + 1, (w - kw) / sw + 1, cout};
    return oracle::check_gradients(probe([=] { return ad::conv_valid(x, k, b, sh, sw); }, out, rng), {x, k, b});
  };
  t["maxpool"] = [rt](CounterRng& rng) {
    const std::size_t h = dim(rng, 1, 8), w = dim(rng, 1, 4), c = dim(rng, 1, 3);
    const std::size_t ph = dim(rng, 1, h), pw = dim(rng, 1, w), sh = dim(rng, 1, 3), sw = dim(rng, 1, 3);
    Tensor x = rt({h, w, c}, rng);
    const Shape out{(h - ph) / sh + 1, (w - pw) / sw + 1, c};
    return oracle::check_gradients(probe([=] { return ad::maxpool(x, ph, pw, sh, sw); }, out, rng), {x});
  };
  t["l_reg"] = [rt](CounterRng& rng) {
    const std::size_t d = dim(rng, 1, 6);
    Tensor a = rt({d, d}, rng);
    return oracle::check_gradients([=] { return ipcnet::model::l_reg(a); }, {a});
  };
  t["global_feature"] = [rt](CounterRng& rng) {
    const std::size_t n = dim(rng, 1, 8), c = dim(rng, 1, 5);
    Tensor x = rt({n, c}, rng);
    return oracle::check_gradients(probe([=] { return ipcnet::model::global_feature(x); }, {1, c}, rng), {x});
  };
  return t;
}

inline Result run_op(const std::string& name, const Trial& trial, std::size_t trials, std::uint64_t seed) {
  Result r{name};
  for (std::size_t i = 0; i < trials; ++i) {
    CounterRng rng(seed, i);
    const oracle::GradCheck g = trial(rng);
    ++r.trials;
    r.checked += g.checked;
    r.straddled += g.straddled;
    r.worst = std::max(r.worst, g.worst);
    if (!g.passed()) ++r.failed_trials;
  }
  return r;
}

// ---- end-to-end -----------------------------------------------------------

inline ipcnet::model::PointNetConfig tiny_pointnet(std::size_t k) {
  ipcnet::model::PointNetConfig c;
  c.num_classes = k;
  c.trunk = {8, 8, 8, 16, 32};
  c.local_layers = 2;
  c.head = {16, 8};
  c.input_tnet = {{8, 16}, {16, 8}};
  c.feature_tnet = {{8, 16}, {16, 8}};
  return c;
}

inline ipcnet::model::ModelConfig tiny_model(ipcnet::model::ModelKind kind, std::size_t points, std::size_t k) {
  ipcnet::model::ModelConfig c;
  c.kind = kind;
  c.pointnet = tiny_pointnet(k);
  c.points = points;
  c.interpoint = ipcnet::model::InterPointConfig::reference_chain().scaled_for(points, c.pointnet.local_width());
  return c;
}

// Perturbs every parameter so that no gradient path is trivially zero (the
// TNet output layers start at zero weight).
inline void jitter(ipcnet::model::SegmentationModel& m, CounterRng& rng, double amount) {
  for (auto& p : m.parameters())
    for (double& v : p.tensor.mutable_values()) v += rng.uniform(-amount, amount);
}

// One trial: fresh model, fresh cloud and labels, `coords` random
// coordinates drawn over all parameters plus the input points.
inline oracle::GradCheck model_trial(ipcnet::model::ModelKind kind, std::size_t points, std::size_t coords,
                                     CounterRng& rng) {
  const std::size_t k = 3;
  const auto config = tiny_model(kind, points, k);
  auto model = ipcnet::model::build_model(config, rng.next_u64());
  jitter(*model, rng, 0.1);
  Tensor cloud = oracle::random_tensor({points, 3}, rng, -1.0, 1.0, true);
  std::vector<int> labels(points);
  for (int& l : labels) l = static_cast<int>(rng.below(k));
  const double lambda = 0.1;
  auto build = [&]() {
    const auto fr = model->forward(cloud);
    Tensor loss = ad::cross_entropy(fr.logits, labels);
    if (fr.feature_matrix) loss = ad::add(loss, ad::scale(ipcnet::model::l_reg(*fr.feature_matrix), lambda));
    return loss;
  };
  std::vector<Tensor> leaves{cloud};
  for (auto& p : model->parameters()) leaves.push_back(p.tensor);
  oracle::GradProbe probe(build, leaves);
  std::size_t total = 0;
  for (const auto& l : leaves) total += l.size();
  // Coordinates are drawn uniformly over all leaves until `coords` of them
  // have a stencil on a single linear piece.
  oracle::GradCheck r;
  for (std::size_t attempts = 0; r.checked < coords && attempts < 50 * coords; ++attempts) {
    std::size_t flat = rng.below(total), l = 0;
    while (flat >= leaves[l].size()) flat -= leaves[l++].size();
    probe.probe(l, flat, r);
  }
  return r;
}

inline Result run_model(const std::string& name, ipcnet::model::ModelKind kind, std::size_t points, std::size_t trials,
                        std::size_t coords, std::uint64_t seed) {
  Result r{name};
  for (std::size_t i = 0; i < trials; ++i) {
    CounterRng rng(seed, i);
    const oracle::GradCheck g = model_trial(kind, points, coords, rng);
    ++r.trials;
    r.checked += g.checked;
    r.straddled += g.straddled;
    r.worst = std::max(r.worst, g.worst);
    if (!g.passed()) ++r.failed_trials;
  }
  return r;
}

}  // namespace grad_suite
