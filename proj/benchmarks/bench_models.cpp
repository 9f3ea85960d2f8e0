#include <benchmark/benchmark.h>

#include "ipcnet/datagen.hpp"
#include "ipcnet/geometry.hpp"
#include "ipcnet/models.hpp"

using namespace ipcnet;

namespace {

model::ModelKind kind_of(std::int64_t v) { return v == 0 ? model::ModelKind::PointNet : model::ModelKind::IPCNet; }

geometry::LabeledPointCloud rocket(std::size_t points) {
  return datagen::gen_dataset(datagen::ShapeSpec::for_family(datagen::Family::Rocket), 1, points, 1).front();
}

// Inference on one cloud; args are model (0 PointNet, 1 IPC-Net), points,
// preset (0 desk, 1 paper).
void BM_Forward(benchmark::State& state) {
  const auto points = static_cast<std::size_t>(state.range(1));
  const std::string preset = state.range(2) == 0 ? "desk" : "paper";
  const auto cloud = rocket(points);
  const auto m = model::build_model(model::make_model_config(kind_of(state.range(0)), preset, 3, points), 1);
  const ad::Tensor x = model::points_tensor(cloud.points);
  ad::NoGradScope no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(m->forward(x).logits.values().data());
  state.SetLabel(model::to_string(kind_of(state.range(0))) + "/" + preset);
}
BENCHMARK(BM_Forward)->Args({0, 512, 0})->Args({1, 512, 0})->Args({0, 2048, 1})->Args({1, 2048, 1})
    ->Unit(benchmark::kMillisecond);

// Forward plus backward of the segmentation loss on one cloud.
void BM_TrainStep(benchmark::State& state) {
  const std::size_t points = 512;
  const auto cloud = rocket(points);
  const auto m = model::build_model(model::make_model_config(kind_of(state.range(0)), "desk", 3, points), 1);
  const ad::Tensor x = model::points_tensor(cloud.points);
  for (auto _ : state) {
    m->zero_grad();
    ad::cross_entropy(m->forward(x).logits, cloud.labels).backward();
  }
  state.SetLabel(model::to_string(kind_of(state.range(0))) + "/desk");
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_SampleSurface(benchmark::State& state) {
  const auto mesh = datagen::gen_shape(datagen::ShapeSpec::for_family(datagen::Family::Rocket), 1);
  for (auto _ : state) benchmark::DoNotOptimize(geometry::sample_surface(mesh, 2048, 1).points.data());
}
BENCHMARK(BM_SampleSurface);

}  // namespace

BENCHMARK_MAIN();
