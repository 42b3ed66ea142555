// Serial reference vs parallel kernels on rendered frames.

#include "caplab/synthetic.hpp"
#include "caplab/vision.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace caplab;
using namespace caplab::vision;

namespace {

Frame scaled_frame(int scale) {
  const Frame base = synthetic::render_scene({2, 3, -2, 0.02, 7});
  Frame f(base.width * scale, base.height * scale);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      const std::uint8_t* p = base.at(x / scale, y / scale);
      f.set(x, y, p[0], p[1], p[2]);
    }
  return f;
}

void BM_MaskReference(benchmark::State& state) {
  const Frame f = scaled_frame(static_cast<int>(state.range(0)));
  const DetectorConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(reference::apply_mask(f, cfg));
  state.SetItemsProcessed(state.iterations() * f.width * f.height);
}

void BM_MaskParallel(benchmark::State& state) {
  const Frame f = scaled_frame(static_cast<int>(state.range(0)));
  const DetectorConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(apply_mask(f, cfg));
  state.SetItemsProcessed(state.iterations() * f.width * f.height);
}

void BM_BlobsReference(benchmark::State& state) {
  const BinaryImage m = apply_mask(scaled_frame(static_cast<int>(state.range(0))), {});
  for (auto _ : state) benchmark::DoNotOptimize(reference::total_blob_area(m, 20));
  state.SetItemsProcessed(state.iterations() * m.width * m.height);
}

void BM_BlobsParallel(benchmark::State& state) {
  const BinaryImage m = apply_mask(scaled_frame(static_cast<int>(state.range(0))), {});
  for (auto _ : state) benchmark::DoNotOptimize(total_blob_area(m, 20));
  state.SetItemsProcessed(state.iterations() * m.width * m.height);
}

std::vector<Frame> corpus(int n) {
  synthetic::CorpusGenerator gen(1);
  std::vector<Frame> frames;
  for (int i = 0; i < n; ++i) frames.push_back(gen.next().frame);
  return frames;
}

void BM_DetectSerial(benchmark::State& state) {
  const auto frames = corpus(static_cast<int>(state.range(0)));
  const DetectorConfig cfg;
  const Roi roi = synthetic::default_roi();
  for (auto _ : state)
    for (const auto& f : frames) benchmark::DoNotOptimize(reference::detect(f, roi, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_DetectBatch(benchmark::State& state) {
  const auto frames = corpus(static_cast<int>(state.range(0)));
  const DetectorConfig cfg;
  const Roi roi = synthetic::default_roi();
  for (auto _ : state) benchmark::DoNotOptimize(detect_batch(frames, roi, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
  state.counters["threads"] = kernel_threads();
}

}  // namespace

BENCHMARK(BM_MaskReference)->Arg(1)->Arg(4);
BENCHMARK(BM_MaskParallel)->Arg(1)->Arg(4);
BENCHMARK(BM_BlobsReference)->Arg(1)->Arg(4);
BENCHMARK(BM_BlobsParallel)->Arg(1)->Arg(4);
BENCHMARK(BM_DetectSerial)->Arg(64);
BENCHMARK(BM_DetectBatch)->Arg(64);

BENCHMARK_MAIN();
