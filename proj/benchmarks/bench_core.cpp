// Microbenchmarks for the hot paths: quantizers, convolution/GEMM kernels,
// and a whole training step. Run ./adaqat_bench --benchmark_filter=... to
// narrow down.
#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "adaqat/experiment.hpp"
#include "adaqat/ops.hpp"
#include "adaqat/quantize.hpp"
#include "adaqat/rng.hpp"

using namespace adaqat;

namespace {

Tensor random_tensor(std::vector<int> shape, uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(static_cast<size_t>(shape_numel(shape)));
  for (float& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return Tensor::from(std::move(shape), std::move(v));
}

void BM_WeightQuantize(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  Tensor w = random_tensor({32, 32, 3, 3}, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(quantize_weights_forward(w, k));
  }
  state.SetItemsProcessed(state.iterations() * w.size());
}
BENCHMARK(BM_WeightQuantize)->Arg(2)->Arg(4)->Arg(8)->Arg(32);

void BM_ActivationQuantize(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  Tensor x = random_tensor({128, 16, 16, 16}, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pact_forward(x, 4.0f, k));
  }
  state.SetItemsProcessed(state.iterations() * x.size());
}
BENCHMARK(BM_ActivationQuantize)->Arg(2)->Arg(4)->Arg(8)->Arg(32);

void BM_Conv2d(benchmark::State& state) {
  Tensor x = random_tensor({16, 16, 16, 16}, 3);
  Tensor f = random_tensor({32, 16, 3, 3}, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d(x, f, 1, 1));
  }
}
BENCHMARK(BM_Conv2d);

void BM_Gemm(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Tensor a = random_tensor({n, n}, 5);
  Tensor b = random_tensor({n, n}, 6);
  std::vector<float> c(static_cast<size_t>(n) * n);
  for (auto _ : state) {
    std::fill(c.begin(), c.end(), 0.0f);
    gemm_nn(a.data(), b.data(), c.data(), n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * int64_t(n) * n * n);
}
BENCHMARK(BM_Gemm)->Arg(64)->Arg(256);

void BM_TrainStep(benchmark::State& state) {
  const bool quantized = state.range(0) != 0;
  const std::string text =
      std::string("[train]\ndataset = blobs\narch = mlp\nbatch_size = 128\n") +
      "quantize = " + (quantized ? "true" : "false") +
      "\n[controller]\nsearch_w = false\nsearch_a = false\n"
      "init_w = 4\ninit_a = 4\n"
      "[data]\nblob_classes = 10\nblob_dims = 32\nblob_count = 512\n";
  TrainConfig cfg = TrainConfig::from(Config::parse_text(text, "<bench>"));
  Trainer t(cfg);
  std::vector<int64_t> idx(128);
  std::iota(idx.begin(), idx.end(), 0);
  auto [batch, labels] = make_batch(t.train_split(), idx, nullptr, nullptr);
  for (auto _ : state) {
    benchmark::DoNotOptimize(t.train_step(batch, labels, 0.01f));
  }
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1);

void BM_ControllerStep(benchmark::State& state) {
  LossOracle oracle = [](int kw, int ka) {
    return 1.0f / static_cast<float>(kw * ka);
  };
  for (auto _ : state) {
    BitWidthController ctl(BitWidth::searched(6.5f, 1e-6f),
                           BitWidth::searched(6.5f, 1e-6f), 0.15f, 10);
    benchmark::DoNotOptimize(ctl.step(oracle, oracle(7, 7)));
  }
}
BENCHMARK(BM_ControllerStep);

}  // namespace

BENCHMARK_MAIN();
