#include <benchmark/benchmark.h>

#include "tailorsum/decode.hpp"
#include "tailorsum/metrics.hpp"
#include "tailorsum/training.hpp"

using namespace tailorsum;

namespace {

struct Fixture {
  ModelParams params;
  std::vector<TokenId> source;
  std::vector<TokenId> targets;
};

// Source length and hidden size come from the benchmark arguments.
Fixture make_fixture(std::size_t length, std::size_t hidden) {
  const ModelDims dims{200, 32, hidden, hidden};
  Rng rng = make_stream(1, "bench");
  Fixture f{ModelParams::initialize(dims, rng), {}, {}};
  for (std::size_t i = 0; i < length; ++i) f.source.push_back(4 + uniform_index(rng, dims.vocab - 4));
  for (std::size_t i = 0; i < length / 4; ++i) f.targets.push_back(f.source[i * 4]);
  f.targets.push_back(kStopId);
  return f;
}

void BM_Encode(benchmark::State& state) {
  const Fixture f = make_fixture(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(encode(f.params, f.source));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Encode)->Args({50, 32})->Args({400, 32})->Args({400, 128});

void BM_DecoderStep(benchmark::State& state) {
  const Fixture f = make_fixture(state.range(0), state.range(1));
  const EncoderStates enc = encode(f.params, f.source);
  const Vec coverage(enc.size(), 0.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(decoder_step(f.params, enc, enc.final_state, kStartId, {}, coverage));
  }
}
BENCHMARK(BM_DecoderStep)->Args({50, 32})->Args({400, 32})->Args({400, 128});

void BM_SequenceLossWithGradients(benchmark::State& state) {
  const Fixture f = make_fixture(state.range(0), state.range(1));
  ModelParams grads = ModelParams::zeros(f.params.dims);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sequence_loss(f.params, f.source, f.targets, 1.0, 1.0, &grads));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.targets.size()));
}
BENCHMARK(BM_SequenceLossWithGradients)->Args({50, 32})->Args({200, 32})->Args({200, 64});

void BM_BeamSearch(benchmark::State& state) {
  const Fixture f = make_fixture(100, 32);
  const PointerGeneratorStep model(f.params, f.source);
  DecodeConfig cfg;
  cfg.beam_width = static_cast<std::size_t>(state.range(0));
  cfg.max_length = 20;
  for (auto _ : state) benchmark::DoNotOptimize(beam_search(model, cfg));
}
BENCHMARK(BM_BeamSearch)->Arg(1)->Arg(4)->Arg(8);

void BM_RougeL(benchmark::State& state) {
  Rng rng = make_stream(2, "rouge");
  std::vector<std::string> a(state.range(0)), b(state.range(0));
  for (auto& w : a) w = "w" + std::to_string(uniform_index(rng, 50));
  for (auto& w : b) w = "w" + std::to_string(uniform_index(rng, 50));
  for (auto _ : state) benchmark::DoNotOptimize(rouge_l_f1(a, b));
}
BENCHMARK(BM_RougeL)->Arg(50)->Arg(400);

}  // namespace
BENCHMARK_MAIN();
