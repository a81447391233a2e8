#include <benchmark/benchmark.h>

#include "matmodal/graph.hpp"
#include "matmodal/models.hpp"
#include "matmodal/nn.hpp"
#include "matmodal/rng.hpp"
#include "matmodal/xrd.hpp"

using namespace matmodal;

namespace {

CrystalStructure rock_salt_nacl() {
  CrystalStructure s;
  s.lattice = {5.64, 5.64, 5.64, 90, 90, 90};
  s.species = {11, 11, 11, 11, 17, 17, 17, 17};
  s.frac_coords = {{0, 0, 0},     {0, 0.5, 0.5}, {0.5, 0, 0.5}, {0.5, 0.5, 0},
                   {0.5, 0.5, 0.5}, {0.5, 0, 0},   {0, 0.5, 0},   {0, 0, 0.5}};
  return s;
}

void bm_simulate_pattern(benchmark::State& state) {
  const CrystalStructure s = rock_salt_nacl();
  XrdSimConfig cfg;
  const ScatteringTable& table = default_scattering_table();
  for (auto _ : state)
    benchmark::DoNotOptimize(simulate_pattern(s, cfg, table));
}
BENCHMARK(bm_simulate_pattern);

void bm_build_radius_graph(benchmark::State& state) {
  const CrystalStructure s = rock_salt_nacl();
  for (auto _ : state)
    benchmark::DoNotOptimize(build_radius_graph(s, 5.0, 12));
}
BENCHMARK(bm_build_radius_graph);

void bm_precompute_record(benchmark::State& state) {
  const auto records = synth_generate(1, 3);
  XrdSimConfig xrd_cfg;
  EncoderConfig enc_cfg;
  const ScatteringTable& stable = default_scattering_table();
  const ElementTable& etable = default_element_table();
  for (auto _ : state)
    benchmark::DoNotOptimize(
        precompute_record(records[0], xrd_cfg, enc_cfg, stable, etable));
}
BENCHMARK(bm_precompute_record);

void bm_conv1d_forward(benchmark::State& state) {
  Rng rng(1);
  std::vector<double> xv(901), kv(8 * 1 * 7);
  for (auto& v : xv) v = rng.normal();
  for (auto& v : kv) v = rng.normal();
  const nn::Tensor x = nn::Tensor::from({1, 901}, xv);
  const nn::Tensor k = nn::Tensor::from({8, 1, 7}, kv);
  const nn::Tensor b = nn::Tensor::zeros({8});
  for (auto _ : state)
    benchmark::DoNotOptimize(nn::conv1d(x, k, b, 2, 3));
}
BENCHMARK(bm_conv1d_forward);

void bm_conv1d_backward(benchmark::State& state) {
  Rng rng(1);
  std::vector<double> xv(901), kv(8 * 1 * 7);
  for (auto& v : xv) v = rng.normal();
  for (auto& v : kv) v = rng.normal();
  for (auto _ : state) {
    nn::Tensor x = nn::Tensor::from({1, 901}, xv, true);
    nn::Tensor k = nn::Tensor::from({8, 1, 7}, kv, true);
    nn::Tensor b = nn::Tensor::zeros({8}, true);
    nn::Tensor loss = nn::mean(nn::conv1d(x, k, b, 2, 3));
    loss.backward();
    benchmark::DoNotOptimize(k.grad());
  }
}
BENCHMARK(bm_conv1d_backward);

void bm_contrastive_loss(benchmark::State& state) {
  Rng rng(2);
  const int n = 32, d = 64;
  std::vector<double> v1(n * d), v2(n * d);
  for (auto& v : v1) v = rng.normal();
  for (auto& v : v2) v = rng.normal();
  for (auto _ : state) {
    nn::Tensor z1 = nn::Tensor::from({n, d}, v1, true);
    nn::Tensor z2 = nn::Tensor::from({n, d}, v2, true);
    nn::Tensor loss = nn::contrastive_loss(z1, z2, 0.1);
    loss.backward();
    benchmark::DoNotOptimize(z1.grad());
  }
}
BENCHMARK(bm_contrastive_loss);

}  // namespace

BENCHMARK_MAIN();
