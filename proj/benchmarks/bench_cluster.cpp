#include <benchmark/benchmark.h>

#include "ldspin/cluster_engine.hpp"

namespace {

ldspin::Model ising_chain() {
  ldspin::OperatorMatrix zz =
      ldspin::kron(ldspin::pauli_z(), ldspin::pauli_z());
  return ldspin::Model{
      ldspin::pauli_z(),
      ldspin::Potential(
          2, {ldspin::BaseInteraction{{ldspin::Site(0), ldspin::Site(1)}, zz}})};
}

void BM_XiFree(benchmark::State& state) {
  ldspin::ClusterExpansion engine(ising_chain());
  const int K = static_cast<int>(state.range(0));
  // Warm the enumeration cache so the loop times weight evaluation.
  engine.xi_coeffs(ldspin::Complex(0.5, 0), K);
  double t = 0.0;
  for (auto _ : state) {
    t += 0.01;  // defeat the per-tilt cache
    benchmark::DoNotOptimize(engine.xi_coeffs(ldspin::Complex(t, 0), K));
  }
}
BENCHMARK(BM_XiFree)->Arg(2)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_KpWeightedSum(benchmark::State& state) {
  ldspin::ClusterExpansion engine(ising_chain());
  const int K = static_cast<int>(state.range(0));
  engine.kp_weighted_sum(0.1, 0.5, 0.03, K);
  double t = 0.0;
  for (auto _ : state) {
    t += 0.01;
    benchmark::DoNotOptimize(engine.kp_weighted_sum(0.1, t, 0.03, K));
  }
}
BENCHMARK(BM_KpWeightedSum)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_BoundarySum(benchmark::State& state) {
  ldspin::ClusterExpansion engine(ising_chain());
  const auto box = ldspin::LatticeBox::chain(static_cast<int>(state.range(0)));
  const auto outer =
      ldspin::LatticeBox::chain(static_cast<int>(state.range(0)) + 8, -4);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        engine.boundary_cluster_sum(box, outer, 0.8, 0.015, 3));
}
BENCHMARK(BM_BoundarySum)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace
