#include <benchmark/benchmark.h>

#include "ldspin/exact.hpp"

namespace {

ldspin::Model ising_chain() {
  ldspin::OperatorMatrix zz =
      ldspin::kron(ldspin::pauli_z(), ldspin::pauli_z());
  return ldspin::Model{
      ldspin::pauli_z(),
      ldspin::Potential(
          2, {ldspin::BaseInteraction{{ldspin::Site(0), ldspin::Site(1)}, zz}})};
}

void BM_FiniteF(benchmark::State& state) {
  ldspin::ExactEngine exact(ising_chain());
  const auto box = ldspin::LatticeBox::chain(static_cast<int>(state.range(0)));
  exact.finite_F(box, 0.5, 0.2);  // warm the eigensystem cache
  double t = 0;
  for (auto _ : state) {
    t += 0.01;
    benchmark::DoNotOptimize(exact.finite_F(box, t, 0.2));
  }
}
BENCHMARK(BM_FiniteF)->Arg(6)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_GibbsState(benchmark::State& state) {
  ldspin::ExactEngine exact(ising_chain());
  const auto box = ldspin::LatticeBox::chain(static_cast<int>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(exact.gibbs_state(box, 0.4));
}
BENCHMARK(BM_GibbsState)->Arg(6)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace
