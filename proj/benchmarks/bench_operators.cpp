#include <benchmark/benchmark.h>

#include <random>

#include "ldspin/operators.hpp"

namespace {

ldspin::OperatorMatrix random_hermitian(int n, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist;
  ldspin::OperatorMatrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = ldspin::Complex(dist(gen), dist(gen));
  return ((m + m.adjoint()) / 2.0).eval();
}

void BM_HermEig(benchmark::State& state) {
  const auto a = random_hermitian(static_cast<int>(state.range(0)), 7);
  for (auto _ : state) benchmark::DoNotOptimize(ldspin::herm_eig(a));
}
BENCHMARK(BM_HermEig)->Arg(64)->Arg(128)->Arg(256);

void BM_MatExp(benchmark::State& state) {
  const auto a = random_hermitian(static_cast<int>(state.range(0)), 8);
  for (auto _ : state)
    benchmark::DoNotOptimize(ldspin::mat_exp(a, ldspin::Complex(0.3, 0.1)));
}
BENCHMARK(BM_MatExp)->Arg(64)->Arg(128);

void BM_Kron(benchmark::State& state) {
  const auto a = random_hermitian(static_cast<int>(state.range(0)), 9);
  const auto b = random_hermitian(static_cast<int>(state.range(0)), 10);
  for (auto _ : state) benchmark::DoNotOptimize(ldspin::kron(a, b));
}
BENCHMARK(BM_Kron)->Arg(8)->Arg(16)->Arg(32);

}  // namespace
