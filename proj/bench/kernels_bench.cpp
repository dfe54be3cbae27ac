#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "tailrisk/dependence.hpp"
#include "tailrisk/distributions.hpp"
#include "tailrisk/kernels.hpp"

using namespace tailrisk;

namespace {

std::vector<double> loss_grid(std::size_t m) {
  std::vector<double> g(m);
  for (std::size_t i = 0; i < m; ++i) g[i] = 90.0 + 20.0 * static_cast<double>(i) / static_cast<double>(m - 1);
  return g;
}

void BM_ExpectedLoss(benchmark::State& state, bool parallel) {
  const auto grid = loss_grid(static_cast<std::size_t>(state.range(0)));
  std::vector<double> out(grid.size());
  for (auto _ : state) {
    if (parallel) {
      kernels::expected_loss_parallel(grid, {}, out);
    } else {
      kernels::expected_loss_serial(grid, {}, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_CopulaHits(benchmark::State& state, bool parallel) {
  Eigen::MatrixXd corr = Eigen::MatrixXd::Constant(3, 3, 0.5);
  corr.diagonal().setOnes();
  const Eigen::MatrixXd chol = corr.llt().matrixL();
  const std::vector<double> z(3, gumbel_to_normal(2.25));
  const auto draws = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state) {
    const auto hits = parallel ? kernels::copula_hits_parallel(chol, z, draws, 7, {})
                               : kernels::copula_hits_serial(chol, z, draws, 7, {});
    benchmark::DoNotOptimize(hits);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}

std::vector<std::vector<std::uint8_t>> exceedance_flags(std::size_t d, std::size_t n) {
  Rng rng(3);
  std::vector<std::vector<std::uint8_t>> e(d, std::vector<std::uint8_t>(n));
  for (auto& c : e) {
    for (auto& v : c) v = rng.uniform() > 0.9 ? 1 : 0;
  }
  return e;
}

void BM_PairwiseCounts(benchmark::State& state, bool parallel) {
  const auto e = exceedance_flags(static_cast<std::size_t>(state.range(0)), 21000);
  for (auto _ : state) {
    auto c = parallel ? kernels::pairwise_joint_counts_parallel(e) : kernels::pairwise_joint_counts_serial(e);
    benchmark::DoNotOptimize(c.data());
  }
}

void BM_Variogram(benchmark::State& state, bool parallel) {
  const std::size_t n = 21000, d = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  Eigen::MatrixXd ls(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) ls(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::log(rng.uniform());
  }
  std::vector<std::vector<std::size_t>> roots(d);
  for (std::size_t m = 0; m < d; ++m) {
    for (std::size_t i = 0; i < n; ++i) {
      if (ls(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) < std::log(0.1)) roots[m].push_back(i);
    }
  }
  for (auto _ : state) {
    auto g = parallel ? kernels::variogram_parallel(ls, roots) : kernels::variogram_serial(ls, roots);
    benchmark::DoNotOptimize(g.data());
  }
}

}  // namespace

BENCHMARK_CAPTURE(BM_ExpectedLoss, serial, false)->Arg(501)->Arg(2001);
BENCHMARK_CAPTURE(BM_ExpectedLoss, parallel, true)->Arg(501)->Arg(2001);
BENCHMARK_CAPTURE(BM_CopulaHits, serial, false)->Arg(1 << 20);
BENCHMARK_CAPTURE(BM_CopulaHits, parallel, true)->Arg(1 << 20);
BENCHMARK_CAPTURE(BM_PairwiseCounts, serial, false)->Arg(50);
BENCHMARK_CAPTURE(BM_PairwiseCounts, parallel, true)->Arg(50);
BENCHMARK_CAPTURE(BM_Variogram, serial, false)->Arg(50);
BENCHMARK_CAPTURE(BM_Variogram, parallel, true)->Arg(50);

BENCHMARK_MAIN();
