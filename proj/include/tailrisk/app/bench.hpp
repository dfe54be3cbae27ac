#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tailrisk/distributions.hpp"

namespace tailrisk::bench {

/// Fine-tuning versus classic return levels on simulated data. Sample n has
/// n / obs_divisor observations per year, so the target level is
/// 1 - obs_divisor / (period_years n).
struct BenchConfig {
  std::vector<SimFamily> families{SimFamily::frechet(2.0), SimFamily::normal(), SimFamily::student_t(4.0),
                                  SimFamily::burr(1.0, 2.0)};
  std::vector<std::size_t> sizes{5000};
  std::size_t replicates = 100;
  double period_years = 200.0;
  double obs_divisor = 70.0;
  std::size_t k = 7;
  double threshold_quantile = 0.95;
  std::uint64_t seed = 1;
};

struct BenchRow {
  SimFamily family;
  std::size_t n = 0;
  std::size_t replicates = 0;  // successful
  std::size_t failures = 0;
  double true_quantile = 0.0;
  double mean_loss_classic = 0.0;
  double se_classic = 0.0;
  double mean_loss_finetuned = 0.0;
  double se_finetuned = 0.0;
  double mean_lambda = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
};

// Replicate r of cell c uses Rng(derive_seed(derive_seed(seed, c), r)), so the
// report does not depend on the thread count. A failed replicate is excluded;
// more than 10% failures in a cell is an EstimationError.
BenchReport run_bench(const BenchConfig& config);

}  // namespace tailrisk::bench
