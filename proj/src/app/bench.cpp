#include "tailrisk/app/bench.hpp"

#include <cmath>
#include <string>

#include "tailrisk/errors.hpp"
#include "tailrisk/return_levels.hpp"
#include "tailrisk/rng.hpp"

namespace tailrisk::bench {
namespace {

struct Replicate {
  bool ok = false;
  double classic = 0.0;
  double finetuned = 0.0;
  double lambda = 0.0;
};

void mean_se(const std::vector<double>& v, double& mean, double& se) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  se = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size())) : 0.0;
}

}  // namespace

BenchReport run_bench(const BenchConfig& config) {
  if (config.replicates < 2) throw ConfigError("bench needs at least 2 replicates");
  if (config.families.empty() || config.sizes.empty()) throw ConfigError("bench needs families and sizes");
  if (!(config.obs_divisor > 0.0)) throw ConfigError("obs_divisor must be positive");
  for (const auto& f : config.families) validate(f);

  BenchReport report;
  std::size_t cell = 0;
  for (const auto& family : config.families) {
    for (std::size_t n : config.sizes) {
      ReturnSpec spec;
      spec.period_years = config.period_years;
      spec.obs_per_year = static_cast<double>(n) / config.obs_divisor;
      spec.n = n;
      spec.validate();
      const double q_true = family_quantile(family, spec.level());
      if (!(q_true > 0.0)) throw ConfigError("bench target quantile must be positive for the asymmetric loss");
      CalibrationOptions opts;
      opts.k = config.k;
      opts.threshold_quantile = config.threshold_quantile;
      const std::uint64_t cell_seed = derive_seed(config.seed, cell++);

      std::vector<Replicate> reps(config.replicates);
      const auto count = static_cast<long>(config.replicates);
#pragma omp parallel for schedule(dynamic)
      for (long r = 0; r < count; ++r) {
        Rng rng(derive_seed(cell_seed, static_cast<std::uint64_t>(r)));
        Replicate& out = reps[static_cast<std::size_t>(r)];
        try {
          const auto y = sample(family, n, rng);
          const auto ft = calibrate_lambda(y, spec, opts, rng);
          const double classic = return_level(ft.fit, spec).point;
          out.classic = asymmetric_loss(q_true, classic);
          out.finetuned = asymmetric_loss(q_true, ft.q_op);
          out.lambda = ft.lambda_op;
          out.ok = std::isfinite(out.classic) && std::isfinite(out.finetuned);
        } catch (const std::exception&) {
          out.ok = false;
        }
      }

      BenchRow row;
      row.family = family;
      row.n = n;
      row.true_quantile = q_true;
      std::vector<double> lc, lf;
      double lambda_sum = 0.0;
      for (const auto& r : reps) {
        if (!r.ok) {
          ++row.failures;
          continue;
        }
        lc.push_back(r.classic);
        lf.push_back(r.finetuned);
        lambda_sum += r.lambda;
      }
      if (static_cast<double>(row.failures) > 0.1 * static_cast<double>(config.replicates)) {
        throw EstimationError(family_name(family.tag) + " n=" + std::to_string(n) + ": " +
                              std::to_string(row.failures) + " of " + std::to_string(config.replicates) +
                              " replicates failed");
      }
      row.replicates = lc.size();
      if (row.replicates == 0) throw EstimationError("no successful replicate");
      mean_se(lc, row.mean_loss_classic, row.se_classic);
      mean_se(lf, row.mean_loss_finetuned, row.se_finetuned);
      row.mean_lambda = lambda_sum / static_cast<double>(row.replicates);
      report.rows.push_back(row);
    }
  }
  return report;
}

}  // namespace tailrisk::bench
