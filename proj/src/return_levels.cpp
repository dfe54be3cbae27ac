#include "tailrisk/return_levels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/tools/minima.hpp>

#include "tailrisk/errors.hpp"
#include "tailrisk/kernels.hpp"

namespace tailrisk {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Profile log-likelihood in theta = xi/sigma. For fixed theta the MLE of xi is
// mean(log(1 + theta z)) and sigma = xi/theta, leaving -n log(sigma) - n (1 + xi).
class GpdProfile {
 public:
  explicit GpdProfile(std::span<const double> z) : z_(z) {
    for (double v : z) {
      sum_ += v;
      max_ = std::max(max_, v);
    }
    mean_ = sum_ / static_cast<double>(z.size());
  }

  double mean() const { return mean_; }
  double max() const { return max_; }

  double xi(double theta) const {
    double s = 0.0;
    for (double v : z_) s += std::log1p(theta * v);
    return s / static_cast<double>(z_.size());
  }

  bool near_zero(double theta) const { return std::abs(theta) * max_ < 1e-12; }

  double loglik(double theta) const {
    const auto n = static_cast<double>(z_.size());
    if (near_zero(theta)) return -n * std::log(mean_) - n;
    if (!(1.0 + theta * max_ > 0.0)) return kNegInf;
    const double x = xi(theta);
    if (!(x > -1.0)) return kNegInf;
    const double sigma = x / theta;
    if (!(sigma > 0.0) || !std::isfinite(sigma)) return kNegInf;
    return -n * std::log(sigma) - n * (1.0 + x);
  }

  GpdParams params(double theta) const {
    if (near_zero(theta)) return {mean_, 0.0};
    const double x = xi(theta);
    return {x / theta, x};
  }

 private:
  std::span<const double> z_;
  double sum_ = 0.0;
  double max_ = 0.0;
  double mean_ = 0.0;
};

std::vector<double> theta_candidates(double z_max, double z_mean) {
  std::vector<double> thetas;
  const double lower = -1.0 / z_max;
  // Negative side: lower (1 - e^-t), dense near both 0 and the support limit.
  for (int i = 0; i < 60; ++i) {
    const double t = std::exp(std::log(1e-6) + (std::log(40.0) - std::log(1e-6)) * i / 59.0);
    thetas.push_back(lower * -std::expm1(-t));
  }
  thetas.push_back(0.0);
  for (int i = 0; i < 60; ++i) {
    const double c = std::exp(std::log(1e-6) + (std::log(1e6) - std::log(1e-6)) * i / 59.0);
    thetas.push_back(c / z_mean);
  }
  std::sort(thetas.begin(), thetas.end());
  return thetas;
}

}  // namespace

void ReturnSpec::validate() const {
  if (!(period_years > 0.0) || !std::isfinite(period_years)) throw DomainError("return period must be positive");
  if (!(obs_per_year > 0.0) || !std::isfinite(obs_per_year))
    throw DomainError("observations per year must be positive");
  if (n < 1) throw DomainError("sample size must be at least 1");
  const double p = exceedance_probability();
  if (!(p > 0.0 && p < 1.0)) throw DomainError("target quantile level must lie in (0, 1)");
}

double ReturnSpec::exceedance_probability() const {
  double denom = period_years * obs_per_year;
  if (convention == LevelConvention::IncludeSample) denom *= static_cast<double>(n);
  return 1.0 / denom;
}

GpdFit fit_gpd(std::span<const double> z) {
  if (z.size() < 2) throw EstimationError("GPD fit needs at least two exceedances");
  for (double v : z) {
    if (!std::isfinite(v) || v < 0.0) throw DomainError("GPD exceedances must be finite and nonnegative");
  }
  GpdProfile profile(z);
  if (!(profile.max() > 0.0)) throw EstimationError("GPD fit: all exceedances are zero");

  const auto thetas = theta_candidates(profile.max(), profile.mean());
  std::vector<double> values(thetas.size());
  std::size_t best = 0;
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    values[i] = profile.loglik(thetas[i]);
    if (values[i] > values[best]) best = i;
  }
  if (!std::isfinite(values[best])) throw EstimationError("GPD fit: profile likelihood is not finite anywhere");

  const double lo = thetas[best == 0 ? 0 : best - 1];
  const double hi = thetas[std::min(best + 1, thetas.size() - 1)];
  double theta = thetas[best];
  if (hi > lo) {
    std::uintmax_t iterations = 200;
    const auto r = boost::math::tools::brent_find_minima([&](double t) { return -profile.loglik(t); }, lo, hi, 50,
                                                         iterations);
    if (-r.second >= values[best]) theta = r.first;
  }

  GpdFit fit;
  fit.params = profile.params(theta);
  if (!(fit.params.xi > -1.0 + 1e-6)) throw EstimationError("GPD fit: shape estimate at the xi = -1 boundary");
  fit.n_exceed = z.size();
  fit.n_total = z.size();
  fit.loglik = gpd_loglik(z, fit.params);

  const auto h = gpd_loglik_hessian(z, fit.params);
  const double i00 = -h[0], i01 = -h[1], i11 = -h[2];
  const double det = i00 * i11 - i01 * i01;
  if (!(i00 > 0.0 && det > 0.0) || !std::isfinite(det)) {
    throw EstimationError("GPD fit: observed information is not positive definite (sigma=" +
                          std::to_string(fit.params.sigma) + ", xi=" + std::to_string(fit.params.xi) + ")");
  }
  fit.cov = {{{i11 / det, -i01 / det}, {-i01 / det, i00 / det}}};
  return fit;
}

GpdFit fit_pot_at(std::span<const double> y, double threshold, const PotOptions& options) {
  std::vector<double> z;
  for (double v : y) {
    if (!std::isfinite(v)) throw DomainError("POT fit: non-finite observation");
    if (v > threshold) z.push_back(v - threshold);
  }
  if (z.size() < options.min_exceedances || z.size() < 2) {
    throw EstimationError("POT fit: " + std::to_string(z.size()) + " exceedances above " + std::to_string(threshold) +
                          ", need " + std::to_string(options.min_exceedances));
  }
  GpdFit fit = fit_gpd(z);
  fit.threshold = threshold;
  fit.n_total = y.size();
  return fit;
}

GpdFit fit_pot(std::span<const double> y, double threshold_quantile, const PotOptions& options) {
  if (y.empty()) throw DomainError("POT fit of an empty sample");
  return fit_pot_at(y, empirical_quantile(y, threshold_quantile), options);
}

ReturnLevelEstimate return_level(const GpdFit& fit, const ReturnSpec& spec, double confidence) {
  spec.validate();
  validate(fit.params);
  if (!(confidence > 0.0 && confidence < 1.0)) throw DomainError("confidence must lie in (0, 1)");
  if (fit.n_total == 0 || fit.n_exceed == 0) throw DomainError("return level from an empty fit");
  const double zeta = static_cast<double>(fit.n_exceed) / static_cast<double>(fit.n_total);
  const double m = zeta / spec.exceedance_probability();
  if (!(m > 1.0)) throw DomainError("target return level does not exceed the POT threshold");

  const double sigma = fit.params.sigma;
  const double xi = fit.params.xi;
  const double log_m = std::log(m);
  double point, d_sigma, d_xi;
  if (std::abs(xi) < kXiZeroTol) {
    d_sigma = log_m;
    d_xi = sigma * log_m * log_m / 2.0;
  } else {
    d_sigma = std::expm1(xi * log_m) / xi;
    if (std::abs(xi * log_m) < 1e-5) {
      d_xi = sigma * (log_m * log_m / 2.0 + xi * std::pow(log_m, 3) / 3.0 + xi * xi * std::pow(log_m, 4) / 8.0);
    } else {
      d_xi = sigma * (log_m * std::exp(xi * log_m) / xi - std::expm1(xi * log_m) / (xi * xi));
    }
  }
  point = fit.threshold + sigma * d_sigma;

  const auto& c = fit.cov;
  const double var = d_sigma * d_sigma * c[0][0] + 2.0 * d_sigma * d_xi * c[0][1] + d_xi * d_xi * c[1][1];
  if (!(var >= 0.0) || !std::isfinite(var)) throw EstimationError("return level: degenerate delta-method variance");
  const double half = normal_quantile(0.5 * (1.0 + confidence)) * std::sqrt(var);
  // The level lies above the threshold, so the interval is cut there.
  return {point, std::max(point - half, fit.threshold), point + half, confidence};
}

double AsymmetricLoss::operator()(double q_true, double q_hat) const {
  if (!std::isfinite(q_true) || !std::isfinite(q_hat)) throw DomainError("loss arguments must be finite");
  if (!(q_true > 0.0)) throw DomainError("loss requires a positive true level");
  const double low = (1.0 - band) * q_true;
  const double high = (1.0 + band) * q_true;
  if (q_hat < low) return under_weight * (low - q_hat);
  if (q_hat > high) return over_weight * (q_hat - high);
  return 0.0;
}

double asymmetric_loss(double q_true, double q_hat) { return AsymmetricLoss{}(q_true, q_hat); }

namespace {

std::vector<double> uniform_grid(const ReturnLevelEstimate& ci, std::size_t points) {
  std::vector<double> grid(points);
  const double h = ci.width() / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) grid[i] = ci.lower + h * static_cast<double>(i);
  grid.back() = ci.upper;
  return grid;
}

void check_interval(const ReturnLevelEstimate& ci, std::size_t grid_points) {
  if (!std::isfinite(ci.lower) || !std::isfinite(ci.upper) || ci.lower > ci.upper)
    throw DomainError("confidence interval must be finite with lower <= upper");
  if (grid_points < 3) throw DomainError("loss grid needs at least three points");
  if (!(ci.lower > 0.0)) throw DomainError("expected loss needs an interval of positive levels");
}

// Same trapezoid rule as the grid kernel, at an off-grid candidate q.
double expected_loss_at(std::span<const double> grid, const AsymmetricLoss& loss, double q) {
  const double h = (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1);
  double total = 0.5 * (loss(grid.front(), q) + loss(grid.back(), q));
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) total += loss(grid[i], q);
  return total * h;
}

}  // namespace

double expected_loss_argmin(const ReturnLevelEstimate& ci, const AsymmetricLoss& loss, std::size_t grid_points) {
  check_interval(ci, grid_points);
  if (ci.width() == 0.0) return ci.lower;
  const auto grid = uniform_grid(ci, grid_points);
  std::vector<double> values(grid.size());
  kernels::expected_loss_parallel(grid, loss, values);
  // Ties (a flat zero-loss stretch inside the band) resolve to the largest level.
  std::size_t best = 0;
  for (std::size_t j = 1; j < values.size(); ++j)
    if (values[j] <= values[best]) best = j;

  // The objective is convex in q, so golden-section on the neighbouring cells finds the minimizer.
  double a = grid[best == 0 ? 0 : best - 1];
  double b = grid[std::min(best + 1, grid.size() - 1)];
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = expected_loss_at(grid, loss, c);
  double fd = expected_loss_at(grid, loss, d);
  const double tol = 1e-12 * std::max(1.0, std::abs(ci.upper));
  for (int it = 0; it < 200 && b - a > tol; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = expected_loss_at(grid, loss, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = expected_loss_at(grid, loss, d);
    }
  }
  const double refined = 0.5 * (a + b);
  const double f_refined = expected_loss_at(grid, loss, refined);
  if (f_refined < values[best] || (f_refined == values[best] && refined > grid[best])) return refined;
  return grid[best];
}

double fine_tuned_estimate(const ReturnLevelEstimate& ci, double lambda, const AsymmetricLoss& loss,
                           std::size_t grid_points) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be a finite nonnegative number");
  return expected_loss_argmin(ci, loss, grid_points) - lambda * ci.width();
}

std::vector<LossSurfacePoint> loss_surface(const ReturnLevelEstimate& ci, const AsymmetricLoss& loss,
                                           std::size_t grid_points) {
  check_interval(ci, grid_points);
  if (ci.width() == 0.0) return {{ci.lower, 0.0}};
  const auto grid = uniform_grid(ci, grid_points);
  std::vector<double> values(grid.size());
  kernels::expected_loss_parallel(grid, loss, values);
  std::vector<LossSurfacePoint> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = {grid[i], values[i]};
  return out;
}

FineTuneResult calibrate_lambda(std::span<const double> y, const ReturnSpec& spec, const CalibrationOptions& options,
                                Rng& rng) {
  spec.validate();
  const std::size_t k = options.k;
  if (k < 2) throw DomainError("calibration needs at least two folds");
  const std::size_t n = y.size();
  const std::size_t fold_len = n / k;
  if (fold_len < 2) throw DomainError("sample too short for the requested number of folds");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (options.shuffle) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  }

  ReturnSpec fold_spec = spec;
  fold_spec.obs_per_year = spec.obs_per_year / static_cast<double>(k);
  fold_spec.n = fold_len;

  FineTuneResult result;
  result.k = k;
  std::vector<double> fold_values, complement;
  for (std::size_t i = 0; i < k; ++i) {
    FoldDiagnostics diag;
    diag.index = i;
    fold_values.clear();
    complement.clear();
    for (std::size_t r = 0; r < n; ++r) {
      const bool in_fold = r >= i * fold_len && r < (i + 1) * fold_len;
      (in_fold ? fold_values : complement).push_back(y[order[r]]);
    }
    try {
      const GpdFit fit = fit_pot(fold_values, options.threshold_quantile, options.pot);
      diag.ci = return_level(fit, fold_spec, options.confidence);
      diag.argmin = expected_loss_argmin(diag.ci, options.loss, options.grid_points);
      diag.target = empirical_quantile(complement, fold_spec.level());
      diag.lambda = diag.ci.width() > 0.0 ? std::max(0.0, (diag.argmin - diag.target) / diag.ci.width()) : 0.0;
      diag.ok = true;
      result.lambdas.push_back(diag.lambda);
    } catch (const std::exception& e) {
      diag.message = e.what();
      result.warnings.push_back("fold " + std::to_string(i) + " skipped: " + e.what());
    }
    result.folds.push_back(diag);
  }
  const std::size_t failures = k - result.lambdas.size();
  if (result.lambdas.empty() || 2 * failures > k) {
    throw EstimationError("lambda calibration: " + std::to_string(failures) + " of " + std::to_string(k) +
                          " folds failed");
  }

  result.lambda_op = median(result.lambdas);
  result.fit = fit_pot(y, options.threshold_quantile, options.pot);
  result.ci = return_level(result.fit, spec, options.confidence);
  result.argmin = expected_loss_argmin(result.ci, options.loss, options.grid_points);
  result.q_op = result.argmin - result.lambda_op * result.ci.width();
  return result;
}

double classic_estimate(std::span<const double> y, const ReturnSpec& spec, double threshold_quantile) {
  return return_level(fit_pot(y, threshold_quantile), spec).point;
}

std::vector<StabilityPoint> threshold_stability(std::span<const double> y, std::span<const double> quantile_grid,
                                                const PotOptions& options) {
  std::vector<StabilityPoint> out;
  for (double tq : quantile_grid) {
    StabilityPoint p;
    p.threshold_quantile = tq;
    p.threshold = empirical_quantile(y, tq);
    try {
      const GpdFit fit = fit_pot_at(y, p.threshold, options);
      p.n_exceed = fit.n_exceed;
      p.sigma = fit.params.sigma;
      p.xi = fit.params.xi;
      p.modified_scale = fit.params.sigma - fit.params.xi * fit.threshold;
      p.ok = true;
    } catch (const EstimationError&) {
      p.ok = false;
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace tailrisk
