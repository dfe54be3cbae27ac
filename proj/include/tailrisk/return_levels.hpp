#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tailrisk/distributions.hpp"
#include "tailrisk/rng.hpp"

namespace tailrisk {

// How the target exceedance probability is formed from (T, n_Y, n).
//   Standard:      1 / (T n_Y)
//   IncludeSample: 1 / (T n_Y n), the literal reading with the sample size in the level.
enum class LevelConvention { Standard, IncludeSample };

/// T-year return level target: the level exceeded on average once every
/// `period_years` years when `obs_per_year` observations are made per year.
struct ReturnSpec {
  double period_years = 200.0;
  double obs_per_year = 300.0;
  std::size_t n = 1;
  LevelConvention convention = LevelConvention::Standard;

  void validate() const;
  double exceedance_probability() const;
  double level() const { return 1.0 - exceedance_probability(); }
};

/// Peaks-over-threshold GPD fit. `cov` is the inverse observed information of
/// (sigma, xi) at the MLE.
struct GpdFit {
  GpdParams params;
  double threshold = 0.0;
  std::size_t n_exceed = 0;
  std::size_t n_total = 0;
  std::array<std::array<double, 2>, 2> cov{};
  double loglik = 0.0;
};

struct PotOptions {
  std::size_t min_exceedances = 30;
};

// Maximum-likelihood GPD fit to exceedances z >= 0 (threshold 0).
// Maximizes the profile likelihood in theta = xi/sigma over xi > -1.
GpdFit fit_gpd(std::span<const double> exceedances);

// Fit to y - u over the points strictly above u = empirical_quantile(y, threshold_quantile).
GpdFit fit_pot(std::span<const double> y, double threshold_quantile, const PotOptions& options = {});
GpdFit fit_pot_at(std::span<const double> y, double threshold, const PotOptions& options = {});

struct ReturnLevelEstimate {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double confidence = 0.95;

  double width() const { return upper - lower; }
};

// Point estimate u + sigma/xi ((zeta T n_Y)^xi - 1), zeta = n_u/n, with a
// delta-method confidence interval from the fit covariance, its lower end
// truncated at the threshold.
ReturnLevelEstimate return_level(const GpdFit& fit, const ReturnSpec& spec, double confidence = 0.95);

/// Piecewise-linear loss with a tolerance band:
///   under_weight ((1-band) q - q_hat)   if q_hat < (1-band) q
///   0                                    if |q - q_hat| <= band q
///   over_weight (q_hat - (1+band) q)     if q_hat > (1+band) q
/// Defaults give the 0.9 / 0.1 / 1% scoring rule. Requires q > 0.
struct AsymmetricLoss {
  double under_weight = 0.9;
  double over_weight = 0.1;
  double band = 0.01;

  double operator()(double q_true, double q_hat) const;
};

double asymmetric_loss(double q_true, double q_hat);

inline constexpr std::size_t kLossGridPoints = 2001;

// argmin over q in [lower, upper] of the integral over s in [lower, upper] of
// loss(s, q). Trapezoid quadrature and a grid search on the same uniform grid,
// then golden-section refinement around the best grid point.
double expected_loss_argmin(const ReturnLevelEstimate& ci, const AsymmetricLoss& loss = {},
                            std::size_t grid_points = kLossGridPoints);

// argmin - lambda * width.
double fine_tuned_estimate(const ReturnLevelEstimate& ci, double lambda, const AsymmetricLoss& loss = {},
                           std::size_t grid_points = kLossGridPoints);

struct LossSurfacePoint {
  double q = 0.0;
  double expected_loss = 0.0;
};

// Expected loss over the quadrature grid, for plotting.
std::vector<LossSurfacePoint> loss_surface(const ReturnLevelEstimate& ci, const AsymmetricLoss& loss = {},
                                           std::size_t grid_points = kLossGridPoints);

struct CalibrationOptions {
  std::size_t k = 7;
  double threshold_quantile = 0.95;
  double confidence = 0.95;
  bool shuffle = false;  // contiguous folds unless set
  PotOptions pot;
  AsymmetricLoss loss;
  std::size_t grid_points = kLossGridPoints;
};

struct FoldDiagnostics {
  std::size_t index = 0;
  bool ok = false;
  ReturnLevelEstimate ci;
  double argmin = 0.0;
  double target = 0.0;  // empirical return level from the complement
  double lambda = 0.0;
  std::string message;
};

struct FineTuneResult {
  double lambda_op = 0.0;
  std::vector<double> lambdas;  // successful folds, in fold order
  double q_op = 0.0;
  std::size_t k = 0;
  ReturnLevelEstimate ci;  // full-sample interval
  double argmin = 0.0;     // full-sample expected-loss minimizer
  GpdFit fit;
  std::vector<FoldDiagnostics> folds;
  std::vector<std::string> warnings;
};

// k-fold calibration of the penalty weight. For each fold the POT interval is
// computed with n_Y / k observations per year, and lambda_i solves
// argmin_i - lambda_i width_i = q_{T,i} in closed form (floored at zero),
// q_{T,i} being the empirical return level of the other folds. lambda_op is
// the median of the lambda_i.
FineTuneResult calibrate_lambda(std::span<const double> y, const ReturnSpec& spec, const CalibrationOptions& options,
                                Rng& rng);

// return_level(fit_pot(y, threshold_quantile), spec).point
double classic_estimate(std::span<const double> y, const ReturnSpec& spec, double threshold_quantile = 0.95);

struct StabilityPoint {
  double threshold_quantile = 0.0;
  double threshold = 0.0;
  std::size_t n_exceed = 0;
  bool ok = false;
  double sigma = 0.0;
  double xi = 0.0;
  double modified_scale = 0.0;  // sigma - xi u, constant above a valid threshold
};

// GPD fits over a grid of threshold quantiles (parameter stability plot data).
std::vector<StabilityPoint> threshold_stability(std::span<const double> y, std::span<const double> quantile_grid,
                                                const PotOptions& options = {});

}  // namespace tailrisk
