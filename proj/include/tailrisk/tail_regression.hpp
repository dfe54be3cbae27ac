#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tailrisk/network.hpp"
#include "tailrisk/rng.hpp"
#include "tailrisk/table.hpp"

namespace tailrisk {

// ---------------------------------------------------------------- data

struct FeatureMeta {
  std::string name;    // e.g. "X3", "dir_sin"
  std::string source;  // raw column it came from
  bool is_angle = false;
  double impute = 0.0;  // value substituted for missing cells (before scaling)
  double mean = 0.0;
  double sd = 1.0;
};

struct PrepareOptions {
  std::string response = "Y";
  std::vector<std::string> angle_columns;  // split into sin/cos
  bool angles_in_degrees = false;
  std::vector<std::string> exclude;  // ignored columns (ids, ...)
};

/// Covariates (n x p, imputed and standardized) and response.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;  // empty for covariate-only test data
  std::vector<FeatureMeta> feature_meta;
  std::vector<std::string> raw_columns;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> missing_mask;  // n x raw_columns
  std::size_t dropped_rows = 0;  // rows without a response
  std::string response;
  bool angles_in_degrees = false;

  std::size_t n() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t p() const { return static_cast<std::size_t>(X.cols()); }
  // Fraction of rows with at least one missing covariate.
  double missing_row_rate() const;
};

// Training-side preparation: angle split, column-mean imputation, standardization.
// Rows with a missing response are dropped. Statistics land in feature_meta.
Dataset prepare(const Table& raw, const PrepareOptions& options);

// Test-side preparation reusing `train`'s feature_meta verbatim. The response
// column is read if present.
Dataset apply_preparation(const Table& raw, const Dataset& train);

// Wraps an already numeric design (no scaling) for simulations and tests.
Dataset make_dataset(Eigen::MatrixXd X, Eigen::VectorXd y);

// Mean of rho_tau(y - q), rho_tau(r) = r (tau - 1{r < 0}).
double pinball_loss(std::span<const double> y, std::span<const double> q, double tau);

// ---------------------------------------------------------------- orthogonal GPD loss

// Negative GPD log-density in the orthogonal parametrization nu = sigma (xi + 1):
//   (1 + 1/xi) log(1 + xi (xi + 1) z / nu) + log nu - log(xi + 1).
// +infinity outside the support or parameter space.
double ogpd_loss(double z, double nu, double xi);

// d/d(nu, xi); valid inside the support.
std::array<double, 2> ogpd_loss_gradient(double z, double nu, double xi);

enum class ShapeMode { Constant, Varying };
std::string shape_mode_name(ShapeMode m);
ShapeMode parse_shape_mode(const std::string& s);

// ---------------------------------------------------------------- training objectives

/// Mean pinball loss of a one-output network. loss() is the unpenalized value
/// monitored on validation rows; loss_and_grad() adds l2 * |weights|^2.
class PinballObjective {
 public:
  PinballObjective(nn::Mlp mlp, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets, double tau, double l2);

  std::size_t parameter_count() const { return mlp_.parameter_count(); }
  double loss(const Eigen::VectorXd& params, std::span<const std::size_t> rows) const;
  double loss_and_grad(const Eigen::VectorXd& params, std::span<const std::size_t> rows, Eigen::VectorXd& grad) const;

 private:
  nn::Mlp mlp_;
  const Eigen::MatrixXd& inputs_;  // features x n
  const Eigen::VectorXd& targets_;
  double tau_;
  double l2_;
};

/// Mean ogpd_loss; as for PinballObjective only loss_and_grad() carries the
/// l2 * |weights|^2 term. Outputs map to nu = nu_scale * softplus(o1)
/// and xi = softplus(r) - 1, where r is the second output (varying shape) or a
/// trailing scalar parameter shared by all inputs (constant shape).
class OgpdObjective {
 public:
  OgpdObjective(nn::Mlp mlp, ShapeMode mode, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& z,
                double nu_scale, double l2);

  std::size_t parameter_count() const { return mlp_.parameter_count() + (mode_ == ShapeMode::Constant ? 1 : 0); }
  double loss(const Eigen::VectorXd& params, std::span<const std::size_t> rows) const;
  double loss_and_grad(const Eigen::VectorXd& params, std::span<const std::size_t> rows, Eigen::VectorXd& grad) const;

 private:
  double evaluate(const Eigen::VectorXd& params, std::span<const std::size_t> rows, Eigen::VectorXd* grad) const;

  nn::Mlp mlp_;
  ShapeMode mode_;
  const Eigen::MatrixXd& inputs_;
  const Eigen::VectorXd& z_;
  double nu_scale_;
  double l2_;
};

// ---------------------------------------------------------------- intermediate quantiles

struct IntermediateConfig {
  double level = 0.8;  // tau_0
  std::size_t folds = 5;
  std::vector<std::size_t> hidden{20, 10};
  double l2 = 1e-4;
  nn::TrainOptions train{5e-3, 256, 300, 20, 0.2};
};

/// One trained pinball-loss network; the response is scaled internally.
struct QuantileNetwork {
  nn::Mlp mlp;
  Eigen::VectorXd params;
  double y_center = 0.0;
  double y_scale = 1.0;
  nn::TrainTrace trace;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;  // X is n x p
};

struct IntermediateQuantileModel {
  double level = 0.8;
  QuantileNetwork final_model;
  std::vector<QuantileNetwork> fold_models;
  std::vector<std::size_t> fold_of;  // fold index of each training row
  Eigen::VectorXd oof_predictions;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const { return final_model.predict(X); }
};

// K-fold pinball networks give out-of-fold predictions on the training rows;
// a final network on all rows serves new covariates. With `warm`, every network
// starts from warm->final_model instead of a random initialization.
IntermediateQuantileModel fit_intermediate(const Dataset& data, const IntermediateConfig& config, Rng& rng,
                                           const IntermediateQuantileModel* warm = nullptr);

// ---------------------------------------------------------------- GPD network

struct GpdNetworkConfig {
  std::vector<std::size_t> hidden{20, 10};
  double l2 = 1e-4;
  ShapeMode shape_mode = ShapeMode::Constant;
  nn::TrainOptions train{1e-3, 256, 500, 20, 0.2};
};

struct GpdOutput {
  Eigen::VectorXd sigma;
  Eigen::VectorXd xi;
  Eigen::VectorXd nu;
};

/// Network from (covariates, Q(tau_0)) to the conditional GPD parameters. The
/// intermediate-quantile input is standardized with statistics of the training
/// exceedances.
struct GpdNetwork {
  nn::Mlp mlp;
  Eigen::VectorXd params;
  ShapeMode shape_mode = ShapeMode::Constant;
  double l2 = 1e-4;
  double nu_scale = 1.0;
  double q_mean = 0.0;
  double q_sd = 1.0;
  nn::TrainTrace trace;

  Eigen::MatrixXd inputs(const Eigen::MatrixXd& X, const Eigen::VectorXd& q0) const;  // (p+1) x n
  GpdOutput predict(const Eigen::MatrixXd& X, const Eigen::VectorXd& q0) const;
};

struct Exceedances {
  std::vector<std::size_t> rows;  // training rows with y > Q(tau_0)
  Eigen::VectorXd z;
};

Exceedances exceedances_over(const Dataset& data, const Eigen::VectorXd& q0);

// Exceedances of the out-of-fold intermediate quantiles must number at least 50.
GpdNetwork fit_gpd_network(const Dataset& data, const IntermediateQuantileModel& inter, const GpdNetworkConfig& config,
                           Rng& rng, const GpdNetwork* warm = nullptr);

struct GridCell {
  GpdNetworkConfig config;
  bool ok = false;
  double validation_loss = 0.0;
  std::size_t epochs = 0;
  std::string message;
};

struct GridSearchResult {
  GpdNetwork best;
  std::size_t best_index = 0;
  std::vector<GridCell> cells;
};

// hidden {(20,10), (32,16), (16)} x l2 {1e-3, 1e-4, 1e-5} x shape {constant, varying}.
std::vector<GpdNetworkConfig> default_grid(const nn::TrainOptions& train = GpdNetworkConfig{}.train);

// All cells share one train/validation split of the exceedances; the lowest
// validation ogpd loss wins.
GridSearchResult select_gpd_network(const Dataset& data, const IntermediateQuantileModel& inter,
                                    std::span<const GpdNetworkConfig> grid, Rng& rng);

// ---------------------------------------------------------------- full model

// q0 + sigma/xi (((1 - tau)/(1 - tau0))^-xi - 1), logarithmic form as xi -> 0.
// tau = tau0 returns q0.
double extrapolate_quantile(double q0, double sigma, double xi, double tau0, double tau);

struct TailRegressionConfig {
  IntermediateConfig intermediate;
  GpdNetworkConfig gpd;
  bool grid_search = false;
  std::vector<GpdNetworkConfig> grid;  // default_grid() when empty
};

struct TailRegressionModel {
  TailRegressionConfig config;
  IntermediateQuantileModel intermediate;
  GpdNetwork gpd;
  std::vector<GridCell> grid_cells;

  double tau0() const { return intermediate.level; }
};

TailRegressionModel fit_tail_model(const Dataset& data, const TailRegressionConfig& config, Rng& rng,
                                   const TailRegressionModel* warm = nullptr);

// Requires tau0 < tau < 1.
Eigen::VectorXd predict_extreme_quantiles(const TailRegressionModel& model, const Eigen::MatrixXd& X, double tau);
double predict_extreme_quantile(const TailRegressionModel& model, const Eigen::VectorXd& x, double tau);

// ---------------------------------------------------------------- bootstrap

struct QuantilePrediction {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.0;
  double confidence = 0.5;
};

enum class IntervalKind { Normal, Percentile };

// point -/+ z_{(1+confidence)/2} sd(replicates), sd with divisor B - 1.
QuantilePrediction normal_interval(double point, std::span<const double> replicates, double confidence, double level);
// Empirical (1-confidence)/2 and (1+confidence)/2 quantiles of the replicates.
QuantilePrediction percentile_interval(double point, std::span<const double> replicates, double confidence,
                                       double level);

struct BootstrapOptions {
  std::size_t B = 100;
  double confidence = 0.5;
  bool warm_start = true;
  IntervalKind interval = IntervalKind::Normal;
  double max_drop_fraction = 0.2;
};

struct BootstrapResult {
  std::vector<QuantilePrediction> predictions;
  Eigen::MatrixXd replicates;  // n_test x successful resamples
  std::size_t dropped = 0;
  std::vector<std::string> warnings;
};

// One semi-parametric resample: rows drawn with replacement; a drawn response
// at or above its out-of-fold Q(tau_0) is replaced by Q(tau_0) plus a draw from
// the fitted conditional GPD. `replaced` (optional) flags the redrawn rows.
Dataset semiparametric_resample(const Dataset& data, const TailRegressionModel& model, Rng& rng,
                                std::vector<std::uint8_t>* replaced = nullptr);

// Refits the whole pipeline on B resamples (in parallel, one derived seed per
// resample) and forms per-test-point intervals around the original prediction.
BootstrapResult semiparametric_bootstrap(const Dataset& data, const TailRegressionModel& model,
                                         const Eigen::MatrixXd& X_test, double tau, const BootstrapOptions& options,
                                         Rng& rng);

}  // namespace tailrisk
