#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tailrisk/kernels.hpp"
#include "tailrisk/return_levels.hpp"
#include "tailrisk/rng.hpp"

namespace tailrisk {

// Average ranks (ties share the mean rank) divided by n + 1.
std::vector<double> empirical_cdf_ranks(std::span<const double> x);

// Threshold probability giving about 100 marginal exceedances, within [0.9, 0.995].
double recommended_u(std::size_t n);

// Exceedances of u on the rank scale. The coefficients below are normalized by
// the empirical marginal exceedance proportion p = sqrt(m_i m_j)/n, which is
// 1 - u up to rank discreteness:
//   chi    = joint / (n p)
//   chibar = 2 log p / log(joint / n) - 1
// Requires 0 < u < 1 and (1 - u) n >= 10.
double chi_u(std::span<const double> x, std::span<const double> y, double u);
// Throws NoJointExceedance when no row exceeds in both coordinates.
double chibar_u(std::span<const double> x, std::span<const double> y, double u);

struct PairwiseDependence {
  Eigen::MatrixXd chi;
  Eigen::MatrixXd chibar;
  double u = 0.0;
  std::vector<std::size_t> joint_counts;  // d x d, row-major; diagonal holds marginal counts
  std::size_t n = 0;
};

// All pairs of the columns of `data` (n x d, d >= 2). A pair without joint
// exceedances raises NoJointExceedance naming the pair.
PairwiseDependence chibar_matrix(const Eigen::MatrixXd& data, double u);

struct PsdProjection {
  Eigen::MatrixXd matrix;
  bool projected = false;  // false when the input was already PSD
  std::size_t iterations = 0;
  double residual = 0.0;  // last Frobenius change
  double min_eigenvalue_before = 0.0;
};

// Nearest correlation matrix by alternating projections (PSD cone by eigenvalue
// clipping, unit diagonal) with Dykstra's correction. Stops when the Frobenius
// change drops below `tol`; inputs with minimum eigenvalue >= -1e-12 are
// returned unchanged. Requires a symmetric matrix with unit diagonal.
PsdProjection nearest_psd(const Eigen::MatrixXd& a, double tol = 1e-9, std::size_t max_iterations = 200);

// Lower-triangular L with L L^T = a for positive semi-definite a (zero pivots allowed).
Eigen::MatrixXd semidefinite_cholesky(const Eigen::MatrixXd& a);

/// Gaussian copula with standard Gumbel margins.
struct GaussianCopulaModel {
  Eigen::MatrixXd corr;
  Eigen::MatrixXd chol;

  // Throws DomainError unless corr is a PSD correlation matrix.
  static GaussianCopulaModel from_correlation(const Eigen::MatrixXd& corr);
  std::size_t dim() const { return static_cast<std::size_t>(corr.rows()); }
};

// Phi^-1(G(t)) and G^-1(Phi(z)) for the standard Gumbel G, evaluated through
// the complementary functions in the upper tail.
double gumbel_to_normal(double t);
double normal_to_gumbel(double z);

struct McEstimate {
  double p = 0.0;
  double se = 0.0;
  std::uint64_t hits = 0;
  std::uint64_t draws = 0;
};

// P(Z_k > thresholds_k for all k) by Monte Carlo with `draws` >= 1e5 samples.
// The result depends on (seed, plan) only.
McEstimate copula_joint_tail(const GaussianCopulaModel& model, std::span<const double> gumbel_thresholds,
                             std::uint64_t draws, std::uint64_t seed, const kernels::McPlan& plan = {});

// n x d sample on the Gumbel scale.
Eigen::MatrixXd sample_gaussian_copula(const GaussianCopulaModel& model, std::size_t n, Rng& rng);

struct P2Estimate {
  double p = 0.0;
  double threshold = 0.0;  // u on the scale of min(y1, y2)
  double threshold_quantile = 0.95;
  GpdFit fit;
  std::size_t n_conditional = 0;
  std::vector<StabilityPoint> stability;
};

// 0.5 (1 - q) P(V - u > level - u) for V = min(y1, y2) given y3 < -log(log 2),
// with a GPD above u = the q-quantile of V. Requires level >= u and at least
// 30 conditional exceedances.
P2Estimate estimate_p2(std::span<const double> y1, std::span<const double> y2, std::span<const double> y3,
                       double level, double threshold_quantile = 0.95);

struct CurvePoint {
  double y = 0.0;
  double empirical = 0.0;
  double empirical_se = 0.0;
  double model = 0.0;
  double model_se = 0.0;
};

// p1(y) = P(Y1 > y, Y2 > y, Y3 > y): empirical frequency vs. copula Monte Carlo.
std::vector<CurvePoint> p1_curve(const Eigen::MatrixXd& data, const GaussianCopulaModel& model,
                                 std::span<const double> grid, std::uint64_t draws, std::uint64_t seed);

// p2(y) = P(Y1 > y, Y2 > y, Y3 < m): empirical frequency vs. estimate_p2 (the
// empirical conditional frequency, halved, below the GPD threshold).
std::vector<CurvePoint> p2_curve(std::span<const double> y1, std::span<const double> y2, std::span<const double> y3,
                                 std::span<const double> grid, double threshold_quantile = 0.95);

// Row sets for a covariate split at empirical quantiles, e.g. {0.3, 0.7} gives
// the lower 30%, middle 40% and upper 30%. NaN rows are left out.
std::vector<std::vector<std::size_t>> quantile_bins(std::span<const double> covariate, std::span<const double> cuts);

// Rows whose value equals `level` exactly.
std::vector<std::size_t> rows_equal(std::span<const double> column, double level);

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& data, std::span<const std::size_t> rows);

}  // namespace tailrisk
