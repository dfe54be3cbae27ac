#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tailrisk/rng.hpp"

namespace tailrisk {

// Below this |xi| the GPD is evaluated through its exponential limit.
inline constexpr double kXiZeroTol = 1e-10;

/// Generalized Pareto parameters: scale sigma > 0, shape xi.
/// Support is [0, sigma/(-xi)] for xi < 0 and [0, inf) otherwise.
struct GpdParams {
  double sigma = 1.0;
  double xi = 0.0;
};

// Throws DomainError unless sigma > 0 and both parameters are finite.
void validate(const GpdParams& p);

double gpd_upper_bound(const GpdParams& p);
bool gpd_in_support(double x, const GpdParams& p);

double gpd_cdf(double x, const GpdParams& p);
double gpd_survival(double x, const GpdParams& p);
double gpd_quantile(double prob, const GpdParams& p);

// Log-density at one point; -infinity outside the support.
double gpd_logpdf(double z, const GpdParams& p);

// Sum of log-densities. Returns -infinity if any point lies outside the
// support, so optimizers can reject the parameter value.
double gpd_loglik(std::span<const double> z, const GpdParams& p);

// d/d(sigma, xi) of the log-density at one point (in-support z only).
std::array<double, 2> gpd_logpdf_gradient(double z, const GpdParams& p);

// Gradient and Hessian (d2/dsigma2, d2/dsigma dxi, d2/dxi2) of gpd_loglik.
std::array<double, 2> gpd_loglik_gradient(std::span<const double> z, const GpdParams& p);
std::array<double, 3> gpd_loglik_hessian(std::span<const double> z, const GpdParams& p);

double gpd_sample(const GpdParams& p, Rng& rng);

// Standard Gumbel, F(x) = exp(-exp(-x)).
inline constexpr double kGumbelMedian = 0.36651292058166432;  // -log(log 2)
double gumbel_cdf(double x);
double gumbel_survival(double x);
double gumbel_quantile(double prob);

double normal_cdf(double x);
double normal_survival(double x);
double normal_quantile(double prob);

enum class Family { Frechet, Normal, StudentT, Burr, Gumbel };

/// Simulation family with its parameters.
///   Frechet(shape a):      F(x) = exp(-x^-a), x > 0, a > 0
///   Normal(mean, sd):      sd > 0
///   StudentT(df):          df > 0
///   Burr(c, k):            F(x) = 1 - (1 + x^c)^-k, x > 0, c, k > 0
///   Gumbel(loc, scale):    F(x) = exp(-exp(-(x - loc)/scale)), scale > 0
struct SimFamily {
  Family tag = Family::Normal;
  double a = 0.0;
  double b = 1.0;

  static SimFamily frechet(double shape) { return {Family::Frechet, shape, 0.0}; }
  static SimFamily normal(double mean = 0.0, double sd = 1.0) { return {Family::Normal, mean, sd}; }
  static SimFamily student_t(double df) { return {Family::StudentT, df, 0.0}; }
  static SimFamily burr(double c, double k) { return {Family::Burr, c, k}; }
  static SimFamily gumbel(double loc = 0.0, double scale = 1.0) { return {Family::Gumbel, loc, scale}; }
};

void validate(const SimFamily& f);
std::string family_name(Family tag);
Family parse_family(const std::string& name);

double family_cdf(const SimFamily& f, double x);
double family_quantile(const SimFamily& f, double prob);
std::vector<double> sample(const SimFamily& f, std::size_t n, Rng& rng);

/// Quantile by linear interpolation between order statistics: with sorted
/// values x[0..n-1] and h = (n-1)p, returns x[floor h] + frac(h) (x[floor h + 1] - x[floor h]).
/// Continuous in p; every module uses this rule.
double empirical_quantile(std::span<const double> x, double prob);
double empirical_quantile_sorted(std::span<const double> sorted, double prob);

}  // namespace tailrisk
