#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tailrisk/clusters.hpp"
#include "tailrisk/distributions.hpp"
#include "tailrisk/rng.hpp"
#include "tailrisk/table.hpp"

namespace tailrisk::fixtures {

// ---------------------------------------------------------------- c1_synth

// Y = mu(x) + GPD(sigma(x), xi) with covariates X1..Xp iid standard normal.
//   homogeneous: mu = 0,      sigma = sigma0
//   location:    mu = 2 x1,   sigma = sigma0
//   scale:       mu = 0,      sigma = sigma0 (1 + |x1|)
enum class C1Variant { Homogeneous, Location, Scale };
std::string c1_variant_name(C1Variant v);
C1Variant parse_c1_variant(const std::string& s);

struct C1Options {
  std::size_t n = 21000;
  std::size_t n_test = 200;
  std::size_t p = 8;
  C1Variant variant = C1Variant::Homogeneous;
  double sigma0 = 1.0;
  double xi = 0.1;
  double missing_rate = 0.0;  // fraction of training rows with one covariate set missing
  bool angle = false;         // adds a "dir" column in degrees, unrelated to Y
  double tau = 0.9999;        // level of the stored true quantile
};

struct C1Truth {
  double mu = 0.0;
  double sigma = 1.0;
  double xi = 0.0;
};

C1Truth c1_truth(const C1Options& o, std::span<const double> x);
// mu + gpd_quantile(tau; sigma, xi)
double c1_true_quantile(const C1Options& o, std::span<const double> x, double tau);

struct C1Fixture {
  Table train;  // X1..Xp [, dir], Y
  Table test;   // covariates only
  Table truth;  // per test row: mu, sigma, xi, q
  std::size_t rows_with_missing = 0;
};

C1Fixture make_c1(const C1Options& options, Rng& rng);

// ---------------------------------------------------------------- c3_trivariate

// Equicorrelated Gaussian copula (correlation rho) with standard Gumbel margins.
struct C3Options {
  std::size_t n = 21000;
  double rho = 0.5;
  bool covariates = false;  // adds "season" in {1, 2} and an independent "atmosphere" column
};

// P(Y1 > t1, Y2 > t2, Y3 > t3) by one-dimensional adaptive quadrature over the common factor.
double c3_p1_truth(double rho, std::span<const double> thresholds);
// P(Y1 > y, Y2 > y, Y3 < median)
double c3_p2_truth(double rho, double y);

Table make_c3(const C3Options& options, Rng& rng);

// ---------------------------------------------------------------- c4_blocks

/// Independent blocks of sites; within block b the sites follow a symmetric
/// logistic extreme-value copula with dependence alpha_b in (0, 1] (1 is
/// independence), on standard Gumbel margins:
///   P(Y_i <= y_i, i in block) = exp(-(sum_i exp(-y_i / alpha))^alpha).
struct C4Options {
  std::size_t n = 21000;
  std::size_t block_size = 10;
  std::vector<double> alpha{0.3, 0.5, 0.4, 0.6, 0.5};
};

// Exact P(Y_i > s_i for all i) under the logistic model, by inclusion-exclusion
// over all nonempty subsets (at most 24 sites).
double logistic_joint_survival(double alpha, std::span<const double> thresholds);

// One draw of a block: Y_i = alpha log(S / W_i) with S positive alpha-stable
// (Laplace transform exp(-t^alpha), Kanter's representation) and W_i ~ Exp(1).
void sample_logistic_block(double alpha, Rng& rng, std::span<double> out);

struct C4Fixture {
  Eigen::MatrixXd data;                 // n x (blocks * block_size), column i is site i + 1
  std::vector<std::size_t> partition;   // block id (1-based) of each site
  double truth_scenario_i = 0.0;
  double truth_scenario_ii = 0.0;
  std::vector<double> block_truth_i;
  std::vector<double> block_truth_ii;
};

// Exact joint probability for the thresholds of `spec` over all sites.
double c4_truth(const C4Options& options, const ThresholdSpec& spec, std::vector<double>* per_block = nullptr);

C4Fixture make_c4(const C4Options& options, Rng& rng);

Table site_table(const Eigen::MatrixXd& data);  // columns Y1..Yd

}  // namespace tailrisk::fixtures
