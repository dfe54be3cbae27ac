#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tailrisk/distributions.hpp"

namespace tailrisk {

// ---------------------------------------------------------------- variogram

struct ExtremalVariogram {
  Eigen::MatrixXd gamma;
  double u = 0.0;
  std::optional<std::size_t> root;  // empty when averaged over all roots
};

// Empirical extremal variogram: for root m, the variance (divisor |I_m|) of
// log(1 - F_i) - log(1 - F_j) over the rows I_m where F_m > u, F being the rank
// transform. Averaged over all roots. Requires (1 - u) n >= 20.
ExtremalVariogram extremal_variogram(const Eigen::MatrixXd& data, double u);
ExtremalVariogram extremal_variogram_rooted(const Eigen::MatrixXd& data, double u, std::size_t root);

// ---------------------------------------------------------------- clustering

enum class Linkage { Average, Complete };
std::string linkage_name(Linkage l);
Linkage parse_linkage(const std::string& s);

// Agglomeration step. Leaves are 0..d-1 and the node created by merge k is d + k.
struct Merge {
  std::size_t a = 0;
  std::size_t b = 0;
  double height = 0.0;
  std::size_t size = 0;
};

struct ClusterPartition {
  std::vector<std::size_t> assignment;  // site -> cluster id in 1..k
  std::size_t k = 0;
  std::vector<Merge> merges;  // full dendrogram, d - 1 entries

  // Sites of each cluster, ids in order; clusters are numbered by their smallest site.
  std::vector<std::vector<std::size_t>> members() const;
};

// Full agglomeration of a symmetric, nonnegative, zero-diagonal dissimilarity,
// cut to k clusters.
ClusterPartition hierarchical_cluster(const Eigen::MatrixXd& dissim, std::size_t k, Linkage linkage = Linkage::Average);

// k in [2, d-1] maximizing (h_next - h_prev) / h_next over consecutive merge heights.
std::size_t choose_k_by_gap(const std::vector<Merge>& merges);

ClusterPartition hierarchical_cluster_auto(const Eigen::MatrixXd& dissim, Linkage linkage = Linkage::Average);

// Labels are arbitrary integers; 1.0 means identical partitions.
double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b);

// ---------------------------------------------------------------- thresholds

enum class Scenario { I, II };
std::string scenario_name(Scenario s);
Scenario parse_scenario(const std::string& s);

/// Per-site thresholds. Scenario I uses s1 in region 1 and s2 in region 2;
/// scenario II uses s1 everywhere.
struct ThresholdSpec {
  double s1 = 5.702113;
  double s2 = 3.198534;
  std::vector<int> region;  // 1 or 2 per site
  Scenario scenario = Scenario::I;

  // First half of the sites in region 1, second half in region 2.
  static ThresholdSpec halves(std::size_t d, Scenario scenario);

  std::size_t index(std::size_t site) const;  // 0 for s1, 1 for s2
  double value(std::size_t index) const { return index == 0 ? s1 : s2; }
  double at(std::size_t site) const { return value(index(site)); }
};

// ---------------------------------------------------------------- per-cluster estimation

struct MinimaSeries {
  std::size_t cluster = 0;          // 1-based
  std::size_t threshold_index = 0;  // 0 for s1, 1 for s2
  double threshold = 0.0;
  std::vector<std::size_t> sites;
  std::vector<double> values;
};

// Row-wise minima over each cluster's sites, one series per threshold index
// present in the cluster.
std::vector<MinimaSeries> cluster_minima(const Eigen::MatrixXd& data, const ClusterPartition& partition,
                                         const ThresholdSpec& thresholds);

// Rows where every listed site exceeds its threshold.
std::size_t joint_exceedance_count(const Eigen::MatrixXd& data, std::span<const std::size_t> sites,
                                   const ThresholdSpec& thresholds);

// count / n, or nothing when no row exceeds jointly.
std::optional<double> empirical_joint_exceedance(const Eigen::MatrixXd& data, std::span<const std::size_t> sites,
                                                 const ThresholdSpec& thresholds);

// {0.90, 0.91, ..., 0.99}
std::vector<double> default_p0_grid();

struct TailFitAtP0 {
  double p0 = 0.0;
  bool ok = false;
  double quantile = 0.0;  // empirical p0-quantile of the series
  GpdParams params;
  double estimate = 0.0;
  std::string message;
};

struct TailEstimate {
  double p = 0.0;  // mean of the successful per-p0 estimates
  std::vector<TailFitAtP0> per_p0;
};

// P(M > s) averaged over p0: (1 - p0) times the GPD survival of s - Q(p0), the
// GPD being fitted to the exceedances of Q(p0). When s <= Q(p0) the empirical
// frequency of {M > s} is used for that p0.
TailEstimate cluster_tail_probability(std::span<const double> minima, double s, std::span<const double> p0_grid);

enum class ClusterMode { Empirical, GpdUnivariate, GpdBivariateChi };
std::string cluster_mode_name(ClusterMode m);

struct ClusterFactor {
  std::size_t cluster = 0;
  std::vector<std::size_t> sites;
  ClusterMode mode = ClusterMode::Empirical;
  std::size_t joint_count = 0;
  double probability = 0.0;
  double chi = 1.0;        // bivariate mode only
  double chi_level = 0.0;  // rank level at which chi was estimated
  TailEstimate tail;
};

struct JointConfig {
  std::vector<double> p0_grid = default_p0_grid();
  bool use_chi = true;           // off: the conditional factor is taken as 1
  bool extrapolate_all = false;  // skip the counting estimator even when exceedances were observed
};

struct JointEstimate {
  double p = 0.0;
  std::vector<ClusterFactor> clusters;
};

// Product over clusters of their joint exceedance probabilities. Clusters with
// observed joint exceedances use the counting estimator; the others are
// extrapolated from their minima.
JointEstimate joint_probability(const Eigen::MatrixXd& data, const ClusterPartition& partition,
                                const ThresholdSpec& thresholds, const JointConfig& config = {});

// counts[m] = number of rows in which exactly m sites of the cluster exceed.
struct ExceedanceHistogram {
  std::size_t cluster = 0;
  std::vector<std::size_t> counts;
};

std::vector<ExceedanceHistogram> exceedance_histograms(const Eigen::MatrixXd& data, const ClusterPartition& partition,
                                                       const ThresholdSpec& thresholds);

struct PairScatterPoint {
  double u = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  double chi = 0.0;
  double gamma = 0.0;
};

// (chi, Gamma) for every site pair and every u in the grid.
std::vector<PairScatterPoint> pair_scatter(const Eigen::MatrixXd& data, std::span<const double> u_grid);

}  // namespace tailrisk
