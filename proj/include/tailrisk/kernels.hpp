#pragma once

// Data-parallel inner loops. Every kernel has an OpenMP version and a serial
// reference; the two produce bit-identical results for the same inputs
// (work is split into fixed, thread-count-independent units and reduced in
// unit order). The serial versions are kept for testing and benchmarking.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tailrisk/return_levels.hpp"
#include "tailrisk/rng.hpp"

namespace tailrisk::kernels {

// out[j] = h * sum_i w_i loss(grid[i], grid[j]) with trapezoid weights w_i on
// the uniform grid. `out` must have grid.size() entries.
void expected_loss_serial(std::span<const double> grid, const AsymmetricLoss& loss, std::span<double> out);
void expected_loss_parallel(std::span<const double> grid, const AsymmetricLoss& loss, std::span<double> out);

// Monte Carlo partition plan: draws are split into `chunks` contiguous blocks;
// block c uses Rng(derive_seed(seed, c)). The plan, not the thread count,
// determines the result.
struct McPlan {
  std::size_t chunks = 64;
};

std::uint64_t chunk_size(std::uint64_t draws, const McPlan& plan, std::size_t chunk);

// Fills `out` with L w, w standard normal drawn from `rng`.
void draw_correlated_normal(Rng& rng, const Eigen::MatrixXd& chol, Eigen::VectorXd& work, Eigen::VectorXd& out);

// Number of draws of L W (W standard normal) with every component strictly
// above its threshold.
std::uint64_t copula_hits_serial(const Eigen::MatrixXd& chol, std::span<const double> normal_thresholds,
                                 std::uint64_t draws, std::uint64_t seed, const McPlan& plan);
std::uint64_t copula_hits_parallel(const Eigen::MatrixXd& chol, std::span<const double> normal_thresholds,
                                   std::uint64_t draws, std::uint64_t seed, const McPlan& plan);

// exceed[c][t] != 0 marks an exceedance of column c at row t. Returns the d x d
// matrix of joint exceedance counts (diagonal = marginal counts), row-major.
std::vector<std::size_t> pairwise_joint_counts_serial(const std::vector<std::vector<std::uint8_t>>& exceed);
std::vector<std::size_t> pairwise_joint_counts_parallel(const std::vector<std::vector<std::uint8_t>>& exceed);

// Extremal variogram averaged over roots. `log_survival` is n x d with entries
// log(1 - F_i(y_ti)); `root_rows[m]` lists the rows where root m is extreme.
// For each root, the (1/|rows|) variance of column differences over its rows.
Eigen::MatrixXd variogram_serial(const Eigen::MatrixXd& log_survival,
                                 const std::vector<std::vector<std::size_t>>& root_rows);
Eigen::MatrixXd variogram_parallel(const Eigen::MatrixXd& log_survival,
                                   const std::vector<std::vector<std::size_t>>& root_rows);

}  // namespace tailrisk::kernels
