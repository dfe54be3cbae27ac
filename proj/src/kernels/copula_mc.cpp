#include <vector>

#include "tailrisk/kernels.hpp"

namespace tailrisk::kernels {

std::uint64_t chunk_size(std::uint64_t draws, const McPlan& plan, std::size_t chunk) {
  const std::uint64_t chunks = plan.chunks;
  return draws / chunks + (chunk < draws % chunks ? 1 : 0);
}

void draw_correlated_normal(Rng& rng, const Eigen::MatrixXd& chol, Eigen::VectorXd& work, Eigen::VectorXd& out) {
  const Eigen::Index d = chol.rows();
  for (Eigen::Index k = 0; k < d; ++k) work[k] = rng.normal();
  // Lower-triangular product written out; L is small and this avoids temporaries.
  for (Eigen::Index r = 0; r < d; ++r) {
    double s = 0.0;
    for (Eigen::Index c = 0; c <= r; ++c) s += chol(r, c) * work[c];
    out[r] = s;
  }
}

namespace {

std::uint64_t chunk_hits(const Eigen::MatrixXd& chol, std::span<const double> thresholds, std::uint64_t draws,
                         std::uint64_t seed, const McPlan& plan, std::size_t chunk) {
  Rng rng(derive_seed(seed, chunk));
  const Eigen::Index d = chol.rows();
  Eigen::VectorXd work(d), z(d);
  std::uint64_t hits = 0;
  const std::uint64_t m = chunk_size(draws, plan, chunk);
  for (std::uint64_t t = 0; t < m; ++t) {
    draw_correlated_normal(rng, chol, work, z);
    bool all = true;
    for (Eigen::Index k = 0; k < d && all; ++k) all = z[k] > thresholds[static_cast<std::size_t>(k)];
    hits += all ? 1 : 0;
  }
  return hits;
}

}  // namespace

std::uint64_t copula_hits_serial(const Eigen::MatrixXd& chol, std::span<const double> normal_thresholds,
                                 std::uint64_t draws, std::uint64_t seed, const McPlan& plan) {
  std::uint64_t hits = 0;
  for (std::size_t c = 0; c < plan.chunks; ++c) hits += chunk_hits(chol, normal_thresholds, draws, seed, plan, c);
  return hits;
}

std::uint64_t copula_hits_parallel(const Eigen::MatrixXd& chol, std::span<const double> normal_thresholds,
                                   std::uint64_t draws, std::uint64_t seed, const McPlan& plan) {
  std::vector<std::uint64_t> per_chunk(plan.chunks, 0);
  const auto chunks = static_cast<std::ptrdiff_t>(plan.chunks);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t c = 0; c < chunks; ++c) {
    per_chunk[c] = chunk_hits(chol, normal_thresholds, draws, seed, plan, static_cast<std::size_t>(c));
  }
  std::uint64_t hits = 0;
  for (auto h : per_chunk) hits += h;
  return hits;
}

}  // namespace tailrisk::kernels
