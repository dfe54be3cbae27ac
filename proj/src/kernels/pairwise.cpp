#include "tailrisk/kernels.hpp"

namespace tailrisk::kernels {
namespace {

std::size_t joint_count(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  std::size_t count = 0;
  for (std::size_t t = 0; t < a.size(); ++t) count += (a[t] & b[t]) ? 1 : 0;
  return count;
}

std::vector<std::pair<std::size_t, std::size_t>> upper_pairs(std::size_t d) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(d * (d + 1) / 2);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) pairs.emplace_back(i, j);
  return pairs;
}

}  // namespace

std::vector<std::size_t> pairwise_joint_counts_serial(const std::vector<std::vector<std::uint8_t>>& exceed) {
  const std::size_t d = exceed.size();
  std::vector<std::size_t> counts(d * d, 0);
  for (auto [i, j] : upper_pairs(d)) counts[i * d + j] = counts[j * d + i] = joint_count(exceed[i], exceed[j]);
  return counts;
}

std::vector<std::size_t> pairwise_joint_counts_parallel(const std::vector<std::vector<std::uint8_t>>& exceed) {
  const std::size_t d = exceed.size();
  std::vector<std::size_t> counts(d * d, 0);
  const auto pairs = upper_pairs(d);
  const auto m = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t p = 0; p < m; ++p) {
    const auto [i, j] = pairs[p];
    counts[i * d + j] = counts[j * d + i] = joint_count(exceed[i], exceed[j]);
  }
  return counts;
}

}  // namespace tailrisk::kernels
