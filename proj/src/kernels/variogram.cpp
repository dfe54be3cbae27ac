#include <algorithm>

#include "tailrisk/kernels.hpp"

namespace tailrisk::kernels {
namespace {

// Gamma_ij = C_ii + C_jj - 2 C_ij with C the covariance of the root's rows.
Eigen::MatrixXd root_variogram(const Eigen::MatrixXd& log_survival, const std::vector<std::size_t>& rows) {
  const Eigen::Index d = log_survival.cols();
  const auto k = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd sub(k, d);
  for (Eigen::Index r = 0; r < k; ++r) sub.row(r) = log_survival.row(static_cast<Eigen::Index>(rows[r]));
  sub.rowwise() -= sub.colwise().mean();
  const Eigen::MatrixXd cov = (sub.transpose() * sub) / static_cast<double>(k);
  // One triangle only: the product above need not be bit-symmetric.
  Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      gamma(i, j) = gamma(j, i) = std::max(0.0, cov(i, i) + cov(j, j) - 2.0 * cov(i, j));
    }
  }
  return gamma;
}

Eigen::MatrixXd average(const std::vector<Eigen::MatrixXd>& per_root, Eigen::Index d) {
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(d, d);
  for (const auto& g : per_root) total += g;
  return total / static_cast<double>(per_root.size());
}

}  // namespace

Eigen::MatrixXd variogram_serial(const Eigen::MatrixXd& log_survival,
                                 const std::vector<std::vector<std::size_t>>& root_rows) {
  std::vector<Eigen::MatrixXd> per_root(root_rows.size());
  for (std::size_t m = 0; m < root_rows.size(); ++m) per_root[m] = root_variogram(log_survival, root_rows[m]);
  return average(per_root, log_survival.cols());
}

Eigen::MatrixXd variogram_parallel(const Eigen::MatrixXd& log_survival,
                                   const std::vector<std::vector<std::size_t>>& root_rows) {
  std::vector<Eigen::MatrixXd> per_root(root_rows.size());
  const auto roots = static_cast<std::ptrdiff_t>(root_rows.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t m = 0; m < roots; ++m) per_root[m] = root_variogram(log_survival, root_rows[m]);
  return average(per_root, log_survival.cols());
}

}  // namespace tailrisk::kernels
