#include <cmath>

#include "tailrisk/kernels.hpp"

namespace tailrisk::kernels {
namespace {

double expected_loss_at(std::span<const double> grid, const AsymmetricLoss& loss, double q) {
  const std::size_t n = grid.size();
  if (n < 2) return 0.0;
  const double h = (grid[n - 1] - grid[0]) / static_cast<double>(n - 1);
  double total = 0.5 * (loss(grid[0], q) + loss(grid[n - 1], q));
  for (std::size_t i = 1; i + 1 < n; ++i) total += loss(grid[i], q);
  return total * h;
}

}  // namespace

void expected_loss_serial(std::span<const double> grid, const AsymmetricLoss& loss, std::span<double> out) {
  for (std::size_t j = 0; j < grid.size(); ++j) out[j] = expected_loss_at(grid, loss, grid[j]);
}

void expected_loss_parallel(std::span<const double> grid, const AsymmetricLoss& loss, std::span<double> out) {
  const auto n = static_cast<std::ptrdiff_t>(grid.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < n; ++j) out[j] = expected_loss_at(grid, loss, grid[j]);
}

}  // namespace tailrisk::kernels
