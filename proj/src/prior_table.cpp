#include <algorithm>
#include <cmath>
#include <string>

#include "refprior/errors.hpp"
#include "refprior/numerics.hpp"

namespace refprior {

std::size_t PriorTable::anchor_index() const {
  const auto it = std::find(grid.begin(), grid.end(), anchor);
  if (it == grid.end()) throw InvariantViolation("prior table: anchor is not a grid point");
  return static_cast<std::size_t>(it - grid.begin());
}

void PriorTable::validate() const {
  if (grid.empty()) throw InvariantViolation("prior table: empty grid");
  if (log_pi.size() != grid.size() || std_err.size() != grid.size()) {
    throw InvariantViolation("prior table: column lengths differ");
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i])) throw InvariantViolation("prior table: non-finite grid point");
    if (i > 0 && !(grid[i - 1] < grid[i])) {
      throw InvariantViolation("prior table: grid not strictly increasing");
    }
    if (!std::isfinite(log_pi[i])) {
      throw InvariantViolation("prior table: non-finite log_pi at theta=" + std::to_string(grid[i]));
    }
    if (!(std_err[i] >= 0.0)) throw InvariantViolation("prior table: negative stderr");
  }
  if (log_pi[anchor_index()] != 0.0) {
    throw InvariantViolation("prior table: anchor entry is not exactly 0");
  }
}

TableInterpolant::TableInterpolant(const PriorTable& table) : grid_(table.grid), ys_(table.log_pi) {
  if (grid_.size() < 2) throw DomainError("interpolate_table: need at least two grid points");
  if (ys_.size() != grid_.size()) throw InvariantViolation("interpolate_table: column lengths differ");
  for (std::size_t i = 1; i < grid_.size(); ++i) {
    if (!(grid_[i - 1] < grid_[i])) throw InvariantViolation("interpolate_table: grid not increasing");
  }
  for (double y : ys_) {
    if (!std::isfinite(y)) throw InvariantViolation("interpolate_table: non-finite log_pi");
  }
  log_abscissa_ = grid_.front() > 0.0;
  xs_.resize(grid_.size());
  for (std::size_t i = 0; i < grid_.size(); ++i) xs_[i] = abscissa(grid_[i]);

  // Fritsch-Carlson slopes.
  const std::size_t n = xs_.size();
  std::vector<double> secant(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    secant[i] = (ys_[i + 1] - ys_[i]) / (xs_[i + 1] - xs_[i]);
  }
  slopes_.assign(n, 0.0);
  slopes_[0] = secant[0];
  slopes_[n - 1] = secant[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) {
    slopes_[i] = secant[i - 1] * secant[i] <= 0.0 ? 0.0 : 0.5 * (secant[i - 1] + secant[i]);
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (secant[i] == 0.0) {
      slopes_[i] = 0.0;
      slopes_[i + 1] = 0.0;
      continue;
    }
    const double alpha = slopes_[i] / secant[i];
    const double beta = slopes_[i + 1] / secant[i];
    const double r2 = alpha * alpha + beta * beta;
    if (r2 > 9.0) {
      const double tau = 3.0 / std::sqrt(r2);
      slopes_[i] = tau * alpha * secant[i];
      slopes_[i + 1] = tau * beta * secant[i];
    }
  }
}

double TableInterpolant::abscissa(double theta) const {
  return log_abscissa_ ? std::log(theta) : theta;
}

double TableInterpolant::log_value(double theta) const {
  if (!(theta >= grid_.front() && theta <= grid_.back())) {
    throw RangeError("interpolate_table: theta outside the tabulated range");
  }
  const auto it = std::upper_bound(grid_.begin(), grid_.end(), theta);
  std::size_t i = it == grid_.begin() ? 0 : static_cast<std::size_t>(it - grid_.begin()) - 1;
  if (i + 1 >= grid_.size()) i = grid_.size() - 2;
  if (theta == grid_[i]) return ys_[i];
  if (theta == grid_[i + 1]) return ys_[i + 1];
  const double h = xs_[i + 1] - xs_[i];
  const double s = (abscissa(theta) - xs_[i]) / h;
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  return h00 * ys_[i] + h10 * h * slopes_[i] + h01 * ys_[i + 1] + h11 * h * slopes_[i + 1];
}

TableInterpolant interpolate_table(const PriorTable& table) { return TableInterpolant(table); }

}  // namespace refprior
