#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "piic/types.hpp"

namespace piic {

// Search space for the prior hyper-parameters, per group, on a log10 scale.
// The default covers [1e-3, 1e3] with 15 grid points per group followed by a
// Nelder-Mead refinement in log space from the best grid point.
struct XiSearchSpace {
  int q = 1;
  double log_lo = -3.0;
  double log_hi = 3.0;
  int grid_points = 15;
  int simplex_budget = 200;
  double simplex_tol = 1e-4;

  void validate() const;
};

struct MinimizeResult {
  Vec xi_hat;
  double value = 0.0;
  std::vector<std::pair<Vec, double>> trace;  // every evaluated (xi, value)
};

// Minimizes a deterministic objective over xi > 0. The objective must be a
// pure function of xi (fix a common-random-numbers seed before wrapping a
// sampled criterion). Grid ties break toward the lexicographically smallest
// xi; the returned point is the best point ever evaluated, grid or simplex.
MinimizeResult minimize_criterion(const std::function<double(const Vec&)>& objective, const XiSearchSpace& space);

}  // namespace piic
