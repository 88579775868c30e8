#include "piic/hyperopt.hpp"

#include <algorithm>
#include <cmath>

namespace piic {

void XiSearchSpace::validate() const {
  if (q < 1) throw config_error("search space: q must be >= 1");
  if (!(log_lo < log_hi) || !std::isfinite(log_lo) || !std::isfinite(log_hi))
    throw config_error("search space: need finite log_lo < log_hi");
  if (grid_points < 1) throw config_error("search space: grid_points must be >= 1");
  if (simplex_budget < 0) throw config_error("search space: negative simplex budget");
  if (!(simplex_tol > 0.0)) throw config_error("search space: simplex_tol must be positive");
}

namespace {

Vec to_natural(const Vec& logxi) {
  Vec xi(logxi.size());
  for (int k = 0; k < logxi.size(); ++k) xi[k] = std::pow(10.0, logxi[k]);
  return xi;
}

bool lex_less(const Vec& a, const Vec& b) {
  for (int k = 0; k < a.size(); ++k) {
    if (a[k] < b[k]) return true;
    if (a[k] > b[k]) return false;
  }
  return false;
}

}  // namespace

MinimizeResult minimize_criterion(const std::function<double(const Vec&)>& objective, const XiSearchSpace& space) {
  space.validate();
  MinimizeResult result;
  result.trace.reserve(static_cast<std::size_t>(std::pow(space.grid_points, space.q)) +
                       static_cast<std::size_t>(space.simplex_budget));

  bool any_finite = false;
  Vec best_log;
  double best_value = std::numeric_limits<double>::infinity();

  const auto eval_log = [&](const Vec& logxi) {
    const Vec xi = to_natural(logxi);
    double v;
    try {
      v = objective(xi);
    } catch (const std::exception& e) {
      std::string msg = "objective evaluation failed at xi = [";
      for (int k = 0; k < xi.size(); ++k) msg += (k ? ", " : "") + std::to_string(xi[k]);
      throw numeric_error(msg + "]: " + e.what());
    }
    result.trace.emplace_back(xi, v);
    if (std::isfinite(v)) {
      any_finite = true;
      if (v < best_value || (v == best_value && lex_less(xi, to_natural(best_log)))) {
        best_value = v;
        best_log = logxi;
      }
    }
    return v;
  };

  // coarse grid scan over the product grid
  const int G = space.grid_points;
  const double step = G > 1 ? (space.log_hi - space.log_lo) / (G - 1) : 0.0;
  std::vector<int> counter(static_cast<std::size_t>(space.q), 0);
  while (true) {
    Vec logxi(space.q);
    for (int k = 0; k < space.q; ++k)
      logxi[k] = G > 1 ? space.log_lo + step * counter[static_cast<std::size_t>(k)]
                       : 0.5 * (space.log_lo + space.log_hi);
    eval_log(logxi);
    int k = space.q - 1;
    while (k >= 0 && ++counter[static_cast<std::size_t>(k)] == G) counter[static_cast<std::size_t>(k--)] = 0;
    if (k < 0) break;
  }
  if (!any_finite) throw numeric_error("minimize_criterion: every grid evaluation was non-finite");

  // Nelder-Mead refinement in log space from the best grid point; points
  // outside the box evaluate to +inf so the simplex stays inside.
  if (space.simplex_budget > 0) {
    const int d = space.q;
    int evals_left = space.simplex_budget;
    const auto boxed = [&](const Vec& logxi) {
      for (int k = 0; k < d; ++k)
        if (logxi[k] < space.log_lo || logxi[k] > space.log_hi) return std::numeric_limits<double>::infinity();
      if (evals_left <= 0) return std::numeric_limits<double>::infinity();
      --evals_left;
      return eval_log(logxi);
    };

    std::vector<Vec> simplex(static_cast<std::size_t>(d + 1), best_log);
    std::vector<double> fx(static_cast<std::size_t>(d + 1));
    const double init_step = std::max(0.5 * step, 1e-2);
    for (int k = 0; k < d; ++k) {
      simplex[static_cast<std::size_t>(k + 1)][k] +=
          (best_log[k] + init_step <= space.log_hi) ? init_step : -init_step;
    }
    fx[0] = best_value;
    for (int k = 1; k <= d; ++k) fx[static_cast<std::size_t>(k)] = boxed(simplex[static_cast<std::size_t>(k)]);

    std::vector<int> order(static_cast<std::size_t>(d + 1));
    while (evals_left > 0) {
      for (int k = 0; k <= d; ++k) order[static_cast<std::size_t>(k)] = k;
      std::sort(order.begin(), order.end(),
                [&](int a, int b) { return fx[static_cast<std::size_t>(a)] < fx[static_cast<std::size_t>(b)]; });
      const double f_best = fx[static_cast<std::size_t>(order[0])];
      const double f_worst = fx[static_cast<std::size_t>(order[static_cast<std::size_t>(d)])];
      if (std::isfinite(f_worst) && f_worst - f_best <= space.simplex_tol) break;

      const int iw = order[static_cast<std::size_t>(d)];
      Vec centroid = Vec::Zero(d);
      for (int k = 0; k < d; ++k) centroid += simplex[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
      centroid /= static_cast<double>(d);

      const Vec& worst = simplex[static_cast<std::size_t>(iw)];
      const Vec reflected = centroid + (centroid - worst);
      const double fr = boxed(reflected);

      if (fr < f_best) {
        const Vec expanded = centroid + 2.0 * (centroid - worst);
        const double fe = boxed(expanded);
        if (fe < fr) {
          simplex[static_cast<std::size_t>(iw)] = expanded;
          fx[static_cast<std::size_t>(iw)] = fe;
        } else {
          simplex[static_cast<std::size_t>(iw)] = reflected;
          fx[static_cast<std::size_t>(iw)] = fr;
        }
      } else if (fr < fx[static_cast<std::size_t>(order[static_cast<std::size_t>(d - 1)])]) {
        simplex[static_cast<std::size_t>(iw)] = reflected;
        fx[static_cast<std::size_t>(iw)] = fr;
      } else {
        const Vec contracted = centroid + 0.5 * (worst - centroid);
        const double fc = boxed(contracted);
        if (fc < fx[static_cast<std::size_t>(iw)]) {
          simplex[static_cast<std::size_t>(iw)] = contracted;
          fx[static_cast<std::size_t>(iw)] = fc;
        } else {
          // shrink toward the best vertex
          const Vec& anchor = simplex[static_cast<std::size_t>(order[0])];
          for (int k = 0; k <= d; ++k) {
            if (k == order[0]) continue;
            simplex[static_cast<std::size_t>(k)] = anchor + 0.5 * (simplex[static_cast<std::size_t>(k)] - anchor);
            fx[static_cast<std::size_t>(k)] = boxed(simplex[static_cast<std::size_t>(k)]);
          }
        }
      }
    }
  }

  result.xi_hat = to_natural(best_log);
  result.value = best_value;
  return result;
}

}  // namespace piic
