#pragma once

// Test-only oracles, independent of the library implementation paths they
// check: finite differences, Gauss-Hermite quadrature for the conjugate
// criteria, and a tensor-grid quadrature posterior for low-dimensional
// non-conjugate problems.

#include <cmath>
#include <functional>
#include <vector>

#include "piic/models.hpp"
#include "piic/rng.hpp"
#include "piic/types.hpp"

namespace oracles {

using piic::Dataset;
using piic::LikelihoodModel;
using piic::Mat;
using piic::ParameterPoint;
using piic::PriorSpec;
using piic::Vec;

// central finite-difference gradient of a scalar function
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-5) {
  Vec g(x.size());
  for (int j = 0; j < x.size(); ++j) {
    Vec xp = x, xm = x;
    const double hj = h * (1.0 + std::abs(x[j]));
    xp[j] += hj;
    xm[j] -= hj;
    g[j] = (f(xp) - f(xm)) / (2.0 * hj);
  }
  return g;
}

inline Mat fd_hessian(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-4) {
  const int p = static_cast<int>(x.size());
  Mat H(p, p);
  for (int j = 0; j < p; ++j) {
    const double hj = h * (1.0 + std::abs(x[j]));
    Vec xp = x, xm = x;
    xp[j] += hj;
    xm[j] -= hj;
    const Vec gp = fd_gradient(f, xp, h);
    const Vec gm = fd_gradient(f, xm, h);
    H.row(j) = ((gp - gm) / (2.0 * hj)).transpose();
  }
  return 0.5 * (H + H.transpose()).eval();
}

// nodes/weights for 50-point Gauss-Hermite (physicists' convention), computed
// by Newton iteration on the Hermite recurrence
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussHermite(int n) {
    nodes.resize(n);
    weights.resize(n);
    const double pi14 = std::pow(M_PI, -0.25);
    double z = 0.0;
    for (int i = 0; i < (n + 1) / 2; ++i) {
      if (i == 0)
        z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
      else if (i == 1)
        z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
      else if (i == 2)
        z = 1.86 * z - 0.86 * nodes[0];
      else if (i == 3)
        z = 1.91 * z - 0.91 * nodes[1];
      else
        z = 2.0 * z - nodes[i - 2];
      double pp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p1 = pi14, p2 = 0.0;
        for (int k = 0; k < n; ++k) {
          const double p3 = p2;
          p2 = p1;
          p1 = z * std::sqrt(2.0 / (k + 1.0)) * p2 - std::sqrt(static_cast<double>(k) / (k + 1.0)) * p3;
        }
        pp = std::sqrt(2.0 * n) * p2;
        const double z1 = z;
        z = z1 - p1 / pp;
        if (std::abs(z - z1) < 1e-15) break;
      }
      nodes[i] = z;
      nodes[n - 1 - i] = -z;
      weights[i] = 2.0 / (pp * pp);
      weights[n - 1 - i] = weights[i];
    }
  }

  // E[h(T)] for T ~ N(mu, s2)
  double expect(const std::function<double(double)>& h, double mu, double s2) const {
    const double s = std::sqrt(s2);
    double acc = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k)
      acc += weights[k] * h(mu + std::sqrt(2.0) * s * nodes[k]);
    return acc / std::sqrt(M_PI);
  }
};

// Quadrature-backed posterior for p <= 3: tensor Gauss-Legendre panels over a
// box around a center point. Exposes exact-to-quadrature posterior
// expectations E[h(theta)] under the density proportional to
// exp(joint_log_density).
class QuadraturePosterior {
 public:
  QuadraturePosterior(const piic::WeightedProblem& wp, const Vec& center, const Vec& half_width,
                      int points_per_dim = 96)
      : dim_(static_cast<int>(center.size())) {
    // Gauss-Legendre on [-1, 1]
    const int g = points_per_dim;
    std::vector<double> gl_x(g), gl_w(g);
    for (int i = 0; i < (g + 1) / 2; ++i) {
      double z = std::cos(M_PI * (i + 0.75) / (g + 0.5));
      double pp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p1 = 1.0, p2 = 0.0;
        for (int k = 0; k < g; ++k) {
          const double p3 = p2;
          p2 = p1;
          p1 = ((2.0 * k + 1.0) * z * p2 - k * p3) / (k + 1.0);
        }
        pp = g * (z * p1 - p2) / (z * z - 1.0);
        const double z1 = z;
        z = z1 - p1 / pp;
        if (std::abs(z - z1) < 1e-15) break;
      }
      gl_x[i] = -z;
      gl_x[g - 1 - i] = z;
      gl_w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
      gl_w[g - 1 - i] = gl_w[i];
    }

    // per-dimension nodes: two panels split at zero so integrands with a kink
    // at the origin (Laplace priors) are smooth on every panel
    std::vector<std::vector<double>> node_1d(static_cast<std::size_t>(dim_));
    std::vector<std::vector<double>> weight_1d(static_cast<std::size_t>(dim_));
    for (int d = 0; d < dim_; ++d) {
      const double lo = center[d] - half_width[d];
      const double hi = center[d] + half_width[d];
      std::vector<std::pair<double, double>> panels;
      if (lo < 0.0 && hi > 0.0)
        panels = {{lo, 0.0}, {0.0, hi}};
      else
        panels = {{lo, hi}};
      for (const auto& [a, b] : panels) {
        const double mid = 0.5 * (a + b), rad = 0.5 * (b - a);
        for (int c = 0; c < g; ++c) {
          node_1d[static_cast<std::size_t>(d)].push_back(mid + rad * gl_x[static_cast<std::size_t>(c)]);
          weight_1d[static_cast<std::size_t>(d)].push_back(gl_w[static_cast<std::size_t>(c)] * rad);
        }
      }
    }

    std::vector<int> counter(static_cast<std::size_t>(dim_), 0);
    double max_log = -std::numeric_limits<double>::infinity();
    while (true) {
      Vec theta(dim_);
      double logw = 0.0;
      for (int d = 0; d < dim_; ++d) {
        const int c = counter[static_cast<std::size_t>(d)];
        theta[d] = node_1d[static_cast<std::size_t>(d)][static_cast<std::size_t>(c)];
        logw += std::log(weight_1d[static_cast<std::size_t>(d)][static_cast<std::size_t>(c)]);
      }
      const double ld = piic::joint_log_density(wp, ParameterPoint(theta)) + logw;
      nodes_.push_back(theta);
      logdens_.push_back(ld);
      max_log = std::max(max_log, ld);
      int d = dim_ - 1;
      while (d >= 0 && counter[static_cast<std::size_t>(d)] + 1 ==
                           static_cast<int>(node_1d[static_cast<std::size_t>(d)].size())) {
        counter[static_cast<std::size_t>(d--)] = 0;
      }
      if (d < 0) break;
      ++counter[static_cast<std::size_t>(d)];
    }
    weights_.resize(nodes_.size());
    double total = 0.0;
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      weights_[k] = std::exp(logdens_[k] - max_log);
      total += weights_[k];
    }
    for (auto& w : weights_) w /= total;
  }

  double expect(const std::function<double(const Vec&)>& h) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < nodes_.size(); ++k) acc += weights_[k] * h(nodes_[k]);
    return acc;
  }

  // log E[f(y | x'theta)]
  double predictive_logdens(const LikelihoodModel& model, const Vec& x, double y) const {
    return weighted_predictive_logdens(model, x, y, 1.0);
  }

  // log E[f(y | x'theta)^w]
  double weighted_predictive_logdens(const LikelihoodModel& model, const Vec& x, double y, double w) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < nodes_.size(); ++k)
      acc += weights_[k] * std::exp(w * piic::log_likelihood_eta(model, y, x.dot(nodes_[k])));
    return std::log(acc);
  }

 private:
  int dim_;
  std::vector<Vec> nodes_;
  std::vector<double> logdens_;
  std::vector<double> weights_;
};

// seeded random regression problems for the oracle suites
struct TestProblem {
  Mat X;
  Vec y;
};

inline TestProblem random_linear_problem(std::uint64_t seed, int n, int p, const Vec& theta_true,
                                         double noise_sd = 1.0) {
  piic::Rng rng(seed);
  TestProblem tp;
  tp.X = Mat(n, p);
  tp.y = Vec(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) tp.X(i, j) = rng.normal();
  for (int i = 0; i < n; ++i) tp.y[i] = tp.X.row(i).dot(theta_true) + noise_sd * rng.normal();
  return tp;
}

inline TestProblem random_binomial_problem(std::uint64_t seed, int n, int p, const Vec& theta_true, int m) {
  piic::Rng rng(seed);
  TestProblem tp;
  tp.X = Mat(n, p);
  tp.y = Vec(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) tp.X(i, j) = rng.normal();
  for (int i = 0; i < n; ++i) {
    const double pr = 1.0 / (1.0 + std::exp(-tp.X.row(i).dot(theta_true)));
    tp.y[i] = rng.binomial(m, pr);
  }
  return tp;
}

}  // namespace oracles
