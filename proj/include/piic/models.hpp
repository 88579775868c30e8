#pragma once

#include <optional>

#include "piic/types.hpp"

namespace piic {

// --- likelihood -------------------------------------------------------------

// log f(z_i | theta) for a single row.
double log_likelihood_row(const LikelihoodModel& model, const Dataset& data, int row, const ParameterPoint& theta);

// Sum over rows of log f(z_i | theta).
double log_likelihood(const LikelihoodModel& model, const Dataset& data, const ParameterPoint& theta);

// log f as a function of the linear predictor eta = x'theta; the samplers and
// predictive sums use this to avoid recomputing dot products.
double log_likelihood_eta(const LikelihoodModel& model, double y, double eta);

// Likelihood score and Hessian of a single row, likelihood part only.
Vec likelihood_score_row(const LikelihoodModel& model, const Dataset& data, int row, const ParameterPoint& theta);
Mat likelihood_hessian_row(const LikelihoodModel& model, const Dataset& data, int row, const ParameterPoint& theta);

// --- prior ------------------------------------------------------------------

// log pi(theta; xi) including normalizing constants (they matter once xi is
// selected by minimizing a criterion).
double log_prior(const PriorSpec& prior, const ParameterPoint& theta);

// d/dtheta log pi. For the Laplace family this requires theta_j != 0 on every
// differentiated coordinate; restrict to an active set to skip exact zeros.
Vec prior_grad(const PriorSpec& prior, const ParameterPoint& theta);
Mat prior_hess(const PriorSpec& prior, const ParameterPoint& theta);

// d/dxi log pi(theta; xi), one entry per hyper-parameter group.
Vec prior_xi_grad(const PriorSpec& prior, const Vec& theta);

// --- intensified joint density ----------------------------------------------

// log g(z_i, theta; xi) = log f(z_i|theta) + (1/n0) log pi(theta; xi)
double log_g_row(const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data, int row,
                 const ParameterPoint& theta);

// Dataset-level log g = sum_i log f(z_i|theta) + (n/n0) log pi(theta; xi)
double log_g_total(const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data,
                   const ParameterPoint& theta);

struct RowDerivatives {
  Vec grad;
  Mat hess;
};

// Per-row gradient and Hessian of log g with respect to theta. Without an
// active set the full p coordinates are differentiated and a Laplace prior at
// a kink (theta_j = 0) is an error; with an active set the derivatives are
// taken on the active coordinates only and returned in reduced dimension.
RowDerivatives score_and_hessian(const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data, int row,
                                 const ParameterPoint& theta);
RowDerivatives score_and_hessian_active(const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data,
                                        int row, const ParameterPoint& theta, const ActiveSet& active);

// --- weighted problem -------------------------------------------------------

// Shared representation for the plain and the inverse-probability-weighted
// paths. The joint log target is
//   sum_i w_i log f(z_i|theta) + prior_total * log pi(theta; xi)
// and the per-row score of the joint density carries prior_share per row:
//   s_i = w_i d(log f_i) + prior_share * d(log pi).
// The plain path uses w = 1, prior_share = 1/n0, prior_total = n/n0; the IPW
// path uses w_i = t_i/e_i, prior_share = 1/(n0 H) and the same prior_total,
// so every criterion reduces to its plain counterpart when H = 1 and e = 1.
struct WeightedProblem {
  const Dataset* data = nullptr;
  LikelihoodModel model;
  PriorSpec prior;
  Vec row_weight;
  double prior_share = 0.0;
  double prior_total = 0.0;

  int n() const { return data->n(); }
  int p() const { return data->p(); }
};

WeightedProblem plain_problem(const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data);

// Joint log target of the weighted problem (posterior kernel up to a constant).
double joint_log_density(const WeightedProblem& wp, const ParameterPoint& theta);

}  // namespace piic
