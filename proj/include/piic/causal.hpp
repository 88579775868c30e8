#pragma once

#include <functional>
#include <optional>

#include "piic/criteria.hpp"
#include "piic/inference.hpp"

namespace piic {

// Marginal structural model data: one observed outcome per subject, a
// treatment assignment in 1..H (stored 0-based), and confounders. The
// potential-outcome model is f^(h)(.|theta) = f(.|theta^(h)) with theta
// block-partitioned by treatment, so a subject's working design row is its
// confounder vector embedded in block h.
class MSMDataset {
 public:
  MSMDataset(Mat confounders, std::vector<int> treatment, Vec y, int n_treatments);

  int n() const { return static_cast<int>(y_.size()); }
  int s() const { return static_cast<int>(confounders_.cols()); }
  int H() const { return H_; }
  const Mat& confounders() const { return confounders_; }
  const std::vector<int>& treatment() const { return treatment_; }
  const Vec& y() const { return y_; }

 private:
  Mat confounders_;
  std::vector<int> treatment_;
  Vec y_;
  int H_;
};

// Propensity scores e^(h)(x) = P(t = h | x): either a user-supplied function
// (the default for simulations, where e is known) or a multinomial-logistic
// fit on (t, x). Values are floored at epsilon, counting the clips.
class PropensityModel {
 public:
  using KnownFn = std::function<double(const Vec& x, int h)>;

  static PropensityModel known(KnownFn fn, int H);
  static PropensityModel fitted(const MSMDataset& data, double ridge = 1e-8);

  // e^(h)(x_i) with the positivity floor applied.
  double eval(const MSMDataset& data, int row, int h) const;
  double eval_x(const Vec& x, int h) const;

  int clip_count() const { return clip_count_; }
  static constexpr double kFloor = 0.01;

 private:
  PropensityModel() = default;
  KnownFn known_;
  Mat coef_;  // (s+1) x H logits, last treatment as reference; empty if known
  int H_ = 0;
  mutable int clip_count_ = 0;
};

// The inverse-probability-weighted working problem: outcome regressed on the
// block-embedded confounders with row weights t/e and prior share 1/(n0 H).
// Owns the embedded dataset; prior groups refer to the full H*s coefficient
// vector.
struct IPWProblem {
  Dataset data;          // n x (H*s) embedded design
  LikelihoodModel model;
  PriorSpec prior;
  Vec row_weight;        // t_i / e^(h_i)(x_i)
  double prior_share;
  double prior_total;

  WeightedProblem view() const;
};

// Builds the weighted problem. The prior is specified over the full H*s
// coefficient vector (blocks may share hyper-parameter groups). Errors if
// some treatment is never observed.
IPWProblem ipw_problem(const LikelihoodModel& model, const PriorSpec& prior, const MSMDataset& data,
                       const PropensityModel& propensity);

// argmax of sum_h sum_i (t/e) log f^(h) + (n/n0) log pi.
ParameterPoint ipw_map_estimate(const IPWProblem& prob);

// log of the IPW predictive (ipwpd): only the observed-treatment factor is
// non-unity, so this is log E_post[f(y_i|theta)^(t/e)].
double ipw_predictive_logdens(const Posterior& posterior, const IPWProblem& prob, int row);

// -sum_i ipw_predictive_logdens + tr(I1^{-1} I2) with I1 weighted by t/e and
// I2 by t/e^2. With a Laplace prior the penalty and predictive are restricted
// to the active set of theta_hat, mirroring the plain sparse criterion.
struct IPWCriteria {
  double piic = 0.0;
  double lppd = 0.0;
  double penalty_theta = 0.0;
  std::optional<ActiveSet> active;
};
IPWCriteria piic_ip(const Posterior& posterior, const IPWProblem& prob, const ParameterPoint& theta_hat);

// Hyper-parameter penalty with t/e and t/e^2 weights.
JPair j_pair_ip(const IPWProblem& prob, const Vec& xi_hat, const JConfig& config);

// piic_ip at the selected xi plus tr(J1^{-1} J2).
double piic2_ip(double piic_ip_at_xi_hat, const JPair& jpair_ipw);

}  // namespace piic
