#pragma once

#include <map>
#include <optional>
#include <string>

#include "piic/inference.hpp"

namespace piic {

// Empirical Fisher information pair at the MAP point,
//   I1 = -(1/n) d^2 log g(z, theta; xi) / dtheta dtheta'
//   I2 =  (1/n) sum_i s_i s_i',  s_i = d log g(z_i, theta; xi) / dtheta,
// restricted to the active coordinates when an active set is given.
struct FisherPair {
  Mat I1;
  Mat I2;
  ParameterPoint at;
  std::optional<ActiveSet> active;
};

// Hyper-parameter information pair at the selected xi,
//   J1 = -(1/n) sum_i d^2 log f(z_i|z; xi) / dxi dxi'   (central differences)
//   J2 =  (1/n) sum_i psi_i psi_i',  psi_i = d log f(z_i|z; xi) / dxi.
struct JPair {
  Mat J1;
  Mat J2;
  Vec at_xi;
  double fd_step_scale = 1e-3;
  bool j1_pseudo_inverse = false;
};

// tr(I1^{-1} I2) through a symmetric eigendecomposition; condition numbers
// beyond 1e10 (or non-PD I1) fall back to the pseudo-inverse and are flagged.
struct TracePenalty {
  double value = 0.0;
  bool pseudo_inverse = false;
  double condition_number = 1.0;
};
TracePenalty trace_penalty(const Mat& I1, const Mat& I2);

// --- predictive density -------------------------------------------------

// Repeated evaluation of the Bayesian predictive density log E[f(z|theta)^w]
// under a fixed posterior. Restricted posteriors are reduced to their active
// coordinates once, so the inactive ones never enter the arithmetic. The
// exponent w is 1 for the plain predictive; the IPW predictive raises the
// observed-treatment factor to t/e.
class PredictiveEvaluator {
 public:
  PredictiveEvaluator(const Posterior& posterior, const LikelihoodModel& model);

  // log E[f(y | x'theta)^w]; exponent defaults to the plain predictive.
  double logdens(const Vec& x_full, double y, double weight = 1.0) const;

  // Per-sample log f(y | x'theta) for all posterior samples (sample form only).
  Vec per_sample_loglik(const Vec& x_full, double y) const;

  const Posterior& posterior() const { return *posterior_; }

 private:
  const Posterior* posterior_;
  LikelihoodModel model_;
  std::vector<int> idx_;  // coordinates in use (active set or all)
  Mat samples_;           // gathered samples (sample form)
  Vec mean_;              // gathered mean / covariance (analytic form)
  Mat cov_;
  Vec gather(const Vec& x_full) const;
};

// log f(z_i | z; xi) = log E_posterior[f(z_i | theta)] for a data row.
double predictive_logdens(const Posterior& posterior, const LikelihoodModel& model, const Dataset& data, int row);

// Sum over rows of the predictive log density.
double lppd(const Posterior& posterior, const LikelihoodModel& model, const Dataset& data);

// --- classical criteria -----------------------------------------------------

// WAIC: -sum_i log E[f(z_i|theta)] + sum_i E[(log f)^2] - sum_i (E[log f])^2.
double waic(const Posterior& posterior, const LikelihoodModel& model, const Dataset& data);

// DIC: sum_i log f(z_i | E[theta]) - 2 sum_i E[log f(z_i|theta)].
double dic(const Posterior& posterior, const LikelihoodModel& model, const Dataset& data);

// --- PIIC ---------------------------------------------------------------

// Empirical information pair at theta_hat. A Laplace prior requires an
// active set (the matrices are then formed on the active block only).
FisherPair fisher_pair(const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data,
                       const ParameterPoint& theta_hat, const std::optional<ActiveSet>& active = std::nullopt);
FisherPair fisher_pair_wp(const WeightedProblem& wp, const ParameterPoint& theta_hat,
                          const std::optional<ActiveSet>& active = std::nullopt);

// Restrict a dense pair to an active block (extracts submatrices).
FisherPair fisher_pair_restrict(const FisherPair& dense, const ActiveSet& active);

// PIIC = -sum_i log f^(active)(z_i | z; xi) + tr(I1^{-1} I2). The posterior
// must match the fisher pair: restricted posterior with the same active set
// in the sparse case, unrestricted in the dense case.
double piic(const Posterior& posterior, const LikelihoodModel& model, const Dataset& data, const FisherPair& fisher);

// --- hyper-parameter penalty ----------------------------------------------

// d/dxi log f(z_i | z; xi) by the posterior-covariance identity
//   E[f (u - E u)] / E[f],   u = d log pi_n(theta; xi)/dxi.
Vec xi_score(const Posterior& posterior, const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data,
             int row);

// All rows at once (n x q).
Mat xi_scores(const Posterior& posterior, const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data);

// Identity-path kernel with an externally supplied per-sample u matrix
// (S x q rows of d log pi_n / dxi). A xi-independent prior has u = 0 and
// yields exactly zero scores.
Mat xi_scores_identity(const Posterior& posterior, const LikelihoodModel& model, const Dataset& data,
                       const Mat& u_samples);

struct JConfig {
  SamplerConfig sampler;          // common random numbers: one seed for every perturbed posterior
  double fd_scale = 1e-3;         // h_k = fd_scale * (1 + |xi_k|)
  bool force_sampling = false;    // sample even when the conjugate form exists
  std::optional<ActiveSet> active;  // freeze the active set across the FD stencil (sparse path)
};

// Independent finite-difference route for the xi-score: central differences
// of the predictive log density over fresh common-seed posteriors at xi +- h.
Mat xi_scores_fd(const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data, const Vec& xi_hat,
                 const JConfig& config);

JPair j_pair(const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data, const Vec& xi_hat,
             const JConfig& config);
JPair j_pair_wp(const WeightedProblem& wp, const Vec& xi_hat, const JConfig& config);

// PIIC2 = PIIC(xi_hat) + tr(J1^{-1} J2).
double piic2(double piic_at_xi_hat, const JPair& jpair);

// --- report -----------------------------------------------------------------

struct CriterionReport {
  std::string selected_by;  // criterion that chose xi
  int p = 0;
  Vec xi;
  double lppd = 0.0;
  double dic = 0.0;
  double waic = 0.0;
  double piic = 0.0;
  double piic_penalty = 0.0;
  std::optional<double> piic2;
  std::optional<double> j_penalty;
  std::optional<ActiveSet> active;
  std::map<std::string, double> diagnostics;

  std::string to_json_string() const;
  static CriterionReport from_json_string(const std::string& text);
};

}  // namespace piic
