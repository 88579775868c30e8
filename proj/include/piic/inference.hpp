#pragma once

#include <optional>

#include "piic/models.hpp"
#include "piic/types.hpp"

namespace piic {

struct SamplerConfig {
  int chain_length = 50000;
  int burn_in = 10000;
  int thin = 4;
  std::uint64_t seed = 0;
  double target_accept = 0.44;
  double init_step = 1.0;  // multiplier on the curvature-based proposal scale

  void validate() const;
};

struct ChainMeta {
  double accept_rate = 0.0;
  int chain_length = 0;
  int burn_in = 0;
  int thin = 1;
};

// Posterior of theta given the data at a fixed xi: either an exact Gaussian
// (conjugate linear-Gaussian / normal-prior case) or a Metropolis sample set.
// Restricted posteriors keep full-length storage with exact zeros on the
// inactive coordinates.
class Posterior {
 public:
  static Posterior analytic(Vec mean, Mat cov, ParameterPoint map_point, Vec xi_used,
                            std::optional<ActiveSet> active = std::nullopt);
  static Posterior from_samples(Mat samples, ChainMeta meta, ParameterPoint map_point, Vec xi_used,
                                std::optional<ActiveSet> active = std::nullopt);
  // Point mass at theta = 0: the fallback predictive when the active set is
  // empty (no free coordinates remain).
  static Posterior zero_point_mass(int p, Vec xi_used);

  bool is_analytic() const { return analytic_; }
  bool is_zero_point_mass() const { return zero_point_mass_; }
  const Vec& mean() const;
  const Mat& cov() const;
  const Mat& samples() const;
  int sample_count() const { return static_cast<int>(samples_.rows()); }
  int p() const { return p_; }
  const ChainMeta& meta() const { return meta_; }
  const ParameterPoint& map_point() const { return map_point_; }
  const Vec& xi_used() const { return xi_used_; }
  const std::optional<ActiveSet>& active() const { return active_; }

  // Posterior mean of theta (analytic mean or sample average).
  Vec theta_mean() const;

 private:
  Posterior() = default;
  bool analytic_ = false;
  bool zero_point_mass_ = false;
  Vec mean_;
  Mat cov_;
  Mat samples_;
  ChainMeta meta_;
  ParameterPoint map_point_;
  Vec xi_used_;
  std::optional<ActiveSet> active_;
  int p_ = 0;
};

// --- MAP estimation -----------------------------------------------------

// Maximizer of the dataset-level log g. Closed-form ridge solve for the
// linear/normal pair, damped Newton for logistic/normal, coordinate descent
// for linear/Laplace and proximal gradient for logistic/Laplace (the last two
// produce exact zeros).
ParameterPoint map_estimate(const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data);
ParameterPoint map_estimate_wp(const WeightedProblem& wp);

// Coordinate-descent path with the per-sweep objective (-log g) recorded;
// linear-Gaussian / Laplace-prior problems only.
ParameterPoint map_estimate_traced(const WeightedProblem& wp, std::vector<double>& objective_trace);

// Largest violation of the (sub)gradient optimality condition at theta;
// should be ~0 at a converged MAP.
double map_kkt_violation(const WeightedProblem& wp, const ParameterPoint& theta);

// --- posteriors -----------------------------------------------------------

// Exact Gaussian posterior for the linear-Gaussian likelihood under the
// normal prior: precision X'WX/sigma2 + (n/n0) diag(1/zeta).
Posterior conjugate_posterior(const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data);
Posterior conjugate_posterior_wp(const WeightedProblem& wp);

// Degenerate no-data case: the (unintensified) prior itself.
Posterior posterior_from_prior(const PriorSpec& prior);

// Componentwise adaptive random-walk Metropolis targeting
// exp(joint_log_density). Proposal scales adapt during burn-in only; the
// chain is a deterministic function of config.seed.
Posterior mcmc_sample(const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data,
                      const SamplerConfig& config);
Posterior mcmc_sample_wp(const WeightedProblem& wp, const SamplerConfig& config);

// Posterior over the active coordinates with the rest pinned to zero. Uses
// the exact conjugate form when available, otherwise the same sampler on the
// reduced space. An empty active set yields the zero point mass.
Posterior restricted_posterior(const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data,
                               const ActiveSet& active, const SamplerConfig& config);
Posterior restricted_posterior_wp(const WeightedProblem& wp, const ActiveSet& active, const SamplerConfig& config);

// --- reduced problems ------------------------------------------------------

// A weighted problem restricted to the active coordinates. Owns the reduced
// dataset/prior; group_origin maps reduced prior groups back to the original
// hyper-parameter indices.
struct ReducedProblem {
  Dataset data;
  PriorSpec prior;
  LikelihoodModel model;
  Vec row_weight;
  double prior_share;
  double prior_total;
  std::vector<int> group_origin;

  WeightedProblem view() const;
};

ReducedProblem reduce_problem(const WeightedProblem& wp, const ActiveSet& active);

// Convenience: conjugate posterior when the model/prior pair admits one,
// otherwise Metropolis samples.
bool conjugate_available(const WeightedProblem& wp);
Posterior fit_posterior_wp(const WeightedProblem& wp, const SamplerConfig& config, bool force_sampling = false);

}  // namespace piic
