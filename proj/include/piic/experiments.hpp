#pragma once

#include <array>
#include <optional>
#include <string>

#include "piic/criteria.hpp"
#include "piic/hyperopt.hpp"
#include "piic/rng.hpp"

namespace piic {

// True data-generating law of a simulation scenario. The fitted model may
// differ (that is the point of the misspecified rows).
struct TrueModel {
  Vec theta_star;
  bool binomial = false;
  // linear truth
  enum class Noise { normal, student_t } noise = Noise::normal;
  double noise_variance = 1.0;
  int t_dof = 2;
  // binomial truth
  enum class Link { logit, probit } link = Link::logit;
  int trials = 10;

  double draw_y(Rng& rng, double eta) const;
  double success_prob(double eta) const;
};

struct ScenarioConfig {
  int n = 12;
  int p = 6;
  Vec theta_pattern = (Vec(3) << 2.0, 2.0, 2.0).finished();  // replicated over p/3 blocks

  bool binomial = false;
  TrueModel::Noise noise = TrueModel::Noise::normal;
  double noise_variance = 1.0;
  int t_dof = 2;
  TrueModel::Link link = TrueModel::Link::logit;
  int trials = 10;

  double fit_sigma2 = 0.0;  // fitted linear variance; 0 plugs in the OLS residual variance
  PriorFamily prior_family = PriorFamily::normal;
  int n0 = 0;  // 0 means n0 = n

  bool run_single = true;   // WAIC1 / PIIC1, one shared hyper-parameter
  bool run_grouped = true;  // WAIC2 / PIIC2, one hyper-parameter per block

  int replications = 100;
  int risk_draws = 10000;
  std::uint64_t master_seed = 1;
  int threads = 0;  // 0: hardware concurrency

  SamplerConfig sampler;
  XiSearchSpace search_single;
  XiSearchSpace search_grouped;
  double j_fd_scale = 1e-3;

  ScenarioConfig();
  void validate() const;
  std::string truth_label() const;

  static ScenarioConfig from_json_string(const std::string& text);
  std::string to_json_string() const;
};

// One replication's outcome across the criterion arms (NaN when not run).
struct ReplicationRecord {
  int replication = 0;
  std::uint64_t data_hash = 0;
  double risk_waic1 = std::numeric_limits<double>::quiet_NaN();
  double risk_piic1 = std::numeric_limits<double>::quiet_NaN();
  double risk_waic2 = std::numeric_limits<double>::quiet_NaN();
  double risk_piic2 = std::numeric_limits<double>::quiet_NaN();
  Vec xi_waic1, xi_piic1, xi_waic2, xi_piic2;
  std::string failure;  // non-empty if the replication was excluded
};

struct ComparisonRow {
  ScenarioConfig config;
  double mean_risk_waic1 = std::numeric_limits<double>::quiet_NaN();
  double mean_risk_piic1 = std::numeric_limits<double>::quiet_NaN();
  double mean_risk_waic2 = std::numeric_limits<double>::quiet_NaN();
  double mean_risk_piic2 = std::numeric_limits<double>::quiet_NaN();
  std::array<int, 3> rate1 = {0, 0, 0};  // WAIC1 <, ==, > PIIC1 on risk
  std::array<int, 3> rate2 = {0, 0, 0};
  int failures = 0;
  std::vector<ReplicationRecord> records;

  std::string csv_header() const;
  std::string csv_row() const;
  std::string to_json_string() const;  // per-replication sidecar
};

// Draws the design and responses for one replication; deterministic in
// (master_seed, replication_index). Returns the true law alongside.
Dataset generate_dataset(const ScenarioConfig& config, int replication, TrueModel* truth_out = nullptr);

// Monte-Carlo estimate of E[-log f(z|z; xi_hat)] over fresh draws from the
// true law; the m-th draw depends only on (seed, m), so extending M keeps
// the earlier draws.
double kl_risk(const TrueModel& truth, const Posterior& posterior, const LikelihoodModel& fitted_model, int p,
               int draws, std::uint64_t seed);

// The full scenario: per replication, each requested criterion arm selects
// its hyper-parameters, refits, and is scored by kl_risk on shared draws.
ComparisonRow run_comparison(const ScenarioConfig& config);

}  // namespace piic
