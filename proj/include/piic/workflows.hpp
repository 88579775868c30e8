#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "piic/causal.hpp"
#include "piic/criteria.hpp"
#include "piic/experiments.hpp"
#include "piic/hyperopt.hpp"

namespace piic {

inline constexpr const char* kVersion = "0.1.0";

// --- CSV ingestion ------------------------------------------------------

struct CsvSchema {
  std::string response = "y";
  std::vector<std::string> covariates;  // empty: every non-response column
  bool standardize = true;
  bool center_response = false;
};

struct IngestResult {
  Mat X;
  Vec y;
  std::vector<std::string> covariate_names;
  Vec center;        // applied to covariates when standardizing
  Vec scale;
  double y_center = 0.0;
};

// Parses a numeric CSV with a header row. Missing or non-numeric cells are
// an error listing the offending rows; zero-variance columns are an error
// under standardization.
IngestResult ingest_csv(const std::string& path, const CsvSchema& schema);

// Column standardization on an already-loaded matrix (used by the per-split
// diabetes analyses).
void standardize_columns(Mat& X, Vec& center, Vec& scale);

// --- analyze ------------------------------------------------------------

struct AnalyzeConfig {
  std::string csv_path;
  CsvSchema schema;
  LikelihoodModel::Kind model_kind = LikelihoodModel::Kind::linear_gaussian;
  double sigma2 = 0.0;  // <= 0: plug in the OLS residual variance
  int trials = 1;
  PriorFamily prior_family = PriorFamily::laplace;
  std::vector<std::vector<int>> groups;  // 1-based covariate indices; empty: one group
  int n0 = 0;                            // 0: n
  std::vector<std::string> criteria = {"waic", "piic"};
  SamplerConfig sampler;
  XiSearchSpace search;
  bool cross_check = false;
  bool force_sampling = false;
  std::uint64_t seed = 1;
};

struct AnalyzeResult {
  // one report per requested criterion, keyed by the criterion name
  std::map<std::string, CriterionReport> reports;
  double sigma2_used = 0.0;
  int n = 0, p = 0;
};

AnalyzeResult run_analyze(const AnalyzeConfig& config);

// In-memory variant; the csv/schema fields of the config are ignored.
AnalyzeResult run_analyze_data(const Mat& X, const Vec& y, const AnalyzeConfig& config);

// --- diabetes workflow ----------------------------------------------------

struct DiabetesConfig {
  std::string csv_path = "data/diabetes.csv";
  int splits = 13;
  int split_size = 34;
  std::uint64_t seed = 1;
  SamplerConfig sampler;
  XiSearchSpace search;  // q = 2: one rate for the first four coefficients, one for the six serum columns
  int serum_start = 5;   // 1-based first serum column (tc)
};

struct DiabetesSplitResult {
  int split = 0;
  std::vector<int> row_indices;
  double sigma2 = 0.0;
  Vec coef_waic2;  // sparse MAP at the WAIC-selected hyper-parameters
  Vec coef_piic2;
  Vec xi_waic2, xi_piic2;
  std::vector<int> active_waic2, active_piic2;  // 0-based covariate indices
};

struct DiabetesResult {
  std::vector<std::string> covariate_names;
  std::vector<DiabetesSplitResult> splits;
};

DiabetesResult run_diabetes(const DiabetesConfig& config);

// --- causal workflow ----------------------------------------------------

struct CausalSimConfig {
  // data: either a CSV (columns t, y, x1..xs) or a built-in simulation
  std::string csv_path;  // empty: simulate
  int sim_n = 400;
  int sim_s = 2;
  int sim_H = 2;
  Vec sim_theta;               // length H*s; empty: alternating +-1
  double sim_confounding = 0.8;  // logistic coefficient of x1 in the assignment
  double sim_noise_sd = 1.0;

  PriorFamily prior_family = PriorFamily::normal;
  std::vector<std::vector<int>> groups;  // over the H*s coefficients
  int n0 = 0;
  double sigma2 = 1.0;

  enum class PropensityMode { fitted, known_constant, known_logistic } propensity = PropensityMode::fitted;
  std::vector<double> known_probs;  // known_constant: one value per treatment
  Vec known_coef;                   // known_logistic (H = 2): logit coefficients over x

  std::vector<std::string> criteria = {"piic_ip", "piic2_ip"};
  SamplerConfig sampler;
  XiSearchSpace search;
  std::uint64_t seed = 1;
};

struct CausalSimResult {
  std::map<std::string, CriterionReport> reports;
  int clip_count = 0;
  int n = 0, H = 0, s = 0;
};

CausalSimResult run_causal_sim(const CausalSimConfig& config);

// --- orchestration ----------------------------------------------------------

// Executes a full run described by a JSON config, writing report.json,
// table.csv and manifest.json under out_dir. Returns a one-line summary.
std::string run_config(const std::string& config_json, const std::filesystem::path& out_dir);

// FNV-1a content hash used in manifests.
std::string config_hash_hex(const std::string& canonical_config);

}  // namespace piic
