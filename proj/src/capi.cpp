#include "piic.h"

#include <cstring>
#include <json.hpp>
#include <string>

#include "json_util.hpp"
#include "piic/workflows.hpp"

namespace {

thread_local std::string tls_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

piic_status status_of(const std::exception& e) {
  if (dynamic_cast<const piic::config_error*>(&e)) return PIIC_ERR_CONFIG;
  return PIIC_ERR_NUMERIC;
}

}  // namespace

struct piic_run {
  std::string config_json;
  std::string summary;
  std::string error;
  bool executed = false;
};

struct piic_dataset {
  piic::Mat X;
  piic::Vec y;
};

extern "C" {

const char* piic_version(void) { return piic::kVersion; }

const char* piic_last_error(void) { return tls_error.empty() ? nullptr : tls_error.c_str(); }

piic_status piic_run_create(const char* config_json, piic_run** out) {
  if (out == nullptr) return PIIC_ERR_CONFIG;
  *out = nullptr;
  if (config_json == nullptr) {
    tls_error = "piic_run_create: null config";
    return PIIC_ERR_CONFIG;
  }
  try {
    // validate the document shape up front so create fails fast
    const auto j = nlohmann::json::parse(config_json);
    if (!j.contains("subcommand") || !j["subcommand"].is_string())
      throw piic::config_error("run config: missing 'subcommand'");
    auto* run = new piic_run;
    run->config_json = config_json;
    *out = run;
    return PIIC_OK;
  } catch (const std::exception& e) {
    tls_error = e.what();
    return PIIC_ERR_CONFIG;
  }
}

piic_status piic_run_execute(piic_run* run, const char* out_dir) {
  if (run == nullptr || out_dir == nullptr) {
    tls_error = "piic_run_execute: null argument";
    return PIIC_ERR_CONFIG;
  }
  try {
    run->summary = piic::run_config(run->config_json, out_dir);
    run->executed = true;
    run->error.clear();
    return PIIC_OK;
  } catch (const std::exception& e) {
    run->error = e.what();
    run->executed = false;
    return status_of(e);
  }
}

const char* piic_run_summary(const piic_run* run) {
  if (run == nullptr || !run->executed) return nullptr;
  return run->summary.c_str();
}

const char* piic_run_error(const piic_run* run) {
  if (run == nullptr || run->error.empty()) return nullptr;
  return run->error.c_str();
}

void piic_run_destroy(piic_run* run) { delete run; }

piic_status piic_dataset_create(const double* y, const double* x_row_major, int n, int p, piic_dataset** out) {
  if (out == nullptr) return PIIC_ERR_CONFIG;
  *out = nullptr;
  if (y == nullptr || x_row_major == nullptr || n < 1 || p < 1) {
    tls_error = "piic_dataset_create: invalid arguments";
    return PIIC_ERR_CONFIG;
  }
  try {
    auto* data = new piic_dataset;
    data->y = Eigen::Map<const piic::Vec>(y, n);
    data->X = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(x_row_major,
                                                                                                       n, p);
    *out = data;
    return PIIC_OK;
  } catch (const std::exception& e) {
    tls_error = e.what();
    return PIIC_ERR_CONFIG;
  }
}

void piic_dataset_destroy(piic_dataset* data) { delete data; }

piic_status piic_analyze_dataset(const piic_dataset* data, const char* options_json, char** report_json) {
  if (report_json == nullptr) return PIIC_ERR_CONFIG;
  *report_json = nullptr;
  if (data == nullptr || options_json == nullptr) {
    tls_error = "piic_analyze_dataset: null argument";
    return PIIC_ERR_CONFIG;
  }
  try {
    const auto a = nlohmann::json::parse(options_json);
    piic::AnalyzeConfig cfg;
    cfg.seed = a.value("seed", 1ULL);
    if (a.contains("model")) {
      const std::string kind = a["model"].value("kind", "linear_gaussian");
      if (kind == "linear_gaussian") {
        cfg.model_kind = piic::LikelihoodModel::Kind::linear_gaussian;
        if (a["model"].contains("sigma2") && !a["model"]["sigma2"].is_null())
          cfg.sigma2 = a["model"]["sigma2"].get<double>();
      } else if (kind == "logistic_binomial") {
        cfg.model_kind = piic::LikelihoodModel::Kind::logistic_binomial;
        cfg.trials = a["model"].value("m", 1);
      } else {
        throw piic::config_error("analyze options: unknown model kind '" + kind + "'");
      }
    }
    if (a.contains("prior")) {
      const std::string fam = a["prior"].value("family", "laplace");
      if (fam == "normal")
        cfg.prior_family = piic::PriorFamily::normal;
      else if (fam == "laplace")
        cfg.prior_family = piic::PriorFamily::laplace;
      else
        throw piic::config_error("analyze options: unknown prior family '" + fam + "'");
      if (a["prior"].contains("groups"))
        for (const auto& g : a["prior"]["groups"]) cfg.groups.push_back(g.get<std::vector<int>>());
      cfg.n0 = a["prior"].value("n0", 0);
    }
    if (a.contains("criteria")) cfg.criteria = a["criteria"].get<std::vector<std::string>>();
    if (a.contains("sampler")) piic::jsonutil::sampler_from_json(a["sampler"], cfg.sampler);
    if (a.contains("search")) piic::jsonutil::search_from_json(a["search"], cfg.search);
    cfg.cross_check = a.value("cross_check", false);
    cfg.force_sampling = a.value("force_sampling", false);

    const piic::AnalyzeResult res = piic::run_analyze_data(data->X, data->y, cfg);
    nlohmann::ordered_json report;
    report["n"] = res.n;
    report["p"] = res.p;
    report["sigma2"] = res.sigma2_used;
    nlohmann::ordered_json crit;
    for (const auto& [name, r] : res.reports) crit[name] = nlohmann::ordered_json::parse(r.to_json_string());
    report["criteria"] = crit;
    *report_json = dup_string(report.dump(2));
    if (*report_json == nullptr) {
      tls_error = "piic_analyze_dataset: allocation failure";
      return PIIC_ERR_NUMERIC;
    }
    return PIIC_OK;
  } catch (const std::exception& e) {
    tls_error = e.what();
    return status_of(e);
  }
}

void piic_string_free(char* s) { std::free(s); }

}  // extern "C"
