#include "piic/workflows.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "json_util.hpp"

namespace piic {

using nlohmann::ordered_json;

// --- CSV ----------------------------------------------------------------

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) {
    // trim surrounding whitespace
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

IngestResult ingest_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw config_error("ingest_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw config_error("ingest_csv: '" + path + "' is empty");
  const std::vector<std::string> header = split_line(line);

  const auto col_of = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw config_error("ingest_csv: no column named '" + name + "' in '" + path + "'");
    return static_cast<int>(it - header.begin());
  };

  const int y_col = col_of(schema.response);
  std::vector<int> x_cols;
  std::vector<std::string> x_names;
  if (schema.covariates.empty()) {
    for (int c = 0; c < static_cast<int>(header.size()); ++c)
      if (c != y_col) {
        x_cols.push_back(c);
        x_names.push_back(header[static_cast<std::size_t>(c)]);
      }
  } else {
    for (const auto& name : schema.covariates) {
      x_cols.push_back(col_of(name));
      x_names.push_back(name);
    }
  }
  if (x_cols.empty()) throw config_error("ingest_csv: no covariate columns");

  std::vector<std::vector<double>> rows;
  std::vector<double> ys;
  std::vector<int> bad_rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_line(line);
    bool ok = static_cast<int>(fields.size()) == static_cast<int>(header.size());
    std::vector<double> row(x_cols.size(), 0.0);
    double yv = 0.0;
    if (ok) {
      const auto parse = [&](int c, double& out) {
        const std::string& f = fields[static_cast<std::size_t>(c)];
        if (f.empty()) return false;
        try {
          std::size_t used = 0;
          out = std::stod(f, &used);
          return used == f.size();
        } catch (...) {
          return false;
        }
      };
      ok = parse(y_col, yv);
      for (std::size_t k = 0; ok && k < x_cols.size(); ++k) ok = parse(x_cols[k], row[k]);
    }
    if (!ok) {
      bad_rows.push_back(line_no);
      continue;
    }
    rows.push_back(std::move(row));
    ys.push_back(yv);
  }
  if (!bad_rows.empty()) {
    std::string msg = "ingest_csv: missing or non-numeric values in '" + path + "' at line(s)";
    for (std::size_t k = 0; k < bad_rows.size() && k < 20; ++k) msg += " " + std::to_string(bad_rows[k]);
    if (bad_rows.size() > 20) msg += " ...";
    throw config_error(msg);
  }
  if (rows.empty()) throw config_error("ingest_csv: '" + path + "' has no data rows");

  IngestResult out;
  const int n = static_cast<int>(rows.size());
  const int p = static_cast<int>(x_cols.size());
  out.X = Mat(n, p);
  out.y = Vec(n);
  for (int i = 0; i < n; ++i) {
    out.y[i] = ys[static_cast<std::size_t>(i)];
    for (int j = 0; j < p; ++j) out.X(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  out.covariate_names = std::move(x_names);
  out.center = Vec::Zero(p);
  out.scale = Vec::Ones(p);
  if (schema.standardize) standardize_columns(out.X, out.center, out.scale);
  if (schema.center_response) {
    out.y_center = out.y.mean();
    out.y.array() -= out.y_center;
  }
  return out;
}

void standardize_columns(Mat& X, Vec& center, Vec& scale) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  center = Vec(p);
  scale = Vec(p);
  for (int j = 0; j < p; ++j) {
    const double mu = X.col(j).mean();
    const double sd = std::sqrt((X.col(j).array() - mu).square().sum() / std::max(1, n - 1));
    if (!(sd > 0.0)) throw config_error("standardize: zero variance column " + std::to_string(j + 1));
    center[j] = mu;
    scale[j] = sd;
    X.col(j) = (X.col(j).array() - mu) / sd;
  }
}

// --- shared criterion machinery ------------------------------------------

namespace {

std::vector<int> groups_to_map(const std::vector<std::vector<int>>& groups, int p) {
  if (groups.empty()) return PriorSpec::single_group(p);
  std::vector<int> map(static_cast<std::size_t>(p), -1);
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (int one_based : groups[g]) {
      if (one_based < 1 || one_based > p) throw config_error("prior groups: index out of range");
      if (map[static_cast<std::size_t>(one_based - 1)] != -1)
        throw config_error("prior groups: coefficient assigned twice");
      map[static_cast<std::size_t>(one_based - 1)] = static_cast<int>(g);
    }
  for (int v : map)
    if (v == -1) throw config_error("prior groups: some coefficient has no group");
  return map;
}

double ols_sigma2(const Mat& X, const Vec& y) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  if (n <= p) throw config_error("sigma2 plug-in: need n > p for the residual variance");
  const Vec beta = (X.transpose() * X).ldlt().solve(X.transpose() * y);
  const double rss = (y - X * beta).squaredNorm();
  return rss / static_cast<double>(n - p);
}

struct CriterionParts {
  double value = 0.0;     // the criterion being minimized
  double lppd = 0.0;      // predictive log density used by that criterion
  double piic = 0.0;
  double penalty_theta = 0.0;
  std::optional<double> piic2;
  std::optional<double> j_penalty;
  std::optional<ActiveSet> active;
  Posterior posterior;  // the criterion's predictive posterior at this xi
};

// Evaluates one named criterion at a fixed prior. "waic"/"dic" use the full
// posterior; "piic"/"piic2" use the sparse path under a Laplace prior.
CriterionParts evaluate_criterion(const std::string& name, const WeightedProblem& wp, const SamplerConfig& sampler,
                                  double j_fd_scale, bool force_sampling, bool want_value_only) {
  if (name == "waic" || name == "dic") {
    Posterior post = fit_posterior_wp(wp, sampler, force_sampling);
    CriterionParts parts{0.0, 0.0, 0.0, 0.0, std::nullopt, std::nullopt, std::nullopt, std::move(post)};
    parts.value = name == "waic" ? waic(parts.posterior, wp.model, *wp.data)
                                 : dic(parts.posterior, wp.model, *wp.data);
    if (!want_value_only) parts.lppd = lppd(parts.posterior, wp.model, *wp.data);
    return parts;
  }
  if (name != "piic" && name != "piic2") throw config_error("unknown criterion '" + name + "'");

  const ParameterPoint theta_hat = map_estimate_wp(wp);
  std::optional<ActiveSet> active;
  if (wp.prior.family() == PriorFamily::laplace) active = active_set(theta_hat);
  Posterior post = active.has_value() ? restricted_posterior_wp(wp, *active, sampler)
                                      : fit_posterior_wp(wp, sampler, force_sampling);
  const FisherPair fp = fisher_pair_wp(wp, theta_hat, active);
  const double lp = lppd(post, wp.model, *wp.data);
  const double penalty = trace_penalty(fp.I1, fp.I2).value;
  CriterionParts parts{0.0, lp, -lp + penalty, penalty, std::nullopt, std::nullopt, active, std::move(post)};
  parts.value = parts.piic;
  if (name == "piic2") {
    JConfig jc;
    jc.sampler = sampler;
    jc.fd_scale = j_fd_scale;
    jc.force_sampling = force_sampling;
    jc.active = active;
    const JPair jp = j_pair_wp(wp, wp.prior.xi(), jc);
    parts.j_penalty = trace_penalty(jp.J1, jp.J2).value;
    parts.piic2 = parts.piic + *parts.j_penalty;
    parts.value = *parts.piic2;
  }
  return parts;
}

}  // namespace

// --- analyze ------------------------------------------------------------

AnalyzeResult run_analyze_data(const Mat& X, const Vec& y, const AnalyzeConfig& config) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());

  AnalyzeResult result;
  result.n = n;
  result.p = p;

  LikelihoodModel model = LikelihoodModel::linear(1.0);
  if (config.model_kind == LikelihoodModel::Kind::linear_gaussian) {
    result.sigma2_used = config.sigma2 > 0.0 ? config.sigma2 : ols_sigma2(X, y);
    model = LikelihoodModel::linear(result.sigma2_used);
  } else {
    model = LikelihoodModel::logistic(config.trials);
  }
  const Dataset data = config.model_kind == LikelihoodModel::Kind::linear_gaussian
                           ? Dataset::gaussian(X, y)
                           : Dataset::binomial(X, y, config.trials);

  const int n0 = config.n0 > 0 ? config.n0 : n;
  const std::vector<int> group_map = groups_to_map(config.groups, p);
  const int q = 1 + *std::max_element(group_map.begin(), group_map.end());
  const PriorSpec prior_base(config.prior_family, group_map, n0, Vec::Ones(q));

  XiSearchSpace space = config.search;
  space.q = q;
  SamplerConfig sampler = config.sampler;
  sampler.seed = derive_seed(config.seed, "analyze-crn");

  for (const auto& name : config.criteria) {
    if (name != "waic" && name != "dic" && name != "piic" && name != "piic2")
      throw config_error("analyze: unknown criterion '" + name + "'");
    const auto objective = [&](const Vec& xi) {
      return evaluate_criterion(name, plain_problem(model, prior_base.with_xi(xi), data), sampler, 1e-3,
                                config.force_sampling, true)
          .value;
    };
    const MinimizeResult res = minimize_criterion(objective, space);

    // assemble the full report at xi_hat: the PIIC parts are always present
    const WeightedProblem wp = plain_problem(model, prior_base.with_xi(res.xi_hat), data);
    CriterionParts parts =
        evaluate_criterion(name == "piic2" ? "piic2" : "piic", wp, sampler, 1e-3, config.force_sampling, false);

    CriterionReport report;
    report.selected_by = name;
    report.p = p;
    report.xi = res.xi_hat;
    report.lppd = parts.lppd;
    report.piic = parts.piic;
    report.piic_penalty = parts.penalty_theta;
    report.piic2 = parts.piic2;
    report.j_penalty = parts.j_penalty;
    report.active = parts.active;

    // the classical criteria are evaluated on the full posterior at xi_hat
    const Posterior full = fit_posterior_wp(wp, sampler, config.force_sampling);
    report.dic = dic(full, model, data);
    report.waic = waic(full, model, data);
    report.diagnostics["lppd_dense"] = lppd(full, model, data);

    {
      const ParameterPoint theta_hat = map_estimate_wp(wp);
      report.diagnostics["map_kkt_violation"] = map_kkt_violation(wp, theta_hat);
      if (parts.active.has_value())
        report.diagnostics["active_size"] = static_cast<double>(parts.active->size());
    }
    if (!parts.posterior.is_analytic() && !parts.posterior.is_zero_point_mass())
      report.diagnostics["accept_rate"] = parts.posterior.meta().accept_rate;
    report.diagnostics["search_evaluations"] = static_cast<double>(res.trace.size());

    if (config.cross_check) {
      if (conjugate_available(wp)) {
        const Posterior exact = conjugate_posterior_wp(wp);
        const Posterior sampled = mcmc_sample_wp(wp, sampler);
        const double w_exact = waic(exact, model, data);
        const double w_mc = waic(sampled, model, data);
        const double d_exact = dic(exact, model, data);
        const double d_mc = dic(sampled, model, data);
        report.diagnostics["cross_check_waic_rel"] = std::abs(w_mc - w_exact) / std::max(1.0, std::abs(w_exact));
        report.diagnostics["cross_check_dic_rel"] = std::abs(d_mc - d_exact) / std::max(1.0, std::abs(d_exact));
        report.diagnostics["cross_check_ok"] =
            (report.diagnostics["cross_check_waic_rel"] < 1e-2 && report.diagnostics["cross_check_dic_rel"] < 1e-2)
                ? 1.0
                : 0.0;
      } else {
        report.diagnostics["cross_check_unavailable"] = 1.0;
      }
    }
    result.reports.emplace(name, std::move(report));
  }
  return result;
}

AnalyzeResult run_analyze(const AnalyzeConfig& config) {
  const IngestResult ingest = ingest_csv(config.csv_path, config.schema);
  return run_analyze_data(ingest.X, ingest.y, config);
}

// --- diabetes ---------------------------------------------------------------

DiabetesResult run_diabetes(const DiabetesConfig& config) {
  CsvSchema schema;
  schema.response = "y";
  schema.standardize = false;  // standardized per split below
  const IngestResult raw = ingest_csv(config.csv_path, schema);
  const int n = static_cast<int>(raw.X.rows());
  const int p = static_cast<int>(raw.X.cols());
  if (n != config.splits * config.split_size)
    throw config_error("diabetes workflow: dataset has " + std::to_string(n) + " rows, expected " +
                       std::to_string(config.splits * config.split_size));

  // deterministic seeded partition into disjoint splits
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(config.seed, "diabetes-split"));
  for (int i = n - 1; i > 0; --i) {
    const int k = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(k)]);
  }

  // two hyper-parameter groups: the first serum_start-1 covariates and the rest
  std::vector<int> group_map(static_cast<std::size_t>(p), 0);
  for (int j = config.serum_start - 1; j < p; ++j) group_map[static_cast<std::size_t>(j)] = 1;

  DiabetesResult result;
  result.covariate_names = raw.covariate_names;
  result.splits.resize(static_cast<std::size_t>(config.splits));

  for (int s = 0; s < config.splits; ++s) {
    DiabetesSplitResult& split = result.splits[static_cast<std::size_t>(s)];
    split.split = s;
    split.row_indices.assign(order.begin() + s * config.split_size, order.begin() + (s + 1) * config.split_size);
    std::sort(split.row_indices.begin(), split.row_indices.end());

    Mat X(config.split_size, p);
    Vec y(config.split_size);
    for (int i = 0; i < config.split_size; ++i) {
      X.row(i) = raw.X.row(split.row_indices[static_cast<std::size_t>(i)]);
      y[i] = raw.y[split.row_indices[static_cast<std::size_t>(i)]];
    }
    Vec center, scale;
    standardize_columns(X, center, scale);
    y.array() -= y.mean();

    split.sigma2 = ols_sigma2(X, y);
    const Dataset data = Dataset::gaussian(X, y);
    const LikelihoodModel model = LikelihoodModel::linear(split.sigma2);
    const PriorSpec prior_base(PriorFamily::laplace, group_map, data.n(), Vec::Ones(2));

    XiSearchSpace space = config.search;
    space.q = 2;
    SamplerConfig sampler = config.sampler;
    sampler.seed = derive_seed(config.seed, "diabetes-crn", static_cast<std::uint64_t>(s));

    for (const char* name : {"waic", "piic2"}) {
      const auto objective = [&](const Vec& xi) {
        return evaluate_criterion(name, plain_problem(model, prior_base.with_xi(xi), data), sampler, 1e-3, false,
                                  true)
            .value;
      };
      const MinimizeResult res = minimize_criterion(objective, space);
      const ParameterPoint theta =
          map_estimate_wp(plain_problem(model, prior_base.with_xi(res.xi_hat), data));
      const ActiveSet act = active_set(theta);
      if (std::string(name) == "waic") {
        split.coef_waic2 = theta.theta;
        split.xi_waic2 = res.xi_hat;
        split.active_waic2 = act.indices();
      } else {
        split.coef_piic2 = theta.theta;
        split.xi_piic2 = res.xi_hat;
        split.active_piic2 = act.indices();
      }
    }
  }
  return result;
}

// --- causal simulation ------------------------------------------------------

CausalSimResult run_causal_sim(const CausalSimConfig& config) {
  // assemble the MSM data
  std::optional<MSMDataset> msm;
  if (!config.csv_path.empty()) {
    std::ifstream in(config.csv_path);
    if (!in) throw config_error("causal-sim: cannot open '" + config.csv_path + "'");
    std::string line;
    if (!std::getline(in, line)) throw config_error("causal-sim: empty MSM file");
    const auto header = split_line(line);
    if (header.size() < 3 || header[0] != "t" || header[1] != "y")
      throw config_error("causal-sim: MSM file needs columns t, y, x1..xs");
    const int s = static_cast<int>(header.size()) - 2;
    std::vector<int> t;
    std::vector<double> ys;
    std::vector<std::vector<double>> xs;
    int line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto f = split_line(line);
      if (static_cast<int>(f.size()) != s + 2)
        throw config_error("causal-sim: malformed row at line " + std::to_string(line_no));
      try {
        t.push_back(std::stoi(f[0]) - 1);  // file labels treatments 1..H
        ys.push_back(std::stod(f[1]));
        std::vector<double> row(static_cast<std::size_t>(s));
        for (int j = 0; j < s; ++j) row[static_cast<std::size_t>(j)] = std::stod(f[static_cast<std::size_t>(j + 2)]);
        xs.push_back(std::move(row));
      } catch (...) {
        throw config_error("causal-sim: non-numeric value at line " + std::to_string(line_no));
      }
    }
    const int n = static_cast<int>(ys.size());
    if (n == 0) throw config_error("causal-sim: no data rows");
    const int H = 1 + *std::max_element(t.begin(), t.end());
    Mat X(n, s);
    Vec y(n);
    for (int i = 0; i < n; ++i) {
      y[i] = ys[static_cast<std::size_t>(i)];
      for (int j = 0; j < s; ++j) X(i, j) = xs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    msm.emplace(std::move(X), std::move(t), std::move(y), H);
  } else {
    if (config.sim_H != 1 && config.sim_H != 2)
      throw config_error("causal-sim: the built-in simulation supports H = 1 or 2");
    const int n = config.sim_n, s = config.sim_s, H = config.sim_H;
    Vec theta = config.sim_theta;
    if (theta.size() == 0) {
      theta = Vec(H * s);
      for (int j = 0; j < H * s; ++j) theta[j] = (j % 2 == 0) ? 1.0 : -1.0;
    }
    if (theta.size() != H * s) throw config_error("causal-sim: sim_theta must have H*s entries");
    Rng rng(derive_seed(config.seed, "causal-data"));
    Mat X(n, s);
    Vec y(n);
    std::vector<int> t(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < s; ++j) X(i, j) = rng.normal();
      int h = 0;
      if (H == 2) {
        const double e1 = 1.0 / (1.0 + std::exp(-config.sim_confounding * X(i, 0)));
        h = rng.uniform() < e1 ? 0 : 1;
      }
      t[static_cast<std::size_t>(i)] = h;
      y[i] = X.row(i).dot(theta.segment(h * s, s)) + config.sim_noise_sd * rng.normal();
    }
    msm.emplace(std::move(X), std::move(t), std::move(y), H);
  }

  // propensity
  PropensityModel prop = [&] {
    switch (config.propensity) {
      case CausalSimConfig::PropensityMode::fitted:
        return PropensityModel::fitted(*msm);
      case CausalSimConfig::PropensityMode::known_constant: {
        if (static_cast<int>(config.known_probs.size()) != msm->H())
          throw config_error("causal-sim: known_constant needs one probability per treatment");
        const std::vector<double> probs = config.known_probs;
        return PropensityModel::known([probs](const Vec&, int h) { return probs[static_cast<std::size_t>(h)]; },
                                      msm->H());
      }
      case CausalSimConfig::PropensityMode::known_logistic: {
        if (msm->H() != 2) throw config_error("causal-sim: known_logistic requires H = 2");
        const Vec coef = config.known_coef.size() > 0 ? config.known_coef
                                                      : (Vec(1) << config.sim_confounding).finished();
        return PropensityModel::known(
            [coef](const Vec& x, int h) {
              double eta = 0.0;
              for (int j = 0; j < coef.size() && j < x.size(); ++j) eta += coef[j] * x[j];
              const double e1 = 1.0 / (1.0 + std::exp(-eta));
              return h == 0 ? e1 : 1.0 - e1;
            },
            2);
      }
    }
    throw config_error("causal-sim: unknown propensity mode");
  }();

  const int p = msm->H() * msm->s();
  const int n0 = config.n0 > 0 ? config.n0 : msm->n();
  const std::vector<int> group_map = groups_to_map(config.groups, p);
  const int q = 1 + *std::max_element(group_map.begin(), group_map.end());
  const PriorSpec prior_base(config.prior_family, group_map, n0, Vec::Ones(q));
  const LikelihoodModel model = LikelihoodModel::linear(config.sigma2);

  XiSearchSpace space = config.search;
  space.q = q;
  SamplerConfig sampler = config.sampler;
  sampler.seed = derive_seed(config.seed, "causal-crn");

  CausalSimResult result;
  result.n = msm->n();
  result.H = msm->H();
  result.s = msm->s();

  for (const auto& name : config.criteria) {
    if (name != "piic_ip" && name != "piic2_ip") throw config_error("causal-sim: unknown criterion '" + name + "'");
    const bool with_j = name == "piic2_ip";

    const auto evaluate = [&](const Vec& xi) {
      const IPWProblem prob = ipw_problem(model, prior_base.with_xi(xi), *msm, prop);
      const ParameterPoint theta_hat = ipw_map_estimate(prob);
      std::optional<ActiveSet> active;
      if (prob.prior.family() == PriorFamily::laplace) active = active_set(theta_hat);
      const Posterior post = active.has_value() ? restricted_posterior_wp(prob.view(), *active, sampler)
                                                : fit_posterior_wp(prob.view(), sampler);
      IPWCriteria crit = piic_ip(post, prob, theta_hat);
      double value = crit.piic;
      std::optional<double> j_penalty;
      if (with_j) {
        JConfig jc;
        jc.sampler = sampler;
        jc.fd_scale = 1e-3;
        jc.active = active;
        const JPair jp = j_pair_ip(prob, xi, jc);
        j_penalty = trace_penalty(jp.J1, jp.J2).value;
        value += *j_penalty;
      }
      return std::tuple<double, IPWCriteria, std::optional<double>>(value, std::move(crit), j_penalty);
    };

    const MinimizeResult res =
        minimize_criterion([&](const Vec& xi) { return std::get<0>(evaluate(xi)); }, space);
    auto [value, crit, j_penalty] = evaluate(res.xi_hat);

    CriterionReport report;
    report.selected_by = name;
    report.p = p;
    report.xi = res.xi_hat;
    report.lppd = crit.lppd;
    report.piic = crit.piic;
    report.piic_penalty = crit.penalty_theta;
    report.dic = std::numeric_limits<double>::quiet_NaN();
    report.waic = std::numeric_limits<double>::quiet_NaN();
    if (with_j) {
      report.j_penalty = j_penalty;
      report.piic2 = value;
    }
    report.active = crit.active;
    report.diagnostics["propensity_clips"] = static_cast<double>(prop.clip_count());
    report.diagnostics["search_evaluations"] = static_cast<double>(res.trace.size());
    result.reports.emplace(name, std::move(report));
  }
  result.clip_count = prop.clip_count();
  return result;
}

// --- orchestration ----------------------------------------------------------

std::string config_hash_hex(const std::string& canonical_config) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : canonical_config) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot write '" + path.string() + "'");
  out << content;
}

CsvSchema schema_from_json(const nlohmann::json& j) {
  CsvSchema s;
  if (j.contains("response")) s.response = j["response"].get<std::string>();
  if (j.contains("covariates")) s.covariates = j["covariates"].get<std::vector<std::string>>();
  if (j.contains("standardize")) s.standardize = j["standardize"].get<bool>();
  if (j.contains("center_response")) s.center_response = j["center_response"].get<bool>();
  return s;
}

std::vector<std::vector<int>> groups_from_json(const nlohmann::json& j) {
  std::vector<std::vector<int>> out;
  for (const auto& g : j) out.push_back(g.get<std::vector<int>>());
  return out;
}

std::string criteria_table_csv(const std::map<std::string, CriterionReport>& reports) {
  std::ostringstream os;
  os << "criterion,xi,lppd,dic,waic,piic,penalty_theta,piic2,penalty_xi,active_size\n";
  for (const auto& [name, r] : reports) {
    os << name << ",\"";
    for (int k = 0; k < r.xi.size(); ++k) os << (k ? ";" : "") << r.xi[k];
    os << "\"," << r.lppd << "," << r.dic << "," << r.waic << "," << r.piic << "," << r.piic_penalty << ",";
    if (r.piic2.has_value()) os << *r.piic2;
    os << ",";
    if (r.j_penalty.has_value()) os << *r.j_penalty;
    os << ",";
    if (r.active.has_value()) os << r.active->size();
    os << "\n";
  }
  return os.str();
}

}  // namespace

std::string run_config(const std::string& config_json, const std::filesystem::path& out_dir) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(config_json);
  } catch (const std::exception& e) {
    throw config_error(std::string("run config: invalid JSON: ") + e.what());
  }
  if (!j.contains("subcommand")) throw config_error("run config: missing 'subcommand'");
  const std::string sub = j["subcommand"].get<std::string>();
  const std::uint64_t seed = j.contains("seed") ? j["seed"].get<std::uint64_t>() : 1;

  std::filesystem::create_directories(out_dir);
  const std::string canonical = j.dump(2);

  ordered_json manifest;
  manifest["version"] = kVersion;
  manifest["subcommand"] = sub;
  manifest["seed"] = seed;
  manifest["config_hash"] = config_hash_hex(canonical);
  manifest["config"] = j;
  manifest["outputs"] = {"report.json", "table.csv", "manifest.json"};

  std::string summary;

  if (sub == "analyze") {
    if (!j.contains("analyze")) throw config_error("run config: missing 'analyze' payload");
    const auto& a = j["analyze"];
    AnalyzeConfig cfg;
    cfg.seed = seed;
    if (!a.contains("data") || !a["data"].contains("csv"))
      throw config_error("analyze config: missing data.csv path");
    cfg.csv_path = a["data"]["csv"].get<std::string>();
    cfg.schema = schema_from_json(a["data"]);
    if (a.contains("model")) {
      const std::string kind = a["model"].value("kind", "linear_gaussian");
      if (kind == "linear_gaussian") {
        cfg.model_kind = LikelihoodModel::Kind::linear_gaussian;
        if (a["model"].contains("sigma2") && !a["model"]["sigma2"].is_null())
          cfg.sigma2 = a["model"]["sigma2"].get<double>();
      } else if (kind == "logistic_binomial") {
        cfg.model_kind = LikelihoodModel::Kind::logistic_binomial;
        cfg.trials = a["model"].value("m", 1);
      } else {
        throw config_error("analyze config: unknown model kind '" + kind + "'");
      }
    }
    if (a.contains("prior")) {
      const std::string fam = a["prior"].value("family", "laplace");
      if (fam == "normal")
        cfg.prior_family = PriorFamily::normal;
      else if (fam == "laplace")
        cfg.prior_family = PriorFamily::laplace;
      else
        throw config_error("analyze config: unknown prior family '" + fam + "'");
      if (a["prior"].contains("groups")) cfg.groups = groups_from_json(a["prior"]["groups"]);
      cfg.n0 = a["prior"].value("n0", 0);
    }
    if (a.contains("criteria")) cfg.criteria = a["criteria"].get<std::vector<std::string>>();
    if (a.contains("sampler")) jsonutil::sampler_from_json(a["sampler"], cfg.sampler);
    if (a.contains("search")) jsonutil::search_from_json(a["search"], cfg.search);
    cfg.cross_check = a.value("cross_check", false);
    cfg.force_sampling = a.value("force_sampling", false);

    const AnalyzeResult res = run_analyze(cfg);
    ordered_json report;
    report["kind"] = "analyze";
    report["n"] = res.n;
    report["p"] = res.p;
    report["sigma2"] = res.sigma2_used;
    ordered_json crit;
    for (const auto& [name, r] : res.reports) crit[name] = ordered_json::parse(r.to_json_string());
    report["criteria"] = crit;
    write_file(out_dir / "report.json", report.dump(2) + "\n");
    write_file(out_dir / "table.csv", criteria_table_csv(res.reports));
    summary = "analyze: n=" + std::to_string(res.n) + " p=" + std::to_string(res.p) + ", " +
              std::to_string(res.reports.size()) + " criteria";
  } else if (sub == "simulate") {
    if (!j.contains("simulate")) throw config_error("run config: missing 'simulate' payload");
    ScenarioConfig cfg = ScenarioConfig::from_json_string(j["simulate"].dump());
    if (!j["simulate"].contains("seed")) cfg.master_seed = seed;
    const ComparisonRow row = run_comparison(cfg);
    write_file(out_dir / "report.json", row.to_json_string() + "\n");
    write_file(out_dir / "table.csv", row.csv_header() + "\n" + row.csv_row() + "\n");
    std::ostringstream os;
    os << "simulate: R=" << cfg.replications << " failures=" << row.failures;
    summary = os.str();
  } else if (sub == "diabetes") {
    DiabetesConfig cfg;
    cfg.seed = seed;
    if (j.contains("diabetes")) {
      const auto& d = j["diabetes"];
      if (d.contains("csv")) cfg.csv_path = d["csv"].get<std::string>();
      if (d.contains("splits")) cfg.splits = d["splits"].get<int>();
      if (d.contains("split_size")) cfg.split_size = d["split_size"].get<int>();
      if (d.contains("sampler")) jsonutil::sampler_from_json(d["sampler"], cfg.sampler);
      if (d.contains("search")) jsonutil::search_from_json(d["search"], cfg.search);
    }
    const DiabetesResult res = run_diabetes(cfg);

    std::ostringstream table;
    table << "criterion";
    for (const auto& name : res.covariate_names) table << "," << name;
    table << "\n";
    table.precision(2);
    table << std::fixed;
    for (const auto& split : res.splits) {
      table << "WAIC2";
      for (int jx = 0; jx < split.coef_waic2.size(); ++jx) table << "," << split.coef_waic2[jx];
      table << "\nPIIC2";
      for (int jx = 0; jx < split.coef_piic2.size(); ++jx) table << "," << split.coef_piic2[jx];
      table << "\n";
    }
    write_file(out_dir / "table.csv", table.str());

    ordered_json report;
    report["kind"] = "diabetes";
    report["covariates"] = res.covariate_names;
    auto splits = ordered_json::array();
    int differing = 0;
    for (const auto& s : res.splits) {
      ordered_json sj;
      sj["split"] = s.split;
      sj["rows"] = s.row_indices;
      sj["sigma2"] = s.sigma2;
      sj["xi_waic2"] = std::vector<double>(s.xi_waic2.data(), s.xi_waic2.data() + s.xi_waic2.size());
      sj["xi_piic2"] = std::vector<double>(s.xi_piic2.data(), s.xi_piic2.data() + s.xi_piic2.size());
      sj["coef_waic2"] = std::vector<double>(s.coef_waic2.data(), s.coef_waic2.data() + s.coef_waic2.size());
      sj["coef_piic2"] = std::vector<double>(s.coef_piic2.data(), s.coef_piic2.data() + s.coef_piic2.size());
      sj["active_waic2"] = s.active_waic2;
      sj["active_piic2"] = s.active_piic2;
      if (s.active_waic2 != s.active_piic2) ++differing;
      splits.push_back(std::move(sj));
    }
    report["splits"] = std::move(splits);
    report["splits_with_differing_selection"] = differing;
    write_file(out_dir / "report.json", report.dump(2) + "\n");
    summary = "diabetes: " + std::to_string(res.splits.size()) + " splits, " + std::to_string(differing) +
              " with differing selections";
  } else if (sub == "causal_sim") {
    CausalSimConfig cfg;
    cfg.seed = seed;
    if (j.contains("causal_sim")) {
      const auto& c = j["causal_sim"];
      if (c.contains("csv")) cfg.csv_path = c["csv"].get<std::string>();
      if (c.contains("sim")) {
        const auto& s = c["sim"];
        if (s.contains("n")) cfg.sim_n = s["n"].get<int>();
        if (s.contains("s")) cfg.sim_s = s["s"].get<int>();
        if (s.contains("H")) cfg.sim_H = s["H"].get<int>();
        if (s.contains("confounding")) cfg.sim_confounding = s["confounding"].get<double>();
        if (s.contains("noise_sd")) cfg.sim_noise_sd = s["noise_sd"].get<double>();
        if (s.contains("theta")) {
          const auto th = s["theta"].get<std::vector<double>>();
          cfg.sim_theta = Eigen::Map<const Vec>(th.data(), static_cast<int>(th.size()));
        }
      }
      if (c.contains("sigma2")) cfg.sigma2 = c["sigma2"].get<double>();
      if (c.contains("prior")) {
        const std::string fam = c["prior"].value("family", "normal");
        cfg.prior_family = fam == "laplace" ? PriorFamily::laplace : PriorFamily::normal;
        if (c["prior"].contains("groups")) cfg.groups = groups_from_json(c["prior"]["groups"]);
        cfg.n0 = c["prior"].value("n0", 0);
      }
      if (c.contains("propensity")) {
        const std::string mode = c["propensity"].value("mode", "fitted");
        if (mode == "fitted") {
          cfg.propensity = CausalSimConfig::PropensityMode::fitted;
        } else if (mode == "known_constant") {
          cfg.propensity = CausalSimConfig::PropensityMode::known_constant;
          cfg.known_probs = c["propensity"]["probs"].get<std::vector<double>>();
        } else if (mode == "known_logistic") {
          cfg.propensity = CausalSimConfig::PropensityMode::known_logistic;
          if (c["propensity"].contains("coef")) {
            const auto co = c["propensity"]["coef"].get<std::vector<double>>();
            cfg.known_coef = Eigen::Map<const Vec>(co.data(), static_cast<int>(co.size()));
          }
        } else {
          throw config_error("causal-sim config: unknown propensity mode '" + mode + "'");
        }
      }
      if (c.contains("criteria")) cfg.criteria = c["criteria"].get<std::vector<std::string>>();
      if (c.contains("sampler")) jsonutil::sampler_from_json(c["sampler"], cfg.sampler);
      if (c.contains("search")) jsonutil::search_from_json(c["search"], cfg.search);
    }
    const CausalSimResult res = run_causal_sim(cfg);
    ordered_json report;
    report["kind"] = "causal_sim";
    report["n"] = res.n;
    report["H"] = res.H;
    report["s"] = res.s;
    report["propensity_clips"] = res.clip_count;
    ordered_json crit;
    for (const auto& [name, r] : res.reports) crit[name] = ordered_json::parse(r.to_json_string());
    report["criteria"] = crit;
    write_file(out_dir / "report.json", report.dump(2) + "\n");
    write_file(out_dir / "table.csv", criteria_table_csv(res.reports));
    summary = "causal-sim: n=" + std::to_string(res.n) + " H=" + std::to_string(res.H);
  } else {
    throw config_error("run config: unknown subcommand '" + sub + "'");
  }

  write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return summary;
}

}  // namespace piic
