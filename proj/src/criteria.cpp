#include "piic/criteria.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <json.hpp>

namespace piic {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

WeightedProblem with_prior(const WeightedProblem& wp, PriorSpec prior) {
  return WeightedProblem{wp.data, wp.model, std::move(prior), wp.row_weight, wp.prior_share, wp.prior_total};
}

double log_mean_exp(const Vec& values) {
  const double m = values.maxCoeff();
  if (!std::isfinite(m)) throw numeric_error("predictive density underflow: all terms are -inf");
  double acc = 0.0;
  for (int s = 0; s < values.size(); ++s) acc += std::exp(values[s] - m);
  return m + std::log(acc / static_cast<double>(values.size()));
}

}  // namespace

TracePenalty trace_penalty(const Mat& I1, const Mat& I2) {
  TracePenalty out;
  const int k = static_cast<int>(I1.rows());
  if (k == 0) return out;
  if (I1.cols() != k || I2.rows() != k || I2.cols() != k) throw config_error("trace_penalty: shape mismatch");

  const Mat sym = 0.5 * (I1 + I1.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(sym);
  if (eig.info() != Eigen::Success) throw numeric_error("trace_penalty: eigendecomposition failed");
  const Vec& lam = eig.eigenvalues();
  const Mat& V = eig.eigenvectors();

  const double lam_max = lam.cwiseAbs().maxCoeff();
  const double lam_min = lam.minCoeff();
  out.condition_number = lam_min > 0.0 ? lam_max / lam_min : std::numeric_limits<double>::infinity();
  out.pseudo_inverse = !(lam_min > 0.0 && out.condition_number <= 1e10);

  const double cut = lam_max * 1e-12;
  double value = 0.0;
  for (int c = 0; c < k; ++c) {
    if (out.pseudo_inverse && lam[c] <= cut) continue;  // drop the unstable directions
    const Vec v = V.col(c);
    value += v.dot(I2 * v) / lam[c];
  }
  out.value = value;
  return out;
}

// --- PredictiveEvaluator ----------------------------------------------------

PredictiveEvaluator::PredictiveEvaluator(const Posterior& posterior, const LikelihoodModel& model)
    : posterior_(&posterior), model_(model) {
  if (posterior.active().has_value()) {
    idx_ = posterior.active()->indices();
  } else {
    idx_.resize(static_cast<std::size_t>(posterior.p()));
    for (int j = 0; j < posterior.p(); ++j) idx_[static_cast<std::size_t>(j)] = j;
  }
  const int k = static_cast<int>(idx_.size());
  if (posterior.is_analytic()) {
    if (model_.kind != LikelihoodModel::Kind::linear_gaussian)
      throw config_error("PredictiveEvaluator: analytic posterior requires the linear-Gaussian likelihood");
    mean_ = Vec(k);
    cov_ = Mat(k, k);
    for (int a = 0; a < k; ++a) {
      mean_[a] = posterior.mean()[idx_[static_cast<std::size_t>(a)]];
      for (int c = 0; c < k; ++c)
        cov_(a, c) = posterior.cov()(idx_[static_cast<std::size_t>(a)], idx_[static_cast<std::size_t>(c)]);
    }
  } else {
    samples_ = Mat(posterior.sample_count(), k);
    for (int a = 0; a < k; ++a) samples_.col(a) = posterior.samples().col(idx_[static_cast<std::size_t>(a)]);
  }
}

Vec PredictiveEvaluator::gather(const Vec& x_full) const {
  Vec x(static_cast<int>(idx_.size()));
  for (std::size_t a = 0; a < idx_.size(); ++a) x[static_cast<int>(a)] = x_full[idx_[a]];
  return x;
}

double PredictiveEvaluator::logdens(const Vec& x_full, double y, double weight) const {
  const Vec x = gather(x_full);
  if (posterior_->is_analytic()) {
    const double mu = x.dot(mean_);
    const double s2 = x.dot(cov_ * x);
    const double v = model_.sigma2 / weight + s2;
    // log E[f^w] for Gaussian f: the two constants cancel exactly at w = 1
    const double c = -0.5 * weight * (kLog2Pi + std::log(model_.sigma2)) +
                     0.5 * (kLog2Pi + std::log(model_.sigma2 / weight));
    const double r = y - mu;
    return c - 0.5 * (kLog2Pi + std::log(v)) - r * r / (2.0 * v);
  }
  const Vec eta = samples_ * x;
  Vec scaled(eta.size());
  for (int s = 0; s < eta.size(); ++s) scaled[s] = weight * log_likelihood_eta(model_, y, eta[s]);
  return log_mean_exp(scaled);
}

Vec PredictiveEvaluator::per_sample_loglik(const Vec& x_full, double y) const {
  if (posterior_->is_analytic()) throw config_error("per_sample_loglik: sample-form posterior required");
  const Vec eta = samples_ * gather(x_full);
  Vec out(eta.size());
  for (int s = 0; s < eta.size(); ++s) out[s] = log_likelihood_eta(model_, y, eta[s]);
  return out;
}

double predictive_logdens(const Posterior& posterior, const LikelihoodModel& model, const Dataset& data, int row) {
  PredictiveEvaluator eval(posterior, model);
  return eval.logdens(data.X().row(row).transpose(), data.y()[row]);
}

double lppd(const Posterior& posterior, const LikelihoodModel& model, const Dataset& data) {
  PredictiveEvaluator eval(posterior, model);
  double total = 0.0;
  for (int i = 0; i < data.n(); ++i) total += eval.logdens(data.X().row(i).transpose(), data.y()[i]);
  return total;
}

// --- WAIC / DIC -------------------------------------------------------------

namespace {

// posterior moments of the linear predictor x'theta under the analytic form,
// respecting a restriction to the active coordinates
void eta_moments(const Posterior& posterior, const Vec& x, double& mu, double& s2) {
  mu = 0.0;
  s2 = 0.0;
  const auto& act = posterior.active();
  if (act.has_value()) {
    for (int a : act->indices()) mu += x[a] * posterior.mean()[a];
    for (int a : act->indices())
      for (int c : act->indices()) s2 += x[a] * posterior.cov()(a, c) * x[c];
  } else {
    mu = x.dot(posterior.mean());
    s2 = x.dot(posterior.cov() * x);
  }
}

}  // namespace

double waic(const Posterior& posterior, const LikelihoodModel& model, const Dataset& data) {
  PredictiveEvaluator eval(posterior, model);
  double total = 0.0;
  if (posterior.is_analytic()) {
    // log f is quadratic in the Gaussian linear predictor, so all three WAIC
    // terms have closed forms under eta ~ N(mu, s2)
    const double s2m = model.sigma2;
    for (int i = 0; i < data.n(); ++i) {
      const Vec x = data.X().row(i).transpose();
      const double lp = eval.logdens(x, data.y()[i]);
      double mu, s2;
      eta_moments(posterior, x, mu, s2);
      const double r = data.y()[i] - mu;
      const double var_logf = (r * r * s2) / (s2m * s2m) + (s2 * s2) / (2.0 * s2m * s2m);
      total += -lp + var_logf;
    }
    return total;
  }
  for (int i = 0; i < data.n(); ++i) {
    const Vec l = eval.per_sample_loglik(data.X().row(i).transpose(), data.y()[i]);
    const double lp = log_mean_exp(l);
    const double m1 = l.mean();
    const double m2 = l.cwiseAbs2().mean();
    total += -lp + (m2 - m1 * m1);
  }
  return total;
}

double dic(const Posterior& posterior, const LikelihoodModel& model, const Dataset& data) {
  PredictiveEvaluator eval(posterior, model);
  const Vec theta_bar = posterior.theta_mean();
  double plug = 0.0, expected = 0.0;
  if (posterior.is_analytic()) {
    const double s2m = model.sigma2;
    for (int i = 0; i < data.n(); ++i) {
      const Vec x = data.X().row(i).transpose();
      double mu, s2;
      eta_moments(posterior, x, mu, s2);
      const double r = data.y()[i] - mu;
      plug += log_likelihood_eta(model, data.y()[i], mu);
      expected += -0.5 * (kLog2Pi + std::log(s2m)) - (r * r + s2) / (2.0 * s2m);
    }
    return plug - 2.0 * expected;
  }
  for (int i = 0; i < data.n(); ++i) {
    const Vec x = data.X().row(i).transpose();
    const Vec l = eval.per_sample_loglik(x, data.y()[i]);
    plug += log_likelihood_eta(model, data.y()[i], x.dot(theta_bar));
    expected += l.mean();
  }
  return plug - 2.0 * expected;
}

// --- Fisher pair ------------------------------------------------------------

namespace {

FisherPair fisher_pair_dense(const WeightedProblem& wp, const ParameterPoint& theta_hat) {
  const int p = wp.p();
  const int n = wp.n();
  const double share = wp.prior_share;
  Mat I1 = Mat::Zero(p, p);
  Mat I2 = Mat::Zero(p, p);
  const Vec pg = prior_grad(wp.prior, theta_hat);
  const Mat ph = prior_hess(wp.prior, theta_hat);
  // I1 carries the weight once; I2 is the t/e^2-weighted outer product of the
  // per-treatment score (the inverse-probability estimate of the population
  // information, which is weighted by 1/e once)
  for (int i = 0; i < n; ++i) {
    const double w = wp.row_weight[i];
    I1 -= w * likelihood_hessian_row(wp.model, *wp.data, i, theta_hat);
    const Vec s = likelihood_score_row(wp.model, *wp.data, i, theta_hat) + share * pg;
    I2.noalias() += (w * w) * (s * s.transpose());
  }
  I1 -= wp.prior_total * ph;
  I1 /= static_cast<double>(n);
  I2 /= static_cast<double>(n);
  return FisherPair{std::move(I1), std::move(I2), theta_hat, std::nullopt};
}

}  // namespace

FisherPair fisher_pair_wp(const WeightedProblem& wp, const ParameterPoint& theta_hat,
                          const std::optional<ActiveSet>& active) {
  if (wp.prior.family() == PriorFamily::laplace && !active.has_value())
    throw config_error("fisher_pair: the Laplace prior requires an active set (penalty is formed on it)");

  if (active.has_value()) {
    if (active->full_dim() != wp.p()) throw config_error("fisher_pair: active set dimension mismatch");
    if (active->empty()) return FisherPair{Mat::Zero(0, 0), Mat::Zero(0, 0), theta_hat, active};
    const ReducedProblem red = reduce_problem(wp, *active);
    const ParameterPoint theta_r(restrict_to(*active, theta_hat.theta));
    FisherPair inner = fisher_pair_dense(red.view(), theta_r);
    return FisherPair{std::move(inner.I1), std::move(inner.I2), theta_hat, active};
  }
  return fisher_pair_dense(wp, theta_hat);
}

FisherPair fisher_pair(const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data,
                       const ParameterPoint& theta_hat, const std::optional<ActiveSet>& active) {
  return fisher_pair_wp(plain_problem(model, prior, data), theta_hat, active);
}

FisherPair fisher_pair_restrict(const FisherPair& dense, const ActiveSet& active) {
  if (dense.active.has_value()) throw config_error("fisher_pair_restrict: pair is already restricted");
  const int k = active.size();
  Mat I1(k, k), I2(k, k);
  for (int a = 0; a < k; ++a)
    for (int c = 0; c < k; ++c) {
      I1(a, c) = dense.I1(active.indices()[a], active.indices()[c]);
      I2(a, c) = dense.I2(active.indices()[a], active.indices()[c]);
    }
  return FisherPair{std::move(I1), std::move(I2), dense.at, active};
}

double piic(const Posterior& posterior, const LikelihoodModel& model, const Dataset& data, const FisherPair& fisher) {
  if (fisher.active.has_value()) {
    if (!posterior.active().has_value())
      throw config_error("piic: restricted fisher pair requires the matching restricted posterior");
    if (posterior.active()->indices() != fisher.active->indices())
      throw config_error("piic: posterior and fisher pair disagree on the active set");
  }
  return -lppd(posterior, model, data) + trace_penalty(fisher.I1, fisher.I2).value;
}

// --- xi score ---------------------------------------------------------------

namespace {

// d log pi_n(theta; xi) / dxi per posterior sample, S x q
Mat sample_u_matrix(const Posterior& posterior, const PriorSpec& prior, double prior_total) {
  const Mat& S = posterior.samples();
  Mat U(S.rows(), prior.q());
  for (int s = 0; s < S.rows(); ++s)
    U.row(s) = (prior_total * prior_xi_grad(prior, S.row(s).transpose())).transpose();
  return U;
}

Mat xi_scores_analytic(const Posterior& posterior, const WeightedProblem& wp) {
  // Conjugate path: E[f (u - Eu)] / E[f] = E_{tilted}[u] - E[u], where the
  // tilted law is the posterior updated with the extra row (w = 1 exponent).
  const PriorSpec& prior = wp.prior;
  const Dataset& data = *wp.data;
  const double s2m = wp.model.sigma2;
  const int q = prior.q();
  std::vector<int> idx;
  if (posterior.active().has_value())
    idx = posterior.active()->indices();
  else
    for (int j = 0; j < posterior.p(); ++j) idx.push_back(j);
  const int k = static_cast<int>(idx.size());

  Vec m(k);
  Mat C(k, k);
  for (int a = 0; a < k; ++a) {
    m[a] = posterior.mean()[idx[static_cast<std::size_t>(a)]];
    for (int c = 0; c < k; ++c)
      C(a, c) = posterior.cov()(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(c)]);
  }

  const auto u_moment = [&](const Vec& mean, const Mat& cov) {
    Vec u = Vec::Zero(q);
    for (int a = 0; a < k; ++a) {
      const int j = idx[static_cast<std::size_t>(a)];
      const double zeta = prior.xi_of(j);
      u[prior.group(j)] +=
          wp.prior_total * ((mean[a] * mean[a] + cov(a, a)) - zeta) / (2.0 * zeta * zeta);
    }
    return u;
  };

  Mat scores(data.n(), q);
  const Vec u0 = u_moment(m, C);
  for (int i = 0; i < data.n(); ++i) {
    Vec x(k);
    for (int a = 0; a < k; ++a) x[a] = data.X()(i, idx[static_cast<std::size_t>(a)]);
    const Vec Cx = C * x;
    const double denom = s2m + x.dot(Cx);
    const Vec m_t = m + Cx * ((data.y()[i] - x.dot(m)) / denom);
    const Mat C_t = C - (Cx * Cx.transpose()) / denom;
    scores.row(i) = (u_moment(m_t, C_t) - u0).transpose();
  }
  return scores;
}

}  // namespace

Mat xi_scores_identity(const Posterior& posterior, const LikelihoodModel& model, const Dataset& data,
                       const Mat& u_samples) {
  if (posterior.is_analytic()) throw config_error("xi_scores_identity: sample-form posterior required");
  if (u_samples.rows() != posterior.sample_count()) throw config_error("xi_scores_identity: u row count mismatch");
  PredictiveEvaluator eval(posterior, model);
  const int q = static_cast<int>(u_samples.cols());
  const Vec u_bar = u_samples.colwise().mean().transpose();
  Mat scores(data.n(), q);
  for (int i = 0; i < data.n(); ++i) {
    const Vec l = eval.per_sample_loglik(data.X().row(i).transpose(), data.y()[i]);
    const double m = l.maxCoeff();
    if (!std::isfinite(m)) throw numeric_error("xi_scores: predictive density underflow");
    double wsum = 0.0;
    Vec acc = Vec::Zero(q);
    for (int s = 0; s < l.size(); ++s) {
      const double w = std::exp(l[s] - m);
      wsum += w;
      acc += w * u_samples.row(s).transpose();
    }
    scores.row(i) = (acc / wsum - u_bar).transpose();
  }
  return scores;
}

Mat xi_scores(const Posterior& posterior, const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data) {
  const WeightedProblem wp = plain_problem(model, prior, data);
  if (posterior.is_analytic()) {
    if (prior.family() != PriorFamily::normal)
      throw config_error("xi_scores: analytic path requires the normal prior");
    return xi_scores_analytic(posterior, wp);
  }
  return xi_scores_identity(posterior, model, data, sample_u_matrix(posterior, prior, wp.prior_total));
}

Vec xi_score(const Posterior& posterior, const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data,
             int row) {
  // single-row convenience over the all-rows path
  return xi_scores(posterior, model, prior, data).row(row).transpose();
}

// --- J pair -------------------------------------------------------------

namespace {

Posterior posterior_at_xi(const WeightedProblem& wp, const Vec& xi, const JConfig& config) {
  const WeightedProblem wp_xi = with_prior(wp, wp.prior.with_xi(xi));
  if (config.active.has_value()) return restricted_posterior_wp(wp_xi, *config.active, config.sampler);
  return fit_posterior_wp(wp_xi, config.sampler, config.force_sampling);
}

Mat xi_scores_at(const WeightedProblem& wp, const Vec& xi, const JConfig& config) {
  const Posterior post = posterior_at_xi(wp, xi, config);
  const PriorSpec prior_xi = wp.prior.with_xi(xi);
  const WeightedProblem wp_xi = with_prior(wp, prior_xi);
  if (post.is_analytic()) return xi_scores_analytic(post, wp_xi);
  return xi_scores_identity(post, wp.model, *wp.data, sample_u_matrix(post, prior_xi, wp.prior_total));
}

}  // namespace

Mat xi_scores_fd(const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data, const Vec& xi_hat,
                 const JConfig& config) {
  const WeightedProblem wp = plain_problem(model, prior, data);
  const int q = static_cast<int>(xi_hat.size());
  Mat scores(data.n(), q);
  for (int k = 0; k < q; ++k) {
    const double h = std::min(config.fd_scale * (1.0 + std::abs(xi_hat[k])), 0.5 * xi_hat[k]);
    Vec xp = xi_hat, xm = xi_hat;
    xp[k] += h;
    xm[k] -= h;
    const Posterior post_p = posterior_at_xi(wp, xp, config);
    const Posterior post_m = posterior_at_xi(wp, xm, config);
    PredictiveEvaluator ep(post_p, model), em(post_m, model);
    for (int i = 0; i < data.n(); ++i) {
      const Vec x = data.X().row(i).transpose();
      scores(i, k) = (ep.logdens(x, data.y()[i]) - em.logdens(x, data.y()[i])) / (2.0 * h);
    }
  }
  return scores;
}

JPair j_pair_wp(const WeightedProblem& wp, const Vec& xi_hat, const JConfig& config) {
  const int q = static_cast<int>(xi_hat.size());
  const int n = wp.n();

  const Mat psi0 = xi_scores_at(wp, xi_hat, config);
  Mat J2 = Mat::Zero(q, q);
  for (int i = 0; i < n; ++i) {
    const double w = wp.row_weight[i];
    const Vec psi = psi0.row(i).transpose();
    J2.noalias() += (w * w) * (psi * psi.transpose());
  }
  J2 /= static_cast<double>(n);

  Mat J1 = Mat::Zero(q, q);
  for (int k = 0; k < q; ++k) {
    // capped so the perturbed hyper-parameter stays positive
    const double h = std::min(config.fd_scale * (1.0 + std::abs(xi_hat[k])), 0.5 * xi_hat[k]);
    Vec xp = xi_hat, xm = xi_hat;
    xp[k] += h;
    xm[k] -= h;
    const Mat psi_p = xi_scores_at(wp, xp, config);
    const Mat psi_m = xi_scores_at(wp, xm, config);
    for (int l = 0; l < q; ++l) {
      double sp = 0.0, sm = 0.0;
      for (int i = 0; i < n; ++i) {
        sp += wp.row_weight[i] * psi_p(i, l);
        sm += wp.row_weight[i] * psi_m(i, l);
      }
      J1(k, l) = -(sp - sm) / (2.0 * h * static_cast<double>(n));
    }
  }
  J1 = 0.5 * (J1 + J1.transpose()).eval();

  JPair out{std::move(J1), std::move(J2), xi_hat, config.fd_scale, false};
  out.j1_pseudo_inverse = trace_penalty(out.J1, out.J2).pseudo_inverse;
  return out;
}

JPair j_pair(const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data, const Vec& xi_hat,
             const JConfig& config) {
  return j_pair_wp(plain_problem(model, prior, data), xi_hat, config);
}

double piic2(double piic_at_xi_hat, const JPair& jpair) {
  return piic_at_xi_hat + trace_penalty(jpair.J1, jpair.J2).value;
}

// --- report ---------------------------------------------------------------

std::string CriterionReport::to_json_string() const {
  nlohmann::ordered_json j;
  j["selected_by"] = selected_by;
  j["p"] = p;
  j["xi"] = std::vector<double>(xi.data(), xi.data() + xi.size());
  j["lppd"] = lppd;
  j["dic"] = dic;
  j["waic"] = waic;
  j["piic"] = piic;
  j["penalty_theta"] = piic_penalty;
  if (piic2.has_value())
    j["piic2"] = *piic2;
  else
    j["piic2"] = nullptr;
  if (j_penalty.has_value())
    j["penalty_xi"] = *j_penalty;
  else
    j["penalty_xi"] = nullptr;
  if (active.has_value()) {
    std::vector<int> one_based;
    for (int a : active->indices()) one_based.push_back(a + 1);
    j["active_set"] = one_based;
  } else {
    j["active_set"] = nullptr;
  }
  j["diagnostics"] = diagnostics;
  return j.dump(2);
}

CriterionReport CriterionReport::from_json_string(const std::string& text) {
  const auto j = nlohmann::ordered_json::parse(text);
  CriterionReport r;
  r.selected_by = j.at("selected_by").get<std::string>();
  r.p = j.at("p").get<int>();
  const auto xs = j.at("xi").get<std::vector<double>>();
  r.xi = Eigen::Map<const Vec>(xs.data(), static_cast<int>(xs.size()));
  const auto num = [&](const char* key) {
    return j.at(key).is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at(key).get<double>();
  };
  r.lppd = num("lppd");
  r.dic = num("dic");
  r.waic = num("waic");
  r.piic = num("piic");
  r.piic_penalty = num("penalty_theta");
  if (!j.at("piic2").is_null()) r.piic2 = j.at("piic2").get<double>();
  if (!j.at("penalty_xi").is_null()) r.j_penalty = j.at("penalty_xi").get<double>();
  if (!j.at("active_set").is_null()) {
    std::vector<int> zero_based;
    for (int a : j.at("active_set").get<std::vector<int>>()) zero_based.push_back(a - 1);
    r.active = ActiveSet(zero_based, 0.0, r.p);
  }
  r.diagnostics = j.at("diagnostics").get<std::map<std::string, double>>();
  return r;
}

}  // namespace piic
