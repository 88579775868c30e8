#include "piic/causal.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace piic {

MSMDataset::MSMDataset(Mat confounders, std::vector<int> treatment, Vec y, int n_treatments)
    : confounders_(std::move(confounders)), treatment_(std::move(treatment)), y_(std::move(y)), H_(n_treatments) {
  if (H_ < 1) throw config_error("MSMDataset: need at least one treatment");
  const int n = static_cast<int>(y_.size());
  if (n == 0) throw config_error("MSMDataset: empty");
  if (confounders_.rows() != n || static_cast<int>(treatment_.size()) != n)
    throw config_error("MSMDataset: row count mismatch");
  if (!confounders_.allFinite() || !y_.allFinite()) throw config_error("MSMDataset: non-finite entries");
  for (int t : treatment_)
    if (t < 0 || t >= H_) throw config_error("MSMDataset: treatment label out of range");
}

// --- propensity -----------------------------------------------------------

PropensityModel PropensityModel::known(KnownFn fn, int H) {
  PropensityModel m;
  m.known_ = std::move(fn);
  m.H_ = H;
  return m;
}

PropensityModel PropensityModel::fitted(const MSMDataset& data, double ridge) {
  PropensityModel m;
  m.H_ = data.H();
  const int d = data.s() + 1;  // intercept + confounders
  const int K = data.H() - 1;  // last treatment is the reference class
  m.coef_ = Mat::Zero(d, data.H());
  if (K == 0) return m;

  Mat Z(data.n(), d);
  Z.col(0).setOnes();
  Z.rightCols(data.s()) = data.confounders();

  // multinomial logistic maximum likelihood by Newton iterations
  Vec beta = Vec::Zero(d * K);
  for (int iter = 0; iter < 200; ++iter) {
    Vec grad = Vec::Zero(d * K);
    Mat hess = Mat::Zero(d * K, d * K);
    for (int i = 0; i < data.n(); ++i) {
      const Vec z = Z.row(i).transpose();
      Vec logits(K);
      for (int k = 0; k < K; ++k) logits[k] = z.dot(beta.segment(k * d, d));
      const double mx = std::max(0.0, logits.maxCoeff());
      double denom = std::exp(-mx);
      for (int k = 0; k < K; ++k) denom += std::exp(logits[k] - mx);
      Vec prob(K);
      for (int k = 0; k < K; ++k) prob[k] = std::exp(logits[k] - mx) / denom;
      const int t = data.treatment()[static_cast<std::size_t>(i)];
      for (int k = 0; k < K; ++k) {
        const double resid = (t == k ? 1.0 : 0.0) - prob[k];
        grad.segment(k * d, d) += resid * z;
        for (int l = 0; l < K; ++l) {
          const double wkl = prob[k] * ((k == l ? 1.0 : 0.0) - prob[l]);
          hess.block(k * d, l * d, d, d) += wkl * (z * z.transpose());
        }
      }
    }
    grad -= ridge * beta;
    hess += ridge * Mat::Identity(d * K, d * K);
    const Vec step = hess.ldlt().solve(grad);
    beta += step;
    if (step.cwiseAbs().maxCoeff() < 1e-10) break;
  }
  for (int k = 0; k < K; ++k) m.coef_.col(k) = beta.segment(k * d, d);
  return m;
}

double PropensityModel::eval_x(const Vec& x, int h) const {
  if (h < 0 || h >= H_) throw config_error("propensity: treatment index out of range");
  double e;
  if (known_) {
    e = known_(x, h);
    if (!(e > 0.0 && e <= 1.0)) throw numeric_error("propensity: known value outside (0,1]");
  } else if (H_ == 1) {
    e = 1.0;
  } else {
    const int d = static_cast<int>(coef_.rows());
    Vec z(d);
    z[0] = 1.0;
    z.tail(d - 1) = x;
    const int K = H_ - 1;
    Vec logits(K);
    for (int k = 0; k < K; ++k) logits[k] = z.dot(coef_.col(k));
    const double mx = std::max(0.0, logits.maxCoeff());
    double denom = std::exp(-mx);
    for (int k = 0; k < K; ++k) denom += std::exp(logits[k] - mx);
    e = (h < K) ? std::exp(logits[h] - mx) / denom : std::exp(-mx) / denom;
  }
  if (e < kFloor) {
    ++clip_count_;
    e = kFloor;
  }
  return e;
}

double PropensityModel::eval(const MSMDataset& data, int row, int h) const {
  return eval_x(data.confounders().row(row).transpose(), h);
}

// --- IPW problem ------------------------------------------------------------

WeightedProblem IPWProblem::view() const {
  return WeightedProblem{&data, model, prior, row_weight, prior_share, prior_total};
}

IPWProblem ipw_problem(const LikelihoodModel& model, const PriorSpec& prior, const MSMDataset& msm,
                       const PropensityModel& propensity) {
  const int n = msm.n();
  const int s = msm.s();
  const int H = msm.H();
  const int p = H * s;
  if (prior.p() != p) throw config_error("ipw_problem: prior covers " + std::to_string(prior.p()) +
                                         " coefficients, need H*s = " + std::to_string(p));

  std::vector<int> counts(static_cast<std::size_t>(H), 0);
  for (int t : msm.treatment()) counts[static_cast<std::size_t>(t)]++;
  for (int h = 0; h < H; ++h)
    if (counts[static_cast<std::size_t>(h)] == 0)
      throw numeric_error("treatment " + std::to_string(h + 1) + " unobserved (identifiability)");

  Mat X = Mat::Zero(n, p);
  Vec w(n);
  for (int i = 0; i < n; ++i) {
    const int h = msm.treatment()[static_cast<std::size_t>(i)];
    X.block(i, h * s, 1, s) = msm.confounders().row(i);
    w[i] = 1.0 / propensity.eval(msm, i, h);
  }
  Dataset data = model.kind == LikelihoodModel::Kind::linear_gaussian
                     ? Dataset::gaussian(std::move(X), msm.y())
                     : Dataset::binomial(std::move(X), msm.y(), model.trials);
  const double share = 1.0 / (static_cast<double>(prior.n0()) * H);
  const double total = static_cast<double>(n) * H * share;
  return IPWProblem{std::move(data), model, prior, std::move(w), share, total};
}

ParameterPoint ipw_map_estimate(const IPWProblem& prob) { return map_estimate_wp(prob.view()); }

double ipw_predictive_logdens(const Posterior& posterior, const IPWProblem& prob, int row) {
  PredictiveEvaluator eval(posterior, prob.model);
  return eval.logdens(prob.data.X().row(row).transpose(), prob.data.y()[row], prob.row_weight[row]);
}

IPWCriteria piic_ip(const Posterior& posterior, const IPWProblem& prob, const ParameterPoint& theta_hat) {
  IPWCriteria out;
  if (prob.prior.family() == PriorFamily::laplace) {
    out.active = active_set(theta_hat);
    if (!posterior.active().has_value() || posterior.active()->indices() != out.active->indices())
      throw config_error("piic_ip: posterior must be restricted to the active set of theta_hat");
  } else if (posterior.active().has_value()) {
    throw config_error("piic_ip: unexpected restricted posterior under the normal prior");
  }

  const FisherPair fp = fisher_pair_wp(prob.view(), theta_hat, out.active);
  out.penalty_theta = trace_penalty(fp.I1, fp.I2).value;

  PredictiveEvaluator eval(posterior, prob.model);
  double total = 0.0;
  for (int i = 0; i < prob.data.n(); ++i)
    total += eval.logdens(prob.data.X().row(i).transpose(), prob.data.y()[i], prob.row_weight[i]);
  out.lppd = total;
  out.piic = -total + out.penalty_theta;
  return out;
}

JPair j_pair_ip(const IPWProblem& prob, const Vec& xi_hat, const JConfig& config) {
  return j_pair_wp(prob.view(), xi_hat, config);
}

double piic2_ip(double piic_ip_at_xi_hat, const JPair& jpair_ipw) { return piic2(piic_ip_at_xi_hat, jpair_ipw); }

}  // namespace piic
