#include "piic/inference.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "piic/rng.hpp"

namespace piic {

void SamplerConfig::validate() const {
  if (chain_length < 2) throw config_error("sampler: chain_length too small");
  if (burn_in < 0 || burn_in >= chain_length) throw config_error("sampler: need 0 <= burn_in < chain_length");
  if (thin < 1) throw config_error("sampler: thin must be >= 1");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw config_error("sampler: target_accept must be in (0,1)");
  if (!(init_step > 0.0)) throw config_error("sampler: init_step must be positive");
}

// --- Posterior --------------------------------------------------------------

Posterior Posterior::analytic(Vec mean, Mat cov, ParameterPoint map_point, Vec xi_used,
                              std::optional<ActiveSet> active) {
  Posterior post;
  post.analytic_ = true;
  post.p_ = static_cast<int>(mean.size());
  if (cov.rows() != post.p_ || cov.cols() != post.p_) throw config_error("Posterior: covariance shape mismatch");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + cov.cwiseAbs().maxCoeff()))
    throw numeric_error("Posterior: covariance not symmetric");
  // positive definiteness is required on the free block only
  if (active.has_value()) {
    const Mat block = [&] {
      const int k = active->size();
      Mat b(k, k);
      for (int a = 0; a < k; ++a)
        for (int c = 0; c < k; ++c) b(a, c) = cov(active->indices()[a], active->indices()[c]);
      return b;
    }();
    if (block.size() > 0) {
      Eigen::LDLT<Mat> ldlt(block);
      if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0)
        throw numeric_error("Posterior: covariance not positive definite on the active block");
    }
  } else {
    Eigen::LDLT<Mat> ldlt(cov);
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0)
      throw numeric_error("Posterior: covariance not positive definite");
  }
  post.mean_ = std::move(mean);
  post.cov_ = std::move(cov);
  post.map_point_ = std::move(map_point);
  post.xi_used_ = std::move(xi_used);
  post.active_ = std::move(active);
  return post;
}

Posterior Posterior::from_samples(Mat samples, ChainMeta meta, ParameterPoint map_point, Vec xi_used,
                                  std::optional<ActiveSet> active) {
  if (samples.rows() == 0) throw numeric_error("Posterior: empty sample set");
  if (meta.chain_length > 0 && !(meta.accept_rate > 0.0 && meta.accept_rate < 1.0))
    throw numeric_error("Posterior: acceptance rate outside (0,1)");
  Posterior post;
  post.analytic_ = false;
  post.p_ = static_cast<int>(samples.cols());
  post.samples_ = std::move(samples);
  post.meta_ = meta;
  post.map_point_ = std::move(map_point);
  post.xi_used_ = std::move(xi_used);
  post.active_ = std::move(active);
  return post;
}

Posterior Posterior::zero_point_mass(int p, Vec xi_used) {
  Posterior post;
  post.analytic_ = false;
  post.zero_point_mass_ = true;
  post.p_ = p;
  post.samples_ = Mat::Zero(1, p);
  post.map_point_ = ParameterPoint(Vec::Zero(p));
  post.xi_used_ = std::move(xi_used);
  post.active_ = ActiveSet({}, 0.0, p);
  return post;
}

const Vec& Posterior::mean() const {
  if (!analytic_) throw config_error("Posterior: mean() requires the analytic form");
  return mean_;
}

const Mat& Posterior::cov() const {
  if (!analytic_) throw config_error("Posterior: cov() requires the analytic form");
  return cov_;
}

const Mat& Posterior::samples() const {
  if (analytic_) throw config_error("Posterior: samples() requires the sample form");
  return samples_;
}

Vec Posterior::theta_mean() const {
  if (analytic_) return mean_;
  return samples_.colwise().mean().transpose();
}

// --- MAP --------------------------------------------------------------------

namespace {

Vec penalty_rates(const WeightedProblem& wp) {
  Vec lambda(wp.p());
  for (int j = 0; j < wp.p(); ++j) lambda[j] = wp.prior_total * wp.prior.xi_of(j);
  return lambda;
}

Mat weighted_gram(const WeightedProblem& wp) {
  const Mat& X = wp.data->X();
  return X.transpose() * wp.row_weight.asDiagonal() * X;
}

ParameterPoint map_linear_normal(const WeightedProblem& wp) {
  const double s2 = wp.model.sigma2;
  Mat P = weighted_gram(wp) / s2;
  for (int j = 0; j < wp.p(); ++j) P(j, j) += wp.prior_total / wp.prior.xi_of(j);
  const Vec b = wp.data->X().transpose() * (wp.row_weight.asDiagonal() * wp.data->y()) / s2;
  Eigen::LDLT<Mat> ldlt(P);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0)
    throw numeric_error("map_estimate: singular normal equations");
  return ParameterPoint(ldlt.solve(b));
}

ParameterPoint map_linear_laplace(const WeightedProblem& wp, std::vector<double>* objective_trace) {
  const Mat& X = wp.data->X();
  const Vec& y = wp.data->y();
  const double s2 = wp.model.sigma2;
  const Vec lambda = penalty_rates(wp);
  const int p = wp.p();

  Vec a(p);
  for (int j = 0; j < p; ++j) a[j] = wp.row_weight.cwiseProduct(X.col(j).cwiseAbs2()).sum() / s2;

  Vec theta = Vec::Zero(p);
  Vec resid = y;  // y - X theta
  const auto objective = [&]() {
    double v = 0.5 * wp.row_weight.cwiseProduct(resid.cwiseAbs2()).sum() / s2;
    for (int j = 0; j < p; ++j) v += lambda[j] * std::abs(theta[j]);
    return v;
  };
  if (objective_trace) objective_trace->push_back(objective());

  const int max_sweeps = 20000;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (int j = 0; j < p; ++j) {
      const double rho = wp.row_weight.cwiseProduct(X.col(j)).dot(resid) / s2 + a[j] * theta[j];
      double t_new;
      if (a[j] == 0.0) {
        if (std::abs(rho) > lambda[j])
          throw numeric_error("map_estimate: unbounded coordinate (non-identifiable design)");
        t_new = 0.0;
      } else {
        const double shrunk = std::abs(rho) - lambda[j];
        t_new = shrunk > 0.0 ? (rho > 0.0 ? shrunk : -shrunk) / a[j] : 0.0;
      }
      const double delta = t_new - theta[j];
      if (delta != 0.0) {
        resid -= delta * X.col(j);
        theta[j] = t_new;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    if (objective_trace) objective_trace->push_back(objective());
    // stopping rule scales with the coefficient magnitude (raw-unit responses)
    if (max_change < 1e-8 * std::max(1.0, theta.cwiseAbs().maxCoeff())) return ParameterPoint(theta);
  }
  throw numeric_error("map_estimate: coordinate descent did not converge in 20000 sweeps");
}

double smooth_neg_loglik(const WeightedProblem& wp, const Vec& theta, Vec* grad) {
  const Vec eta = wp.data->X() * theta;
  double value = 0.0;
  Vec u(wp.n());
  for (int i = 0; i < wp.n(); ++i) {
    value -= wp.row_weight[i] * log_likelihood_eta(wp.model, wp.data->y()[i], eta[i]);
    if (grad) {
      const double s = 1.0 / (1.0 + std::exp(-eta[i]));
      u[i] = -wp.row_weight[i] * (wp.data->y()[i] - wp.model.trials * s);
    }
  }
  if (grad) *grad = wp.data->X().transpose() * u;
  return value;
}

ParameterPoint map_logistic_normal(const WeightedProblem& wp) {
  const int p = wp.p();
  Vec theta = Vec::Zero(p);
  Vec ridge(p);
  for (int j = 0; j < p; ++j) ridge[j] = wp.prior_total / wp.prior.xi_of(j);

  double value = 0.0;
  Vec grad(p);
  const auto eval = [&](const Vec& t, Vec* g) {
    double v = smooth_neg_loglik(wp, t, g);
    v += 0.5 * t.cwiseAbs2().dot(ridge);
    if (g) *g += ridge.cwiseProduct(t);
    return v;
  };
  value = eval(theta, &grad);

  for (int iter = 0; iter < 200; ++iter) {
    if (grad.cwiseAbs().maxCoeff() < 1e-9 * (1.0 + std::abs(value))) return ParameterPoint(theta);
    // Newton direction from the exact Hessian
    const Vec eta = wp.data->X() * theta;
    Mat H = Mat::Zero(p, p);
    for (int i = 0; i < wp.n(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-eta[i]));
      const double c = wp.row_weight[i] * wp.model.trials * s * (1.0 - s);
      H.noalias() += c * (wp.data->X().row(i).transpose() * wp.data->X().row(i));
    }
    H += ridge.asDiagonal();
    Eigen::LDLT<Mat> ldlt(H);
    if (ldlt.info() != Eigen::Success) throw numeric_error("map_estimate: Newton system not solvable");
    const Vec step = ldlt.solve(-grad);
    if (theta.cwiseAbs().maxCoeff() > 1e8)
      throw numeric_error("map_estimate: Newton iterates diverged (separation with a near-flat prior)");
    double alpha = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Vec cand = theta + alpha * step;
      const double v = eval(cand, nullptr);
      if (v <= value + 1e-4 * alpha * grad.dot(step)) {
        theta = cand;
        value = eval(theta, &grad);
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) throw numeric_error("map_estimate: Newton line search failed");
  }
  throw numeric_error("map_estimate: Newton did not converge (final grad norm " +
                      std::to_string(grad.cwiseAbs().maxCoeff()) + ")");
}

ParameterPoint map_logistic_laplace(const WeightedProblem& wp) {
  const int p = wp.p();
  const Vec lambda = penalty_rates(wp);

  // Lipschitz constant of the smooth part: (m/4) lambda_max(X'WX)
  const Mat gram = weighted_gram(wp);
  Eigen::SelfAdjointEigenSolver<Mat> eig(gram);
  double L = std::max(1e-12, 0.25 * wp.model.trials * eig.eigenvalues().maxCoeff());

  const auto soft = [](double v, double t) {
    const double s = std::abs(v) - t;
    return s > 0.0 ? (v > 0.0 ? s : -s) : 0.0;
  };
  const auto penalized = [&](const Vec& t) {
    return smooth_neg_loglik(wp, t, nullptr) + lambda.dot(t.cwiseAbs());
  };

  Vec theta = Vec::Zero(p);
  Vec v = theta;
  double t_mom = 1.0;
  double best = penalized(theta);

  const int max_iters = 20000;
  for (int iter = 0; iter < max_iters; ++iter) {
    Vec grad(p);
    const double fv = smooth_neg_loglik(wp, v, &grad);
    Vec theta_new(p);
    // backtracking on the smooth majorization
    while (true) {
      for (int j = 0; j < p; ++j) theta_new[j] = soft(v[j] - grad[j] / L, lambda[j] / L);
      const Vec d = theta_new - v;
      const double f_new = smooth_neg_loglik(wp, theta_new, nullptr);
      if (f_new <= fv + grad.dot(d) + 0.5 * L * d.squaredNorm() + 1e-12) break;
      L *= 2.0;
      if (L > 1e18) throw numeric_error("map_estimate: proximal gradient step collapsed");
    }
    if (theta_new.cwiseAbs().maxCoeff() > 1e8)
      throw numeric_error("map_estimate: proximal gradient diverged (separation with a near-flat prior)");
    const double changed = (theta_new - theta).cwiseAbs().maxCoeff();
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_mom * t_mom));
    Vec v_next = theta_new + ((t_mom - 1.0) / t_next) * (theta_new - theta);
    const double obj = penalized(theta_new);
    if (obj > best) {  // adaptive restart
      v_next = theta_new;
      t_mom = 1.0;
    } else {
      best = obj;
      t_mom = t_next;
    }
    theta = theta_new;
    v = v_next;
    if (changed < 1e-9) return ParameterPoint(theta);
  }
  throw numeric_error("map_estimate: proximal gradient did not converge in 20000 iterations");
}

}  // namespace

ParameterPoint map_estimate_wp(const WeightedProblem& wp) {
  if (wp.model.kind == LikelihoodModel::Kind::linear_gaussian) {
    if (wp.prior.family() == PriorFamily::normal) return map_linear_normal(wp);
    return map_linear_laplace(wp, nullptr);
  }
  if (wp.prior.family() == PriorFamily::normal) return map_logistic_normal(wp);
  return map_logistic_laplace(wp);
}

ParameterPoint map_estimate(const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data) {
  return map_estimate_wp(plain_problem(model, prior, data));
}

ParameterPoint map_estimate_traced(const WeightedProblem& wp, std::vector<double>& objective_trace) {
  if (wp.model.kind != LikelihoodModel::Kind::linear_gaussian || wp.prior.family() != PriorFamily::laplace)
    throw config_error("map_estimate_traced: trace only available for the coordinate-descent path");
  return map_linear_laplace(wp, &objective_trace);
}

double map_kkt_violation(const WeightedProblem& wp, const ParameterPoint& theta) {
  // gradient of the smooth part of the joint log density
  Vec grad(wp.p());
  if (wp.model.kind == LikelihoodModel::Kind::linear_gaussian) {
    const Vec resid = wp.data->y() - wp.data->X() * theta.theta;
    grad = wp.data->X().transpose() * (wp.row_weight.cwiseProduct(resid)) / wp.model.sigma2;
  } else {
    Vec tmp;
    smooth_neg_loglik(wp, theta.theta, &tmp);
    grad = -tmp;
  }
  double viol = 0.0;
  if (wp.prior.family() == PriorFamily::normal) {
    for (int j = 0; j < wp.p(); ++j)
      viol = std::max(viol, std::abs(grad[j] - wp.prior_total * theta.theta[j] / wp.prior.xi_of(j)));
  } else {
    for (int j = 0; j < wp.p(); ++j) {
      const double lam = wp.prior_total * wp.prior.xi_of(j);
      if (theta.theta[j] == 0.0)
        viol = std::max(viol, std::max(0.0, std::abs(grad[j]) - lam));
      else
        viol = std::max(viol, std::abs(grad[j] - lam * (theta.theta[j] > 0.0 ? 1.0 : -1.0)));
    }
  }
  return viol;
}

// --- conjugate posterior ------------------------------------------------

bool conjugate_available(const WeightedProblem& wp) {
  return wp.model.kind == LikelihoodModel::Kind::linear_gaussian && wp.prior.family() == PriorFamily::normal;
}

Posterior conjugate_posterior_wp(const WeightedProblem& wp) {
  if (!conjugate_available(wp))
    throw config_error("conjugate_posterior: requires the linear-Gaussian likelihood and normal prior");
  const double s2 = wp.model.sigma2;
  Mat P = weighted_gram(wp) / s2;
  for (int j = 0; j < wp.p(); ++j) P(j, j) += wp.prior_total / wp.prior.xi_of(j);
  Eigen::LDLT<Mat> ldlt(P);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0)
    throw numeric_error("conjugate_posterior: singular precision matrix");
  const Vec b = wp.data->X().transpose() * (wp.row_weight.asDiagonal() * wp.data->y()) / s2;
  Vec mean = ldlt.solve(b);
  Mat cov = ldlt.solve(Mat::Identity(wp.p(), wp.p()));
  cov = 0.5 * (cov + cov.transpose());
  return Posterior::analytic(mean, cov, ParameterPoint(mean), wp.prior.xi());
}

Posterior conjugate_posterior(const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data) {
  return conjugate_posterior_wp(plain_problem(model, prior, data));
}

Posterior posterior_from_prior(const PriorSpec& prior) {
  if (prior.family() != PriorFamily::normal) throw config_error("posterior_from_prior: normal prior only");
  Vec mean = Vec::Zero(prior.p());
  Mat cov = Mat::Zero(prior.p(), prior.p());
  for (int j = 0; j < prior.p(); ++j) cov(j, j) = prior.xi_of(j);
  return Posterior::analytic(mean, cov, ParameterPoint(mean), prior.xi());
}

// --- Metropolis sampler -------------------------------------------------

Posterior mcmc_sample_wp(const WeightedProblem& wp, const SamplerConfig& config) {
  config.validate();
  const int p = wp.p();
  const int n = wp.n();
  const Mat& X = wp.data->X();
  const Vec& y = wp.data->y();

  Rng rng(config.seed);
  ParameterPoint theta = map_estimate_wp(wp);
  Vec eta = X * theta.theta;

  double log_dens = joint_log_density(wp, theta);
  if (!std::isfinite(log_dens)) throw numeric_error("mcmc_sample: non-finite log density at initialization");

  // initial proposal scales from the posterior curvature at the MAP; the
  // Laplace prior has no curvature, so its precision enters via the squared
  // rate (exponential tail scale)
  Vec log_step(p);
  for (int j = 0; j < p; ++j) {
    double prec = 0.0;
    for (int i = 0; i < n; ++i) {
      double c;
      if (wp.model.kind == LikelihoodModel::Kind::linear_gaussian) {
        c = 1.0 / wp.model.sigma2;
      } else {
        const double s = 1.0 / (1.0 + std::exp(-eta[i]));
        c = wp.model.trials * s * (1.0 - s);
      }
      prec += wp.row_weight[i] * c * X(i, j) * X(i, j);
    }
    if (wp.prior.family() == PriorFamily::normal) {
      prec += wp.prior_total / wp.prior.xi_of(j);
    } else {
      const double r = wp.prior_total * wp.prior.xi_of(j);
      prec += r * r;
    }
    const double step = std::clamp(config.init_step * 2.4 / std::sqrt(std::max(prec, 1e-12)), 1e-7, 1e3);
    log_step[j] = std::log(step);
  }
  std::vector<int> batch_accepts(static_cast<std::size_t>(p), 0);
  const int batch_size = 50;
  int batch_index = 1;

  const int n_keep = (config.chain_length - config.burn_in + config.thin - 1) / config.thin;
  Mat samples(n_keep, p);
  int kept = 0;
  long long post_accepts = 0, post_moves = 0;

  // per-coordinate contribution of the prior to the joint log density
  const auto prior_term = [&](int j, double t) {
    if (wp.prior.family() == PriorFamily::normal) {
      const double zeta = wp.prior.xi_of(j);
      return wp.prior_total * (-0.5 * (std::log(6.283185307179586 * zeta)) - t * t / (2.0 * zeta));
    }
    const double rate = wp.prior.xi_of(j);
    return wp.prior_total * (std::log(rate / 2.0) - rate * std::abs(t));
  };

  // cache the per-row log likelihood of the current state; a proposal then
  // costs one density evaluation per row instead of two
  Vec cur_ll(n), new_ll(n), new_eta(n);
  for (int i = 0; i < n; ++i) cur_ll[i] = log_likelihood_eta(wp.model, y[i], eta[i]);

  for (int sweep = 0; sweep < config.chain_length; ++sweep) {
    const bool adapting = sweep < config.burn_in;
    for (int j = 0; j < p; ++j) {
      const double step = std::exp(log_step[j]);
      const double t_old = theta.theta[j];
      const double t_new = t_old + step * rng.normal();
      double delta = prior_term(j, t_new) - prior_term(j, t_old);
      const double dtheta = t_new - t_old;
      for (int i = 0; i < n; ++i) {
        new_eta[i] = eta[i] + dtheta * X(i, j);
        new_ll[i] = log_likelihood_eta(wp.model, y[i], new_eta[i]);
        delta += wp.row_weight[i] * (new_ll[i] - cur_ll[i]);
      }
      const bool accept = std::log(rng.uniform()) < delta;
      if (accept) {
        theta.theta[j] = t_new;
        eta.swap(new_eta);
        cur_ll.swap(new_ll);
      }
      if (adapting) {
        batch_accepts[static_cast<std::size_t>(j)] += accept ? 1 : 0;
      } else {
        post_moves++;
        post_accepts += accept ? 1 : 0;
      }
    }
    if (adapting && (sweep + 1) % batch_size == 0) {
      const double gain = std::min(0.25, 1.0 / std::sqrt(static_cast<double>(batch_index)));
      for (int j = 0; j < p; ++j) {
        const double rate = batch_accepts[static_cast<std::size_t>(j)] / static_cast<double>(batch_size);
        log_step[j] += gain * (rate - config.target_accept);
        log_step[j] = std::clamp(log_step[j], std::log(1e-8), std::log(1e4));
        batch_accepts[static_cast<std::size_t>(j)] = 0;
      }
      batch_index++;
    }
    if (sweep >= config.burn_in && (sweep - config.burn_in) % config.thin == 0) {
      samples.row(kept++) = theta.theta.transpose();
    }
  }
  samples.conservativeResize(kept, p);

  ChainMeta meta;
  meta.accept_rate = post_moves > 0 ? static_cast<double>(post_accepts) / static_cast<double>(post_moves) : 0.0;
  meta.chain_length = config.chain_length;
  meta.burn_in = config.burn_in;
  meta.thin = config.thin;
  if (meta.accept_rate < 0.1 || meta.accept_rate > 0.6)
    throw numeric_error("mcmc_sample: post-adaptation acceptance rate " + std::to_string(meta.accept_rate) +
                        " outside [0.1, 0.6]");
  return Posterior::from_samples(std::move(samples), meta, map_estimate_wp(wp), wp.prior.xi());
}

Posterior mcmc_sample(const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data,
                      const SamplerConfig& config) {
  return mcmc_sample_wp(plain_problem(model, prior, data), config);
}

// --- reduced problems -----------------------------------------------------

WeightedProblem ReducedProblem::view() const {
  return WeightedProblem{&data, model, prior, row_weight, prior_share, prior_total};
}

ReducedProblem reduce_problem(const WeightedProblem& wp, const ActiveSet& active) {
  if (active.empty()) throw config_error("reduce_problem: empty active set");
  const int k = active.size();
  Mat Xr(wp.n(), k);
  for (int a = 0; a < k; ++a) Xr.col(a) = wp.data->X().col(active.indices()[static_cast<std::size_t>(a)]);

  // keep only groups that still have members, renumbered compactly
  std::vector<int> group_new(static_cast<std::size_t>(wp.prior.q()), -1);
  std::vector<int> group_origin;
  std::vector<int> group_of(static_cast<std::size_t>(k));
  for (int a = 0; a < k; ++a) {
    const int g = wp.prior.group(active.indices()[static_cast<std::size_t>(a)]);
    if (group_new[static_cast<std::size_t>(g)] < 0) {
      group_new[static_cast<std::size_t>(g)] = static_cast<int>(group_origin.size());
      group_origin.push_back(g);
    }
    group_of[static_cast<std::size_t>(a)] = group_new[static_cast<std::size_t>(g)];
  }
  Vec xi(static_cast<int>(group_origin.size()));
  for (std::size_t t = 0; t < group_origin.size(); ++t) xi[static_cast<int>(t)] = wp.prior.xi()[group_origin[t]];

  Dataset data_r = wp.data->kind() == ResponseKind::gaussian
                       ? Dataset::gaussian(std::move(Xr), wp.data->y())
                       : Dataset::binomial(std::move(Xr), wp.data->y(), wp.data->trials());
  PriorSpec prior_r(wp.prior.family(), std::move(group_of), wp.prior.n0(), std::move(xi));
  return ReducedProblem{std::move(data_r), std::move(prior_r), wp.model,
                        wp.row_weight,     wp.prior_share,     wp.prior_total,
                        std::move(group_origin)};
}

Posterior restricted_posterior_wp(const WeightedProblem& wp, const ActiveSet& active, const SamplerConfig& config) {
  if (active.full_dim() != wp.p()) throw config_error("restricted_posterior: active set dimension mismatch");
  if (active.empty()) return Posterior::zero_point_mass(wp.p(), wp.prior.xi());

  const ReducedProblem red = reduce_problem(wp, active);
  const WeightedProblem rv = red.view();
  if (conjugate_available(rv)) {
    const Posterior inner = conjugate_posterior_wp(rv);
    Vec mean = embed_from(active, inner.mean());
    Mat cov = Mat::Zero(wp.p(), wp.p());
    for (int a = 0; a < active.size(); ++a)
      for (int c = 0; c < active.size(); ++c) cov(active.indices()[a], active.indices()[c]) = inner.cov()(a, c);
    return Posterior::analytic(std::move(mean), std::move(cov), ParameterPoint(embed_from(active, inner.mean())),
                               wp.prior.xi(), active);
  }
  const Posterior inner = mcmc_sample_wp(rv, config);
  Mat samples = Mat::Zero(inner.sample_count(), wp.p());
  for (int a = 0; a < active.size(); ++a) samples.col(active.indices()[a]) = inner.samples().col(a);
  return Posterior::from_samples(std::move(samples), inner.meta(),
                                 ParameterPoint(embed_from(active, inner.map_point().theta)), wp.prior.xi(), active);
}

Posterior restricted_posterior(const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data,
                               const ActiveSet& active, const SamplerConfig& config) {
  return restricted_posterior_wp(plain_problem(model, prior, data), active, config);
}

Posterior fit_posterior_wp(const WeightedProblem& wp, const SamplerConfig& config, bool force_sampling) {
  if (!force_sampling && conjugate_available(wp)) return conjugate_posterior_wp(wp);
  return mcmc_sample_wp(wp, config);
}

}  // namespace piic
