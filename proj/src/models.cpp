#include "piic/models.hpp"

#include <cmath>

namespace piic {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_binom_coeff(int m, double y) {
  return std::lgamma(m + 1.0) - std::lgamma(y + 1.0) - std::lgamma(m - y + 1.0);
}

// log(1 + exp(eta)) without overflow
double log1pexp(double eta) {
  if (eta > 0.0) return eta + std::log1p(std::exp(-eta));
  return std::log1p(std::exp(eta));
}

double logistic(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

void check_theta_dim(const Dataset& data, const ParameterPoint& theta) {
  if (theta.p() != data.p()) throw config_error("theta dimension does not match design matrix");
}

}  // namespace

double log_likelihood_eta(const LikelihoodModel& model, double y, double eta) {
  if (model.kind == LikelihoodModel::Kind::linear_gaussian) {
    const double r = y - eta;
    return -0.5 * (kLog2Pi + std::log(model.sigma2)) - r * r / (2.0 * model.sigma2);
  }
  return log_binom_coeff(model.trials, y) + y * eta - model.trials * log1pexp(eta);
}

double log_likelihood_row(const LikelihoodModel& model, const Dataset& data, int row, const ParameterPoint& theta) {
  model.check_compatible(data);
  check_theta_dim(data, theta);
  const double eta = data.X().row(row).dot(theta.theta);
  return log_likelihood_eta(model, data.y()[row], eta);
}

double log_likelihood(const LikelihoodModel& model, const Dataset& data, const ParameterPoint& theta) {
  model.check_compatible(data);
  check_theta_dim(data, theta);
  const Vec eta = data.X() * theta.theta;
  double total = 0.0;
  for (int i = 0; i < data.n(); ++i) total += log_likelihood_eta(model, data.y()[i], eta[i]);
  return total;
}

Vec likelihood_score_row(const LikelihoodModel& model, const Dataset& data, int row, const ParameterPoint& theta) {
  check_theta_dim(data, theta);
  const double eta = data.X().row(row).dot(theta.theta);
  double u;
  if (model.kind == LikelihoodModel::Kind::linear_gaussian) {
    u = (data.y()[row] - eta) / model.sigma2;
  } else {
    u = data.y()[row] - model.trials * logistic(eta);
  }
  return u * data.X().row(row).transpose();
}

Mat likelihood_hessian_row(const LikelihoodModel& model, const Dataset& data, int row, const ParameterPoint& theta) {
  check_theta_dim(data, theta);
  const double eta = data.X().row(row).dot(theta.theta);
  double c;
  if (model.kind == LikelihoodModel::Kind::linear_gaussian) {
    c = -1.0 / model.sigma2;
  } else {
    const double s = logistic(eta);
    c = -model.trials * s * (1.0 - s);
  }
  const Vec x = data.X().row(row).transpose();
  return c * (x * x.transpose());
}

double log_prior(const PriorSpec& prior, const ParameterPoint& theta) {
  if (theta.p() != prior.p()) throw config_error("theta dimension does not match prior group map");
  double total = 0.0;
  if (prior.family() == PriorFamily::normal) {
    for (int j = 0; j < prior.p(); ++j) {
      const double zeta = prior.xi_of(j);
      total += -0.5 * (kLog2Pi + std::log(zeta)) - theta.theta[j] * theta.theta[j] / (2.0 * zeta);
    }
  } else {
    for (int j = 0; j < prior.p(); ++j) {
      const double rate = prior.xi_of(j);
      total += std::log(rate / 2.0) - rate * std::abs(theta.theta[j]);
    }
  }
  return total;
}

Vec prior_grad(const PriorSpec& prior, const ParameterPoint& theta) {
  if (theta.p() != prior.p()) throw config_error("theta dimension does not match prior group map");
  Vec g(prior.p());
  if (prior.family() == PriorFamily::normal) {
    for (int j = 0; j < prior.p(); ++j) g[j] = -theta.theta[j] / prior.xi_of(j);
  } else {
    for (int j = 0; j < prior.p(); ++j) {
      const double t = theta.theta[j];
      if (t == 0.0)
        throw numeric_error("Laplace prior derivative requested at a kink (theta_" + std::to_string(j + 1) +
                            " = 0); provide an active set");
      g[j] = -prior.xi_of(j) * (t > 0.0 ? 1.0 : -1.0);
    }
  }
  return g;
}

Mat prior_hess(const PriorSpec& prior, const ParameterPoint& /*theta*/) {
  Mat h = Mat::Zero(prior.p(), prior.p());
  if (prior.family() == PriorFamily::normal) {
    for (int j = 0; j < prior.p(); ++j) h(j, j) = -1.0 / prior.xi_of(j);
  }
  // Laplace prior curvature is zero away from the kinks
  return h;
}

Vec prior_xi_grad(const PriorSpec& prior, const Vec& theta) {
  if (theta.size() != prior.p()) throw config_error("theta dimension does not match prior group map");
  Vec g = Vec::Zero(prior.q());
  if (prior.family() == PriorFamily::normal) {
    for (int j = 0; j < prior.p(); ++j) {
      const double zeta = prior.xi_of(j);
      g[prior.group(j)] += -0.5 / zeta + theta[j] * theta[j] / (2.0 * zeta * zeta);
    }
  } else {
    for (int j = 0; j < prior.p(); ++j) {
      g[prior.group(j)] += 1.0 / prior.xi_of(j) - std::abs(theta[j]);
    }
  }
  return g;
}

double log_g_row(const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data, int row,
                 const ParameterPoint& theta) {
  return log_likelihood_row(model, data, row, theta) + log_prior(prior, theta) / prior.n0();
}

double log_g_total(const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data,
                   const ParameterPoint& theta) {
  const double w = static_cast<double>(data.n()) / prior.n0();
  return log_likelihood(model, data, theta) + w * log_prior(prior, theta);
}

RowDerivatives score_and_hessian(const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data, int row,
                                 const ParameterPoint& theta) {
  const double share = 1.0 / prior.n0();
  RowDerivatives d;
  d.grad = likelihood_score_row(model, data, row, theta) + share * prior_grad(prior, theta);
  d.hess = likelihood_hessian_row(model, data, row, theta) + share * prior_hess(prior, theta);
  return d;
}

RowDerivatives score_and_hessian_active(const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data,
                                        int row, const ParameterPoint& theta, const ActiveSet& active) {
  const double share = 1.0 / prior.n0();
  const double eta = data.X().row(row).dot(theta.theta);
  const int k = active.size();
  Vec x(k);
  for (int a = 0; a < k; ++a) x[a] = data.X()(row, active.indices()[static_cast<std::size_t>(a)]);

  double u, c;
  if (model.kind == LikelihoodModel::Kind::linear_gaussian) {
    u = (data.y()[row] - eta) / model.sigma2;
    c = -1.0 / model.sigma2;
  } else {
    const double s = 1.0 / (1.0 + std::exp(-eta));
    u = data.y()[row] - model.trials * s;
    c = -model.trials * s * (1.0 - s);
  }

  RowDerivatives d;
  d.grad = u * x;
  d.hess = c * (x * x.transpose());
  for (int a = 0; a < k; ++a) {
    const int j = active.indices()[static_cast<std::size_t>(a)];
    const double t = theta.theta[j];
    if (prior.family() == PriorFamily::normal) {
      d.grad[a] += share * (-t / prior.xi_of(j));
      d.hess(a, a) += share * (-1.0 / prior.xi_of(j));
    } else {
      if (t == 0.0)
        throw numeric_error("Laplace prior derivative requested at a kink inside the active set (theta_" +
                            std::to_string(j + 1) + " = 0)");
      d.grad[a] += share * (-prior.xi_of(j) * (t > 0.0 ? 1.0 : -1.0));
    }
  }
  return d;
}

WeightedProblem plain_problem(const LikelihoodModel& model, const PriorSpec& prior, const Dataset& data) {
  model.check_compatible(data);
  if (prior.p() != data.p()) throw config_error("prior group map does not match design matrix");
  return WeightedProblem{&data, model, prior, Vec::Ones(data.n()), 1.0 / prior.n0(),
                         static_cast<double>(data.n()) / prior.n0()};
}

double joint_log_density(const WeightedProblem& wp, const ParameterPoint& theta) {
  const Vec eta = wp.data->X() * theta.theta;
  double total = 0.0;
  for (int i = 0; i < wp.n(); ++i)
    total += wp.row_weight[i] * log_likelihood_eta(wp.model, wp.data->y()[i], eta[i]);
  return total + wp.prior_total * log_prior(wp.prior, theta);
}

}  // namespace piic
