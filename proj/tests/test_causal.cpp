#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "piic/causal.hpp"
#include "piic/rng.hpp"

using namespace piic;

namespace {

SamplerConfig sampler(std::uint64_t seed, int chain = 20000, int burn = 5000, int thin = 2) {
  SamplerConfig cfg;
  cfg.chain_length = chain;
  cfg.burn_in = burn;
  cfg.thin = thin;
  cfg.seed = seed;
  return cfg;
}

// single-treatment MSM over an existing regression dataset
MSMDataset single_treatment_msm(const Mat& X, const Vec& y) {
  return MSMDataset(X, std::vector<int>(static_cast<std::size_t>(y.size()), 0), y, 1);
}

MSMDataset simulate_confounded(std::uint64_t seed, int n, int s, const Vec& theta1, const Vec& theta2,
                               std::vector<double>* e_true = nullptr) {
  Rng rng(seed);
  Mat X(n, s);
  Vec y(n);
  std::vector<int> t(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < s; ++j) X(i, j) = rng.normal();
    const double e1 = 1.0 / (1.0 + std::exp(-0.8 * X(i, 0)));  // confounded assignment
    const bool one = rng.uniform() < e1;
    t[static_cast<std::size_t>(i)] = one ? 0 : 1;
    const Vec& th = one ? theta1 : theta2;
    y[i] = X.row(i).dot(th) + rng.normal();
    if (e_true) e_true->push_back(one ? e1 : 1.0 - e1);
  }
  return MSMDataset(X, t, y, 2);
}

}  // namespace

TEST_CASE("propensity model") {
  SUBCASE("single treatment is always 1") {
    auto tp = oracles::random_linear_problem(1, 10, 2, Vec::Zero(2));
    const MSMDataset msm = single_treatment_msm(tp.X, tp.y);
    const PropensityModel prop = PropensityModel::fitted(msm);
    for (int i = 0; i < msm.n(); ++i) CHECK(prop.eval(msm, i, 0) == 1.0);
  }

  SUBCASE("known propensity passes through exactly") {
    auto tp = oracles::random_linear_problem(2, 6, 2, Vec::Zero(2));
    std::vector<int> t = {0, 1, 0, 1, 0, 1};
    const MSMDataset msm(tp.X, t, tp.y, 2);
    const PropensityModel prop =
        PropensityModel::known([](const Vec&, int h) { return h == 0 ? 0.3 : 0.7; }, 2);
    CHECK(prop.eval(msm, 0, 0) == 0.3);
    CHECK(prop.eval(msm, 0, 1) == 0.7);
  }

  SUBCASE("values below the floor are clipped and counted") {
    auto tp = oracles::random_linear_problem(3, 4, 1, Vec::Zero(1));
    std::vector<int> t = {0, 1, 0, 1};
    const MSMDataset msm(tp.X, t, tp.y, 2);
    const PropensityModel prop =
        PropensityModel::known([](const Vec&, int h) { return h == 0 ? 0.001 : 0.999; }, 2);
    CHECK(prop.eval(msm, 0, 0) == PropensityModel::kFloor);
    CHECK(prop.clip_count() == 1);
  }

  SUBCASE("fitted balanced randomized assignment approaches 1/2 at n = 2000") {
    Rng rng(4);
    const int n = 2000, s = 2;
    Mat X(n, s);
    Vec y = Vec::Zero(n);
    std::vector<int> t(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < s; ++j) X(i, j) = rng.normal();
      t[static_cast<std::size_t>(i)] = rng.bernoulli(0.5) ? 1 : 0;
    }
    const MSMDataset msm(X, t, y, 2);
    const PropensityModel prop = PropensityModel::fitted(msm);
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) worst = std::max(worst, std::abs(prop.eval(msm, i, 0) - 0.5));
    CHECK(worst < 0.05);
  }
}

TEST_CASE("ipw problem construction") {
  SUBCASE("unobserved treatment is an identifiability error") {
    auto tp = oracles::random_linear_problem(5, 6, 2, Vec::Zero(2));
    const MSMDataset msm(tp.X, std::vector<int>(6, 0), tp.y, 2);  // treatment 2 never seen
    PriorSpec prior(PriorFamily::normal, PriorSpec::single_group(4), 6, Vec::Constant(1, 1.0));
    const PropensityModel prop = PropensityModel::known([](const Vec&, int) { return 0.5; }, 2);
    CHECK_THROWS_AS(ipw_problem(LikelihoodModel::linear(1.0), prior, msm, prop), numeric_error);
  }

  SUBCASE("weights are t/e for the observed treatment") {
    auto tp = oracles::random_linear_problem(6, 4, 2, Vec::Zero(2));
    std::vector<int> t = {0, 1, 1, 0};
    const MSMDataset msm(tp.X, t, tp.y, 2);
    PriorSpec prior(PriorFamily::normal, PriorSpec::single_group(4), 4, Vec::Constant(1, 1.0));
    const PropensityModel prop =
        PropensityModel::known([](const Vec&, int h) { return h == 0 ? 0.25 : 0.75; }, 2);
    const IPWProblem prob = ipw_problem(LikelihoodModel::linear(1.0), prior, msm, prop);
    CHECK(prob.row_weight[0] == doctest::Approx(4.0));
    CHECK(prob.row_weight[1] == doctest::Approx(4.0 / 3.0));
    // block embedding: row 0 lives in block 1, row 1 in block 2
    CHECK(prob.data.X()(0, 0) == tp.X(0, 0));
    CHECK(prob.data.X()(0, 2) == 0.0);
    CHECK(prob.data.X()(1, 2) == tp.X(1, 0));
    CHECK(prob.data.X()(1, 0) == 0.0);
    // prior share splits 1/n0 over the treatment factors
    CHECK(prob.prior_share == doctest::Approx(1.0 / (4.0 * 2.0)));
    CHECK(prob.prior_total == doctest::Approx(1.0));
  }
}

TEST_CASE("ipw map estimation") {
  SUBCASE("H=1 with unit propensity reduces to the plain MAP, bit for bit") {
    for (std::uint64_t seed : {11u, 12u, 13u}) {
      auto tp = oracles::random_linear_problem(seed, 15, 3, (Vec(3) << 2, 0, -1).finished());
      const Dataset data = Dataset::gaussian(tp.X, tp.y);
      const MSMDataset msm = single_treatment_msm(tp.X, tp.y);
      const PropensityModel prop = PropensityModel::known([](const Vec&, int) { return 1.0; }, 1);
      for (auto family : {PriorFamily::normal, PriorFamily::laplace}) {
        PriorSpec prior(family, PriorSpec::single_group(3), data.n(), Vec::Constant(1, 1.1));
        const LikelihoodModel model = LikelihoodModel::linear(1.0);
        const IPWProblem prob = ipw_problem(model, prior, msm, prop);
        const Vec a = ipw_map_estimate(prob).theta;
        const Vec b = map_estimate(model, prior, data).theta;
        CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
      }
    }
  }

  SUBCASE("constant weight 2 equals the closed-form reweighted ridge solve") {
    auto tp = oracles::random_linear_problem(17, 12, 2, (Vec(2) << 1, -1).finished());
    std::vector<int> t(12);
    for (int i = 0; i < 12; ++i) t[static_cast<std::size_t>(i)] = i % 2;
    const MSMDataset msm(tp.X, t, tp.y, 2);
    PriorSpec prior(PriorFamily::normal, PriorSpec::single_group(4), 12, Vec::Constant(1, 0.9));
    const PropensityModel prop = PropensityModel::known([](const Vec&, int) { return 0.5; }, 2);
    const IPWProblem prob = ipw_problem(LikelihoodModel::linear(1.0), prior, msm, prop);
    const Vec theta = ipw_map_estimate(prob).theta;

    // oracle: all weights are 2, so the likelihood term doubles while the
    // prior keeps its n/n0 exponent
    const Mat& Xe = prob.data.X();
    Mat P = 2.0 * Xe.transpose() * Xe;
    for (int j = 0; j < 4; ++j) P(j, j) += prob.prior_total / 0.9;
    const Vec expect = P.ldlt().solve(2.0 * Xe.transpose() * tp.y);
    CHECK((theta - expect).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("randomized assignment with known e recovers the truth at n = 2000") {
    const Vec theta1 = (Vec(2) << 1.0, -0.5).finished();
    const Vec theta2 = (Vec(2) << -1.0, 0.5).finished();
    Vec bias = Vec::Zero(4);
    const int seeds = 20;
    for (std::uint64_t s = 0; s < seeds; ++s) {
      const MSMDataset msm = simulate_confounded(100 + s, 2000, 2, theta1, theta2);
      PriorSpec flat(PriorFamily::normal, PriorSpec::single_group(4), msm.n(), Vec::Constant(1, 1e8));
      const PropensityModel prop = PropensityModel::known(
          [](const Vec& x, int h) {
            const double e1 = 1.0 / (1.0 + std::exp(-0.8 * x[0]));
            return h == 0 ? e1 : 1.0 - e1;
          },
          2);
      const IPWProblem prob = ipw_problem(LikelihoodModel::linear(1.0), flat, msm, prop);
      const Vec theta = ipw_map_estimate(prob).theta;
      bias += (theta - (Vec(4) << theta1, theta2).finished());
    }
    bias /= static_cast<double>(seeds);
    CHECK(bias.cwiseAbs().maxCoeff() < 0.05);
  }
}

TEST_CASE("ipw predictive density") {
  auto tp = oracles::random_linear_problem(23, 10, 2, (Vec(2) << 1, 0.5).finished());

  SUBCASE("H=1 reduction equals the plain predictive bit for bit") {
    const Dataset data = Dataset::gaussian(tp.X, tp.y);
    const MSMDataset msm = single_treatment_msm(tp.X, tp.y);
    const PropensityModel prop = PropensityModel::known([](const Vec&, int) { return 1.0; }, 1);
    PriorSpec prior(PriorFamily::normal, PriorSpec::single_group(2), data.n(), Vec::Constant(1, 1.0));
    const LikelihoodModel model = LikelihoodModel::linear(1.0);
    const IPWProblem prob = ipw_problem(model, prior, msm, prop);

    const Posterior post = mcmc_sample_wp(prob.view(), sampler(31, 8000, 2000, 2));
    const Posterior post_plain = mcmc_sample(model, prior, data, sampler(31, 8000, 2000, 2));
    REQUIRE((post.samples() - post_plain.samples()).cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < data.n(); ++i)
      CHECK(ipw_predictive_logdens(post, prob, i) == predictive_logdens(post_plain, model, data, i));
  }

  SUBCASE("degenerate posterior gives the weighted plug-in density") {
    std::vector<int> t = {0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    const MSMDataset msm(tp.X, t, tp.y, 2);
    PriorSpec prior(PriorFamily::normal, PriorSpec::single_group(4), 10, Vec::Constant(1, 1.0));
    const PropensityModel prop =
        PropensityModel::known([](const Vec&, int h) { return h == 0 ? 0.4 : 0.6; }, 2);
    const IPWProblem prob = ipw_problem(LikelihoodModel::linear(1.0), prior, msm, prop);
    const Vec theta0 = (Vec(4) << 0.5, -0.2, 0.1, 0.3).finished();
    Mat S(3, 4);
    for (int s = 0; s < 3; ++s) S.row(s) = theta0.transpose();
    ChainMeta meta;
    const Posterior post = Posterior::from_samples(S, meta, ParameterPoint(theta0), prior.xi());
    for (int i = 0; i < prob.data.n(); ++i) {
      const double eta = prob.data.X().row(i).dot(theta0);
      const double expect = prob.row_weight[i] * log_likelihood_eta(prob.model, prob.data.y()[i], eta);
      CHECK(ipw_predictive_logdens(post, prob, i) == doctest::Approx(expect).epsilon(1e-12));
    }
  }

  SUBCASE("weighted sample estimate matches quadrature on a small case") {
    std::vector<int> t = {0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    const MSMDataset msm(tp.X.leftCols(1), t, tp.y, 2);
    PriorSpec prior(PriorFamily::normal, PriorSpec::single_group(2), 10, Vec::Constant(1, 1.5));
    const PropensityModel prop =
        PropensityModel::known([](const Vec&, int h) { return h == 0 ? 0.35 : 0.65; }, 2);
    const IPWProblem prob = ipw_problem(LikelihoodModel::linear(1.0), prior, msm, prop);
    const Posterior post = mcmc_sample_wp(prob.view(), sampler(7, 200000, 20000, 2));

    const Vec center = ipw_map_estimate(prob).theta;
    oracles::QuadraturePosterior quad(prob.view(), center, Vec::Constant(2, 3.0), 140);
    for (int i = 0; i < 4; ++i) {
      const Vec x = prob.data.X().row(i).transpose();
      const double w = prob.row_weight[i];
      const double oracle = quad.weighted_predictive_logdens(prob.model, x, prob.data.y()[i], w);
      CHECK(ipw_predictive_logdens(post, prob, i) == doctest::Approx(oracle).epsilon(1e-2));
    }
  }
}

TEST_CASE("piic_ip") {
  SUBCASE("hand case: two rows with weights 1 and 2") {
    Mat X(2, 1);
    X << 1.0, 2.0;
    Vec y(2);
    y << 1.5, -0.5;
    std::vector<int> t = {0, 0};
    // build the weighted problem directly to pin the weights at (1, 2)
    const Dataset data = Dataset::gaussian(X, y);
    PriorSpec prior(PriorFamily::normal, PriorSpec::single_group(1), 2, Vec::Constant(1, 2.0));
    const LikelihoodModel model = LikelihoodModel::linear(1.0);
    WeightedProblem wp{&data, model, prior, (Vec(2) << 1.0, 2.0).finished(), 1.0 / 2.0, 1.0};
    const Vec th = Vec::Constant(1, 0.3);
    const auto fp = fisher_pair_wp(wp, ParameterPoint(th), std::nullopt);

    // I1 = -(1/2)[w1 H1 + w2 H2 + total * Hpi], Hi = -x_i^2
    const double I1 = -0.5 * (1.0 * (-1.0) + 2.0 * (-4.0) + 1.0 * (-0.5));
    // per-treatment score s_i = (y_i - x_i th) x_i + share * (-th/zeta),
    // entering I2 with weight w_i^2
    const double s1 = (1.5 - 0.3) * 1.0 + 0.5 * (-0.15);
    const double s2 = (-0.5 - 0.6) * 2.0 + 0.5 * (-0.15);
    const double I2 = 0.5 * (1.0 * s1 * s1 + 4.0 * s2 * s2);
    CHECK(fp.I1(0, 0) == doctest::Approx(I1).epsilon(1e-12));
    CHECK(fp.I2(0, 0) == doctest::Approx(I2).epsilon(1e-12));
  }

  SUBCASE("H=1 reduction equals the plain dense piic bit for bit") {
    for (std::uint64_t seed : {41u, 42u}) {
      auto tp = oracles::random_linear_problem(seed, 12, 3, (Vec(3) << 1, 0, -1).finished());
      const Dataset data = Dataset::gaussian(tp.X, tp.y);
      const MSMDataset msm = single_treatment_msm(tp.X, tp.y);
      const PropensityModel prop = PropensityModel::known([](const Vec&, int) { return 1.0; }, 1);
      PriorSpec prior(PriorFamily::normal, PriorSpec::single_group(3), data.n(), Vec::Constant(1, 0.8));
      const LikelihoodModel model = LikelihoodModel::linear(1.0);
      const IPWProblem prob = ipw_problem(model, prior, msm, prop);

      const Posterior post_ip = mcmc_sample_wp(prob.view(), sampler(seed, 8000, 2000, 2));
      const auto ip = piic_ip(post_ip, prob, ipw_map_estimate(prob));

      const Posterior post = mcmc_sample(model, prior, data, sampler(seed, 8000, 2000, 2));
      const auto fp = fisher_pair(model, prior, data, map_estimate(model, prior, data));
      const double plain = piic::piic(post, model, data, fp);
      CHECK(ip.piic == plain);
    }
  }

  SUBCASE("halving the propensities increases the penalty at a fixed theta") {
    auto tp = oracles::random_linear_problem(47, 14, 2, (Vec(2) << 1, 1).finished());
    std::vector<int> t(14, 0);
    for (int i = 0; i < 14; i += 2) t[static_cast<std::size_t>(i)] = 1;
    const MSMDataset msm(tp.X, t, tp.y, 2);
    PriorSpec prior(PriorFamily::normal, PriorSpec::single_group(4), 14, Vec::Constant(1, 1.0));
    const LikelihoodModel model = LikelihoodModel::linear(1.0);

    const PropensityModel e1 = PropensityModel::known([](const Vec&, int) { return 0.5; }, 2);
    const PropensityModel e2 = PropensityModel::known([](const Vec&, int h) { return h == 0 ? 0.25 : 0.75; }, 2);
    const IPWProblem prob1 = ipw_problem(model, prior, msm, e1);
    const IPWProblem prob2 = ipw_problem(model, prior, msm, e2);

    const ParameterPoint theta = ipw_map_estimate(prob1);
    const auto fp1 = fisher_pair_wp(prob1.view(), theta, std::nullopt);
    const auto fp2 = fisher_pair_wp(prob2.view(), theta, std::nullopt);
    CHECK(trace_penalty(fp2.I1, fp2.I2).value > trace_penalty(fp1.I1, fp1.I2).value);
  }
}

TEST_CASE("piic2_ip") {
  SUBCASE("H=1 reduction equals plain piic2 bit for bit") {
    auto tp = oracles::random_linear_problem(53, 12, 2, (Vec(2) << 1, -1).finished());
    const Dataset data = Dataset::gaussian(tp.X, tp.y);
    const MSMDataset msm = single_treatment_msm(tp.X, tp.y);
    const PropensityModel prop = PropensityModel::known([](const Vec&, int) { return 1.0; }, 1);
    PriorSpec prior(PriorFamily::normal, PriorSpec::single_group(2), data.n(), Vec::Constant(1, 1.0));
    const LikelihoodModel model = LikelihoodModel::linear(1.0);
    const IPWProblem prob = ipw_problem(model, prior, msm, prop);

    JConfig jc;
    jc.sampler = sampler(61, 8000, 2000, 2);
    jc.force_sampling = true;
    const JPair jp_ip = j_pair_ip(prob, prior.xi(), jc);
    const JPair jp = j_pair(model, prior, data, prior.xi(), jc);
    CHECK(jp_ip.J1(0, 0) == jp.J1(0, 0));
    CHECK(jp_ip.J2(0, 0) == jp.J2(0, 0));
    CHECK(piic2_ip(5.0, jp_ip) == piic2(5.0, jp));
  }

  SUBCASE("frozen u gives a zero xi-penalty contribution") {
    auto tp = oracles::random_linear_problem(59, 10, 2, (Vec(2) << 1, 1).finished());
    const Dataset data = Dataset::gaussian(tp.X, tp.y);
    PriorSpec prior(PriorFamily::normal, PriorSpec::single_group(2), data.n(), Vec::Constant(1, 1.0));
    const Posterior post = mcmc_sample(LikelihoodModel::linear(1.0), prior, data, sampler(3, 6000, 2000, 2));
    const Mat zero_scores =
        xi_scores_identity(post, LikelihoodModel::linear(1.0), data, Mat::Zero(post.sample_count(), 1));
    CHECK(zero_scores.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("q=1 weighted case against a finite-difference oracle") {
    std::vector<int> t = {0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    auto tp = oracles::random_linear_problem(61, 12, 1, Vec::Constant(1, 1.0));
    const MSMDataset msm(tp.X, t, tp.y, 2);
    PriorSpec prior(PriorFamily::normal, PriorSpec::single_group(2), 12, Vec::Constant(1, 1.2));
    const PropensityModel prop =
        PropensityModel::known([](const Vec&, int h) { return h == 0 ? 0.45 : 0.55; }, 2);
    const IPWProblem prob = ipw_problem(LikelihoodModel::linear(1.0), prior, msm, prop);

    JConfig jc;
    jc.sampler = sampler(71);
    const JPair jp = j_pair_ip(prob, prior.xi(), jc);  // analytic weighted posterior path

    // oracle: direct finite differences of the per-row weighted predictive
    const auto logpred = [&](double zeta, int row) {
      const IPWProblem probz =
          ipw_problem(LikelihoodModel::linear(1.0), prior.with_xi(Vec::Constant(1, zeta)), msm, prop);
      // analytic weighted conjugate posterior
      const Posterior post = conjugate_posterior_wp(probz.view());
      PredictiveEvaluator eval(post, prob.model);
      return eval.logdens(prob.data.X().row(row).transpose(), prob.data.y()[row], 1.0);
    };
    const double z0 = 1.2, h = 1e-4 * (1.0 + z0);
    double J1o = 0.0, J2o = 0.0;
    for (int i = 0; i < prob.data.n(); ++i) {
      const double d1 = (logpred(z0 + h, i) - logpred(z0 - h, i)) / (2.0 * h);
      const double d2 = (logpred(z0 + h, i) - 2.0 * logpred(z0, i) + logpred(z0 - h, i)) / (h * h);
      const double w = prob.row_weight[i];
      J1o -= w * d2;
      J2o += w * w * d1 * d1;
    }
    J1o /= prob.data.n();
    J2o /= prob.data.n();
    CHECK(jp.J1(0, 0) == doctest::Approx(J1o).epsilon(2e-2));
    CHECK(jp.J2(0, 0) == doctest::Approx(J2o).epsilon(2e-2));
  }
}
