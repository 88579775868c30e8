#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "piic/criteria.hpp"
#include "piic/hyperopt.hpp"
#include "piic/inference.hpp"

using namespace piic;

TEST_CASE("minimize_criterion") {
  SUBCASE("strictly convex scalar objective") {
    XiSearchSpace space;
    space.q = 1;
    const auto obj = [](const Vec& xi) { return (xi[0] - 2.0) * (xi[0] - 2.0); };
    const MinimizeResult res = minimize_criterion(obj, space);
    CHECK(res.xi_hat[0] == doctest::Approx(2.0).epsilon(1e-3));
    CHECK(res.value < 1e-5);
  }

  SUBCASE("grid-only mode returns the exhaustive argmin exactly") {
    XiSearchSpace space;
    space.q = 2;
    space.grid_points = 7;
    space.simplex_budget = 0;
    const auto obj = [](const Vec& xi) { return std::abs(std::log(xi[0]) - 1.0) + std::abs(std::log(xi[1]) + 2.0); };
    const MinimizeResult res = minimize_criterion(obj, space);
    // exhaustive scan oracle
    double best = 1e300;
    Vec best_xi(2);
    for (int a = 0; a < 7; ++a)
      for (int b = 0; b < 7; ++b) {
        Vec xi(2);
        xi[0] = std::pow(10.0, -3.0 + a * 1.0);
        xi[1] = std::pow(10.0, -3.0 + b * 1.0);
        const double v = obj(xi);
        if (v < best) {
          best = v;
          best_xi = xi;
        }
      }
    CHECK(res.value == best);
    CHECK(res.xi_hat[0] == best_xi[0]);
    CHECK(res.xi_hat[1] == best_xi[1]);
  }

  SUBCASE("the returned value is the best of the whole trace") {
    XiSearchSpace space;
    space.q = 1;
    const auto obj = [](const Vec& xi) { return std::sin(3.0 * std::log(xi[0])) + 0.1 * std::log(xi[0]); };
    const MinimizeResult res = minimize_criterion(obj, space);
    for (const auto& [xi, v] : res.trace) CHECK(res.value <= v + 1e-15);
  }

  SUBCASE("separable objective: extra dimensions do not hurt") {
    const auto obj1 = [](const Vec& xi) { return (std::log10(xi[0]) - 0.7) * (std::log10(xi[0]) - 0.7); };
    const auto obj3 = [&](const Vec& xi) { return obj1(xi.head(1)); };
    XiSearchSpace s1;
    s1.q = 1;
    XiSearchSpace s3;
    s3.q = 3;
    s3.grid_points = 9;
    const MinimizeResult r1 = minimize_criterion(obj1, s1);
    const MinimizeResult r3 = minimize_criterion(obj3, s3);
    CHECK(std::abs(r1.value - r3.value) < 1e-2);
    CHECK(std::abs(std::log10(r3.xi_hat[0]) - 0.7) < 0.1);
  }

  SUBCASE("deterministic: equal inputs give equal outputs") {
    XiSearchSpace space;
    space.q = 2;
    space.grid_points = 5;
    const auto obj = [](const Vec& xi) { return xi[0] + 1.0 / xi[0] + 0.3 * xi[1] + 1.0 / xi[1]; };
    const MinimizeResult a = minimize_criterion(obj, space);
    const MinimizeResult b = minimize_criterion(obj, space);
    CHECK(a.value == b.value);
    CHECK((a.xi_hat - b.xi_hat).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.trace.size() == b.trace.size());
  }

  SUBCASE("all-infinite objective is an error") {
    XiSearchSpace space;
    space.q = 1;
    space.grid_points = 4;
    space.simplex_budget = 0;
    const auto obj = [](const Vec&) { return std::numeric_limits<double>::infinity(); };
    CHECK_THROWS_AS(minimize_criterion(obj, space), numeric_error);
  }
}

TEST_CASE("nested hyper-parameter classes never do worse on contained grids") {
  // WAIC minimized over the 3-group grid vs the shared-xi diagonal: if the
  // product grid contains the diagonal, the richer class attains a value at
  // least as small.
  auto tp = oracles::random_linear_problem(101, 12, 6, (Vec(6) << 2, 2, 2, 2, 2, 2).finished());
  const Dataset data = Dataset::gaussian(tp.X, tp.y);
  const LikelihoodModel model = LikelihoodModel::linear(1.0);

  const auto waic_at = [&](const std::vector<int>& groups, const Vec& xi) {
    PriorSpec prior(PriorFamily::normal, groups, data.n(), xi);
    const Posterior post = conjugate_posterior(model, prior, data);
    return waic(post, model, data);
  };

  XiSearchSpace s1;
  s1.q = 1;
  s1.grid_points = 7;
  s1.simplex_budget = 0;
  XiSearchSpace s3;
  s3.q = 3;
  s3.grid_points = 7;
  s3.simplex_budget = 0;

  const MinimizeResult r1 =
      minimize_criterion([&](const Vec& xi) { return waic_at(PriorSpec::single_group(6), xi); }, s1);
  const MinimizeResult r3 =
      minimize_criterion([&](const Vec& xi) { return waic_at(PriorSpec::block_groups(6, 3), xi); }, s3);
  CHECK(r3.value <= r1.value + 1e-12);
}
