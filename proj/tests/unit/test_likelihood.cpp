#include <cmath>

#include "doctest.h"
#include "peertreat/equilibrium.hpp"
#include "peertreat/errors.hpp"
#include "peertreat/likelihood.hpp"
#include "support/fixtures.hpp"
#include "support/probit_oracle.hpp"

using namespace peertreat;

TEST_SUITE("likelihood") {

TEST_CASE("cell probabilities sum to one and match the quadrature joint") {
  RandomStream rng(2);
  for (int k = 0; k < 200; ++k) {
    const double rho = -0.95 + 1.9 * rng.uniform();
    ModelParams p = fixture::params(0.5, rng.normal(), 0.0, rho);
    const double a = 2.0 * rng.normal();
    const double t = 2.0 * rng.normal();
    const auto c = cell_probabilities(p, a, t);
    CHECK(std::abs(c.p11 + c.p10 + c.p01 + c.p00 - 1.0) < 1e-12);
    CHECK(c.p11 == doctest::Approx(oracle::bivariate_cdf_1d(a + p.gamma, t, rho)).epsilon(1e-9));
    CHECK(c.p00 == doctest::Approx(oracle::bivariate_cdf_1d(-a, -t, rho)).epsilon(1e-9));
  }
}

TEST_CASE("analytic gradient matches central differences") {
  const ModelParams p = fixture::params(1.0, 1.0, 1.0, 0.5);
  const Dataset d = fixture::simulated(300, p, 9);
  const CcpProfile prof = solve_equilibrium(p, d);
  const PseudoLikelihood L(d, prof);
  RandomStream rng(4);
  for (int k = 0; k < 10; ++k) {
    Vector theta = p.pack();
    for (Index j = 0; j < theta.size() - 1; ++j) theta[j] += 0.3 * rng.normal();
    theta[theta.size() - 1] = -0.9 + 1.8 * rng.uniform();
    const auto ev = L.evaluate(theta);
    for (Index j = 0; j < theta.size(); ++j) {
      const double h = 1e-6;
      Vector a = theta, b = theta;
      a[j] += h;
      b[j] -= h;
      const double fd = (L.evaluate(a, false).value - L.evaluate(b, false).value) / (2 * h);
      CHECK(std::abs(ev.gradient[j] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("per-observation scores average to the gradient") {
  const ModelParams p = fixture::params(1.0, 1.0, 1.0, -0.4);
  const Dataset d = fixture::simulated(200, p, 10);
  const CcpProfile prof = solve_equilibrium(p, d);
  const PseudoLikelihood L(d, prof);
  const Vector theta = p.pack();
  const Matrix S = L.scores(theta);
  const Vector g = L.evaluate(theta).gradient;
  CHECK((S.colwise().mean().transpose() - g).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("probit matches an independent IRLS fit") {
  const ModelParams p = fixture::params(0.0, 1.0, 0.0, 0.0);
  const Dataset d = fixture::simulated(800, p, 13);
  const ProbitFit fit = fit_probit(d.Z, d.D);
  const Vector ref = oracle::probit_irls(d.Z, d.D);
  CHECK((fit.beta - ref).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((fit.std_errors.array() > 0).all());
}

TEST_CASE("pseudo-MLE at the true profile lands near the truth") {
  const ModelParams p = fixture::params(1.0, 1.0, 1.0, 0.5);
  const Dataset d = fixture::simulated(3000, p, 14);
  const CcpProfile prof = solve_equilibrium(p, d);
  const MleResult r = maximize_pseudo_likelihood(d, prof, p);
  CHECK(r.converged);
  const Vector gap = r.params.pack() - p.pack();
  CHECK(gap.cwiseAbs().maxCoeff() < 0.5);
  CHECK(r.gradient_norm < 1e-6);
}

TEST_CASE("rank check rejects a constant peer column") {
  const ModelParams p = fixture::params(1.0, 1.0, 1.0, 0.5);
  Dataset d = fixture::simulated(100, p, 15);
  d.net = DirectedNetwork(100, std::vector<std::vector<std::size_t>>(100));
  const CcpProfile prof = solve_equilibrium(p, d);
  CHECK_THROWS_AS(check_rank(d, prof), ValidationError);
  CHECK_NOTHROW(check_rank(d, prof, false, false));
}

}
