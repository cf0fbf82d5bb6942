#include <cmath>

#include "doctest.h"
#include "peertreat/equilibrium.hpp"
#include "peertreat/errors.hpp"
#include "peertreat/network.hpp"
#include "support/fixtures.hpp"

using namespace peertreat;

TEST_SUITE("equilibrium") {

TEST_CASE("three-node equilibria match brute-force iteration") {
  for (double rho : {-0.6, 0.0, 0.5}) {
    const ModelParams p = fixture::params(1.2, 0.8, 0.7, rho);
    const Dataset d = fixture::three_node();
    const CcpProfile prof = solve_equilibrium(p, d, {1e-13, 10000, 1.0});
    const auto g = fixture::small_game(p, d);
    const auto pT = g.solve_treatment();
    const auto pO = g.solve_outcome(fixture::as_int(d.D), g.treatment_index(pT));
    for (Index i = 0; i < 3; ++i) {
      CHECK(prof.p_T[i] == doctest::Approx(pT[static_cast<std::size_t>(i)]).epsilon(1e-11));
      CHECK(prof.p_O[i] == doctest::Approx(pO[static_cast<std::size_t>(i)]).epsilon(1e-9));
    }
  }
}

TEST_CASE("rho = 0 outcome response is the single-index probit exactly") {
  const ModelParams p = fixture::params(1.0, 1.0, 0.5, 0.0);
  const Dataset d = fixture::simulated(200, p, 4);
  const Vector v = local_average(d.net, Vector::Constant(200, 0.5));
  const OutcomeGame g(p, d.X, d.Z, d.D, v, d.net);
  for (std::size_t i = 0; i < 200; ++i) {
    for (int dd : {0, 1}) {
      CHECK(g.response(i, 0.3, dd) == std_normal_cdf(g.outcome_index(i, 0.3, dd)));
    }
  }
}

TEST_CASE("equilibrium does not depend on the starting profile") {
  const ModelParams p = fixture::params(1.0, 1.0, 1.0, 0.5);
  const Dataset d = fixture::simulated(400, p, 8);
  const TreatmentGame tg(p, d.Z, d.net);
  const auto a = tg.solve(Vector::Zero(400), {1e-12});
  const auto b = tg.solve(Vector::Ones(400), {1e-12});
  const auto c = tg.solve(tg.no_peer_profile(), {1e-12});
  REQUIRE((a.converged && b.converged && c.converged));
  CHECK((a.profile - b.profile).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((a.profile - c.profile).cwiseAbs().maxCoeff() < 1e-10);

  const Vector v = local_average(d.net, c.profile);
  const OutcomeGame og(p, d.X, d.Z, d.D, v, d.net);
  const auto x = og.solve(Vector::Zero(400), {1e-12});
  const auto y = og.solve(Vector::Ones(400), {1e-12});
  REQUIRE((x.converged && y.converged));
  CHECK((x.profile - y.profile).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("fixed point is a fixed point of one sweep") {
  const ModelParams p = fixture::params(1.5, 1.0, -0.8, -0.5);
  const Dataset d = fixture::simulated(300, p, 12);
  const CcpProfile prof = solve_equilibrium(p, d, {1e-13});
  CHECK((treatment_best_response(p, d.Z, d.net, prof.p_T) - prof.p_T).cwiseAbs().maxCoeff() < 1e-12);
  const Vector v = local_average(d.net, prof.p_T);
  CHECK((outcome_best_response(p, d.X, d.Z, d.D, v, d.net, prof.p_O) - prof.p_O).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gaps shrink at least at the Lipschitz rate") {
  const ModelParams p = fixture::params(2.0, 1.0, 1.0, 0.3);
  const Dataset d = fixture::simulated(500, p, 21);
  const TreatmentGame tg(p, d.Z, d.net);
  const auto rep = tg.solve(Vector::Zero(500), {1e-13});
  const double L = p.alpha * kInvSqrt2Pi;
  for (std::size_t k = 1; k + 1 < rep.gaps.size(); ++k) {
    if (rep.gaps[k] < 1e-13) break;
    CHECK(rep.gaps[k + 1] <= L * rep.gaps[k] * (1 + 1e-9) + 1e-16);
  }
}

TEST_CASE("local re-solve after a flip equals a full solve") {
  const ModelParams p = fixture::params(1.0, 1.0, 1.0, 0.5);
  const Dataset d = fixture::simulated(300, p, 31);
  const CcpProfile prof = solve_equilibrium(p, d, {1e-12});
  const Vector v = local_average(d.net, prof.p_T);
  const OutcomeGame g(p, d.X, d.Z, d.D, v, d.net);
  for (std::size_t i : {0u, 17u, 150u}) {
    const int flipped = 1 - d.D[i];
    const auto local = g.solve_with_flip(i, flipped, prof.p_O, {1e-12});
    OutcomeGame h = g;
    h.set_treatment(i, flipped);
    const auto full = h.solve(h.no_peer_profile(), {1e-12});
    CHECK((local.profile - full.profile).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("contraction diagnostics") {
  const ModelParams p = fixture::params(1.0, 1.0, 1.0, 0.5);
  const Dataset d = fixture::simulated(300, p, 5);
  const CcpProfile prof = solve_equilibrium(p, d);
  const auto rep = contraction_diagnostics(p, d.X, d.Z, d.D, d.net, prof);
  CHECK(rep.alpha_margin == doctest::Approx(std::sqrt(2 * M_PI) - 1.0));
  CHECK(rep.sup_psi > 0.0);
  CHECK(rep.degree_ok);
  CHECK(rep.satisfied == (rep.alpha_margin > 0 && rep.delta_margin > 0));
  const ModelParams bad = fixture::params(3.0, 1.0, 1.0, 0.5);
  CHECK_FALSE(contraction_diagnostics(bad, d.X, d.Z, d.D, d.net, prof).satisfied);
}

TEST_CASE("dimension mismatch is a validation error") {
  ModelParams p = fixture::params(1.0, 1.0, 1.0, 0.5);
  const Dataset d = fixture::three_node();
  p.beta_O = Vector::Ones(3);
  CHECK_THROWS_AS(solve_equilibrium(p, d), ValidationError);
}

}
