#include <cmath>

#include "doctest.h"
#include "peertreat/effects.hpp"
#include "peertreat/errors.hpp"
#include "support/fixtures.hpp"

using namespace peertreat;

TEST_SUITE("effects") {

TEST_CASE("no treatment effect, no peers, no correlation: PTE is zero") {
  const ModelParams p = fixture::params(1.0, 0.0, 0.0, 0.0);
  const Dataset d = fixture::simulated(200, p, 50);
  const CcpProfile prof = solve_equilibrium(p, d);
  const Vector pte = partial_treatment_effects(p, d, prof);
  CHECK(pte.cwiseAbs().maxCoeff() == 0.0);
  CHECK(average_partial_treatment_effect(p, d, prof) == 0.0);
}

TEST_CASE("delta = 0, rho = 0: PTE has a closed form and is positive") {
  const ModelParams p = fixture::params(1.0, 0.7, 0.0, 0.0);
  const Dataset d = fixture::simulated(200, p, 51);
  const CcpProfile prof = solve_equilibrium(p, d);
  const Vector pte = partial_treatment_effects(p, d, prof);
  for (Index i = 0; i < 200; ++i) {
    const double xb = d.X.row(i).dot(p.beta_O);
    CHECK(pte[i] == doctest::Approx(oracle::phi_erfc(xb + 0.7) - oracle::phi_erfc(xb)).epsilon(1e-13));
    CHECK(pte[i] > 0.0);
  }
}

TEST_CASE("three-node PTE matches brute force") {
  for (double rho : {-0.5, 0.4}) {
    const ModelParams p = fixture::params(1.1, 0.9, 0.8, rho);
    const Dataset d = fixture::three_node();
    const CcpProfile prof = solve_equilibrium(p, d, {1e-13});
    const auto g = fixture::small_game(p, d);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(partial_treatment_effect(i, p, d, prof, {1e-13}) ==
            doctest::Approx(g.pte(i, fixture::as_int(d.D))).epsilon(1e-8));
    }
  }
}

TEST_CASE("APTE is the mean of the PTEs and each PTE lies in [-1, 1]") {
  const ModelParams p = fixture::params(1.0, 1.0, 1.0, 0.5);
  const Dataset d = fixture::simulated(300, p, 52);
  const CcpProfile prof = solve_equilibrium(p, d);
  const Vector pte = partial_treatment_effects(p, d, prof);
  CHECK(average_partial_treatment_effect(p, d, prof) == doctest::Approx(pte.mean()).epsilon(1e-14));
  CHECK(pte.cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("CTE with zero shift and delta = 0 is close to the PTE") {
  const ModelParams p = fixture::params(1.0, 1.0, 0.0, 0.5);
  const Dataset d = fixture::simulated(100, p, 53);
  const CcpProfile prof = solve_equilibrium(p, d);
  RandomStream rng(1);
  const Vector zero = Vector::Zero(100);
  for (std::size_t i : {3u, 40u}) {
    const double cte = composite_treatment_effect(i, p, d, zero, 1000, rng);
    CHECK(cte == doctest::Approx(partial_treatment_effect(i, p, d, prof)).epsilon(1e-10));
  }
}

TEST_CASE("CTE is reproducible for a fixed seed") {
  const ModelParams p = fixture::params(1.0, 1.0, 1.0, 0.5);
  const Dataset d = fixture::simulated(100, p, 54);
  Vector s = Vector::Zero(100);
  s[7] = 0.5;
  RandomStream a(9), b(9);
  CHECK(composite_treatment_effect(7, p, d, s, 1, a) == composite_treatment_effect(7, p, d, s, 1, b));
  RandomStream c(9);
  CHECK_THROWS_AS(composite_treatment_effect(7, p, d, s, 0, c), ValidationError);
}

TEST_CASE("counterfactual invariants") {
  const ModelParams p = fixture::params(1.0, 1.0, 1.0, 0.5);
  const Dataset d = fixture::simulated(300, p, 55);
  const CcpProfile prof = solve_equilibrium(p, d);
  CounterfactualSpec spec;
  spec.selector = TargetSelector::LowestCovariate;
  spec.covariate_column = 2;
  spec.target_count = 30;
  spec.draws = 200;
  spec.seed = 3;

  SUBCASE("zero shift reproduces the baseline draw for draw") {
    spec.index_shift = 0.0;
    const auto r = run_counterfactual(p, d, prof, spec);
    CHECK(r.whole.counterfactual_treated.mean == r.whole.baseline_treated.mean);
    CHECK(r.whole.counterfactual_outcome.mean == r.whole.baseline_outcome.mean);
  }
  SUBCASE("no targets reproduces the baseline") {
    spec.target_count = 0;
    const auto r = run_counterfactual(p, d, prof, spec);
    CHECK(r.targets.empty());
    CHECK(r.whole.counterfactual_treated.mean == r.whole.baseline_treated.mean);
  }
  SUBCASE("identical seeds give identical reports") {
    const auto a = run_counterfactual(p, d, prof, spec);
    const auto b = run_counterfactual(p, d, prof, spec);
    CHECK(a.whole.counterfactual_outcome.mean == b.whole.counterfactual_outcome.mean);
    CHECK(a.target.counterfactual_treated.sd == b.target.counterfactual_treated.sd);
    CHECK(a.composite_ratio_simulated == b.composite_ratio_simulated);
  }
  SUBCASE("treatment counts rise with the shift") {
    double last = -1.0;
    for (double shift : {0.0, 0.25, 0.5, 1.0, 2.0}) {
      spec.index_shift = shift;
      const auto r = run_counterfactual(p, d, prof, spec);
      CHECK(r.whole.counterfactual_treated.mean >= last);
      CHECK(r.whole.counterfactual_treated.mean <= 300.0);
      last = r.whole.counterfactual_treated.mean;
    }
  }
  SUBCASE("targets are the lowest covariate values") {
    const auto t = select_targets(d, spec);
    REQUIRE(t.size() == 30);
    double cut = d.Z(static_cast<Index>(t.back()), 2);
    int below = 0;
    for (Index i = 0; i < 300; ++i) below += d.Z(i, 2) <= cut;
    CHECK(below == 30);
  }
  SUBCASE("invalid explicit targets") {
    spec.selector = TargetSelector::Explicit;
    spec.targets = {1, 1};
    CHECK_THROWS_AS(run_counterfactual(p, d, prof, spec), ValidationError);
    spec.targets = {400};
    CHECK_THROWS_AS(run_counterfactual(p, d, prof, spec), ValidationError);
  }
}

}
