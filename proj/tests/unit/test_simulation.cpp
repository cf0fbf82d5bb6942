#include <cmath>

#include "doctest.h"
#include "peertreat/errors.hpp"
#include "peertreat/simulation.hpp"
#include "support/fixtures.hpp"

using namespace peertreat;

TEST_SUITE("simulation") {

TEST_CASE("reference design") {
  const ModelParams p = reference_design_params(-0.5);
  CHECK(p.pack().size() == 9);
  CHECK(static_cast<double>(p.rho) == -0.5);
  CHECK(p.alpha == 1.0);
  CHECK(p.beta_T[0] == -1.0);
}

TEST_CASE("simulated datasets are reproducible and follow the design") {
  const ModelParams p = reference_design_params(0.5);
  RandomStream a(77), b(77);
  CcpProfile truth;
  const Dataset d = simulate_dataset(2000, p, 10, a, &truth);
  const Dataset e = simulate_dataset(2000, p, 10, b);
  CHECK(d.D == e.D);
  CHECK(d.Y == e.Y);
  CHECK(d.X == e.X);
  CHECK(d.net == e.net);
  CHECK((d.X.col(1) - d.Z.col(1)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.Z.col(1).mean() == doctest::Approx(1.0).epsilon(0.1));
  CHECK(std::abs(d.Z.col(2).mean()) < 0.1);
  CHECK(d.net.max_degree() <= 10);
  // Realized treatment share tracks the equilibrium CCPs.
  double share = 0;
  for (auto x : d.D) share += x;
  CHECK(share / 2000 == doctest::Approx(truth.p_T.mean()).epsilon(0.05));
}

TEST_CASE("small Monte Carlo study runs and is deterministic") {
  McDesign design;
  design.n_list = {150};
  design.replications = 4;
  design.compute_apte = false;
  design.estimator.se_method = SeMethod::None;
  design.seed = 1;
  const McResult a = monte_carlo_study(design);
  const McResult b = monte_carlo_study(design);
  REQUIRE(a.cells.size() == 1);
  CHECK(a.cells[0].succeeded + a.cells[0].failed == 4);
  CHECK(a.records.size() == 4);
  CHECK(a.names.size() == 9);
  CHECK((a.cells[0].avg_bias - b.cells[0].avg_bias).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.cells[0].mse.array() >= a.cells[0].avg_bias.array().square() - 1e-15).all());
  CHECK(a.records[2].seed == RandomStream::derive_seed(1, 150ULL * 1000003ULL + 2));
}

TEST_CASE("worker count does not change results") {
  McDesign design;
  design.n_list = {120};
  design.replications = 3;
  design.compute_apte = true;
  design.estimator.se_method = SeMethod::None;
  design.workers = 1;
  const McResult a = monte_carlo_study(design);
  design.workers = 3;
  const McResult b = monte_carlo_study(design);
  CHECK((a.cells[0].avg_bias - b.cells[0].avg_bias).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.cells[0].apte_est == b.cells[0].apte_est);
}

}
