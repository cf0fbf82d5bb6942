#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "peertreat/equilibrium.hpp"
#include "peertreat/estimator.hpp"
#include "peertreat/model.hpp"

namespace peertreat {

/// beta_T = (-1, 1, 1), beta_O = (-1, 1), alpha = gamma = delta = 1.
ModelParams reference_design_params(double rho);

struct SimulatedChoices {
  BinaryVector D;
  BinaryVector Y;
  CcpProfile profile;  // P_T* and the outcome equilibrium at the realized D
};

/// Draws (u_i, v_i), solves the treatment game, realizes D, solves the outcome
/// game at that D and realizes Y. Covariates and network are taken as given.
SimulatedChoices simulate_choices(const ModelParams& params, const Matrix& X, const Matrix& Z,
                                  const DirectedNetwork& net, RandomStream& rng, const SolverOptions& opts = {});

/// Random network, X1 ~ N(1, 1), X2 ~ N(0, 1), Z = (1, X1, X2), X = (1, X1),
/// then simulate_choices. `truth`, when given, receives the equilibrium profile.
Dataset simulate_dataset(std::size_t n, const ModelParams& params, std::size_t max_degree, RandomStream& rng,
                         CcpProfile* truth = nullptr);

struct McDesign {
  std::vector<std::size_t> n_list{250, 500, 1000};
  std::size_t replications = 200;
  ModelParams true_params = reference_design_params(0.5);
  std::size_t max_degree = 10;
  std::uint64_t seed = 20240601;
  EstimatorConfig estimator{};
  std::size_t workers = 0;  // 0 = PEERTREAT_WORKERS or 1
  bool compute_apte = true;
};

struct ReplicationRecord {
  std::size_t n = 0;
  std::size_t replication = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  Vector theta_hat;
  double apte_true = 0.0;
  double apte_est = 0.0;
  double ccp_error = 0.0;  // sup |P_hat - P*(theta_0)| over both games
  std::size_t outer_iterations = 0;
  bool rho_at_boundary = false;
};

struct McCell {
  std::size_t n = 0;
  std::size_t succeeded = 0;
  std::size_t failed = 0;
  Vector avg_bias;
  Vector mse;
  double apte_true = 0.0;      // mean over replications
  double apte_est = 0.0;
  double apte_mse = 0.0;       // mean of (est - true)^2
  double apte_gap = 0.0;       // mean of (est - true)
  double mean_ccp_error = 0.0;
  std::size_t rho_at_boundary = 0;  // successful replications with |rho_hat| at the cap
};

struct McResult {
  std::vector<std::string> names;  // packed parameter names
  Vector truth;
  std::vector<McCell> cells;
  std::vector<ReplicationRecord> records;  // ordered by (n, replication)
  double wall_seconds = 0.0;
};

/// Runs every (n, replication) pair. Replication r at sample size n uses the
/// stream derive_seed(seed, n * 1'000'003 + r), so results do not depend on
/// scheduling. Throws ConvergenceError when more than 5% of a cell fails.
McResult monte_carlo_study(const McDesign& design);

/// Worker count from PEERTREAT_WORKERS, at least 1.
std::size_t default_worker_count();

}  // namespace peertreat
