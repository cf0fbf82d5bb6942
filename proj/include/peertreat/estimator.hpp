#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "peertreat/equilibrium.hpp"
#include "peertreat/likelihood.hpp"
#include "peertreat/model.hpp"

namespace peertreat {

enum class InnerMode { Sweep, FullSolve };
enum class SeMethod { Sandwich, Bootstrap, None };

struct EstimatorConfig {
  double outer_tol = 1e-8;
  std::size_t max_outer = 500;
  InnerMode inner_mode = InnerMode::Sweep;
  SeMethod se_method = SeMethod::Sandwich;
  std::size_t bootstrap_reps = 199;
  std::uint64_t seed = 0;
  // Restrictions; a set value holds the coefficient fixed throughout.
  std::optional<double> fixed_alpha;
  std::optional<double> fixed_delta;
  std::optional<double> fixed_rho;
  SolverOptions solver{};
  BfgsOptions bfgs{};

  void validate() const;
};

struct TraceEntry {
  std::size_t iteration = 0;
  double gap = 0.0;       // sup-norm change of the CCP profile
  double loglik = 0.0;    // pseudo-likelihood at the profile used for this step
};

struct EstimationDiagnostics {
  ContractionReport contraction{};
  std::size_t clamp_events = 0;
  bool rank_ok = false;
  bool rho_at_boundary = false;  // |rho_hat| reached the optimizer's cap
  std::string se_note;  // which SE method produced std_errors, or why none did
  std::vector<std::string> warnings;
};

struct EstimationResult {
  ModelParams theta_hat;
  Vector std_errors;  // packed order; zero for fixed coefficients, NaN when not computed
  CcpProfile profile_hat;
  std::size_t outer_iterations = 0;
  bool converged = false;
  double loglik = 0.0;
  std::vector<TraceEntry> trace;
  EstimationDiagnostics diagnostics;
  std::vector<Index> fixed;  // packed indices held fixed
};

/// Nested pseudo joint likelihood. Step 0 takes the CCPs from exogenous
/// probits of D on Z and Y on [X, D]. Each outer step maximizes the
/// pseudo-likelihood at P^(K), then sets P^(K+1) = Psi(theta^(K+1); P^(K)):
/// one best-response sweep of both games (InnerMode::Sweep) or a full solve
/// of each game (InnerMode::FullSolve). A result that did not converge is
/// returned with converged = false, its trace, and no standard errors.
EstimationResult npjl_estimate(const Dataset& data, const EstimatorConfig& config = {});

/// Sandwich standard errors with the equilibrium feedback correction
///   Omega_1 = H + (d2L/dtheta dP') (I - dPsi/dP')^{-1} dPsi/dtheta',
///   Omega_2 = mean of s_i s_i',  SE = sqrt(diag(Omega_1^-1 Omega_2 Omega_1^-T) / n).
/// Throws NumericalError if Omega_1 is singular or the feedback series diverges.
Vector sandwich_standard_errors(const EstimationResult& result, const Dataset& data);

/// Parametric bootstrap at theta_hat: redraws (D, Y) from the model with the
/// observed covariates and network and re-estimates.
Vector bootstrap_standard_errors(const EstimationResult& result, const Dataset& data, const EstimatorConfig& config);

struct ProfileInterval {
  double lo = 0.0;
  double hi = 0.0;
  double rho_hat = 0.0;
  double cutoff = 0.0;     // chi-square(1) quantile at `level`
  bool lo_open = false;    // search reached the boundary; interval is one-sided below
  bool hi_open = false;
};

/// Inverts 2n (L(theta_hat) - max_{rho fixed} L) <= cutoff with the CCP profile
/// held at P_hat. Grid steps of 0.05 outward from rho_hat, then bisection.
ProfileInterval profile_ci_rho(const EstimationResult& result, const Dataset& data, double level = 0.95);

struct ResidualTestReport {
  double residual_coef = 0.0;
  double std_error = 0.0;
  double t_stat = 0.0;
  Vector treatment_coef;   // [beta_T, alpha]
  Vector outcome_coef;     // [beta_O, gamma, delta, lambda] (delta absent if excluded)
  Vector residual;         // generalized residual lambda_i
};

/// Exogeneity pretest. The treatment probit on [Z, V] is iterated to its own
/// single-game fixed point; the generalized residual of that fit enters an
/// outcome probit on [X, D, W, lambda], whose peer term is likewise iterated
/// to its fixed point under the null. `outcome_peer = false` drops W.
ResidualTestReport generalized_residual_test(const Dataset& data, bool outcome_peer = true);

}  // namespace peertreat
