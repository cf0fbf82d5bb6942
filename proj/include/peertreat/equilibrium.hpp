#pragma once

#include <cstddef>
#include <vector>

#include "peertreat/model.hpp"

namespace peertreat {

struct SolverOptions {
  double tol = 1e-10;           // sup-norm of the last update
  std::size_t max_iter = 10000;
  double damping = 1.0;         // 1 = plain successive substitution
};

struct FixedPointReport {
  bool converged = false;
  std::size_t iterations = 0;
  double final_gap = 0.0;
  Vector profile;
  std::vector<double> gaps;  // sup-norm update per iteration
};

// Probabilities are kept inside the open unit interval.
inline constexpr double kProbFloor = 1e-300;
inline constexpr double kProbCeil = 1.0 - 0x1.0p-53;

// Treatment game: Psi_Ti(P) = Phi(Z_i'beta_T + alpha V_i(P)).
class TreatmentGame {
 public:
  TreatmentGame(const ModelParams& params, const Matrix& Z, const DirectedNetwork& net,
                const Vector* index_shift = nullptr);

  std::size_t size() const { return net_->size(); }
  double response(std::size_t i, double v) const;
  void sweep(const Vector& p, Vector& out) const;
  const Vector& base_index() const { return zb_; }
  double alpha() const { return alpha_; }
  /// Phi(Z'beta_T), the alpha = 0 evaluation.
  Vector no_peer_profile() const;

  FixedPointReport solve(const Vector& init, const SolverOptions& opts = {}) const;

 private:
  const DirectedNetwork* net_;
  Vector zb_;
  double alpha_;
};

// Outcome game for a fixed realized treatment vector and a fixed treatment
// belief term V*. Each response conditions on the individual's own D_i.
class OutcomeGame {
 public:
  OutcomeGame(const ModelParams& params, const Matrix& X, const Matrix& Z, const BinaryVector& D,
              const Vector& v_star, const DirectedNetwork& net, const Vector* index_shift = nullptr);

  std::size_t size() const { return net_->size(); }

  /// Psi_Oi at belief w with own treatment d.
  double response(std::size_t i, double w, int d) const;
  /// Same map as a function of the full outcome index a = X'beta_O + gamma d + delta w.
  double response_at_index(std::size_t i, double a, int d) const;
  double outcome_index(std::size_t i, double w, int d) const { return xb_[static_cast<Index>(i)] + gamma_ * d + delta_ * w; }
  double treatment_index(std::size_t i) const { return t_[static_cast<Index>(i)]; }
  double treatment_ccp(std::size_t i) const { return pt_[static_cast<Index>(i)]; }

  void sweep(const Vector& p, Vector& out) const;
  /// delta = 0 evaluation, i.e. no outcome peer term.
  Vector no_peer_profile() const;

  const BinaryVector& treatments() const { return d_; }
  void set_treatment(std::size_t i, int d);

  FixedPointReport solve(const Vector& init, const SolverOptions& opts = {}) const;

  /// Re-solves after changing the treatment of individual i to `d`, starting
  /// from `base` (an equilibrium for the current treatments). Only individuals
  /// whose beliefs moved by more than opts.tol are recomputed in the
  /// next sweep, so the cost follows the reach of the perturbation. The game's
  /// own treatment vector is left unchanged.
  FixedPointReport solve_with_flip(std::size_t i, int d, const Vector& base, const SolverOptions& opts = {}) const;

 private:
  void check_denominator(std::size_t i, int d) const;

  const DirectedNetwork* net_;
  BinaryVector d_;
  Vector xb_;
  Vector t_;
  Vector pt_;   // Phi(t)
  Vector qt_;   // Phi(-t) = 1 - Phi(t)
  double gamma_;
  double delta_;
  double rho_;
};

Vector treatment_best_response(const ModelParams& params, const Matrix& Z, const DirectedNetwork& net,
                               const Vector& p_T);

FixedPointReport solve_treatment_equilibrium(const ModelParams& params, const Matrix& Z,
                                             const DirectedNetwork& net, const Vector& init,
                                             const SolverOptions& opts = {});

Vector outcome_best_response(const ModelParams& params, const Matrix& X, const Matrix& Z, const BinaryVector& D,
                             const Vector& v_star, const DirectedNetwork& net, const Vector& p_O);

FixedPointReport solve_outcome_equilibrium(const ModelParams& params, const Matrix& X, const Matrix& Z,
                                           const BinaryVector& D, const Vector& v_star,
                                           const DirectedNetwork& net, const Vector& init,
                                           const SolverOptions& opts = {});

/// Solves the treatment game from the no-peer start, then the outcome game at
/// V* = local_average(P_T*). Throws ConvergenceError if either fails.
CcpProfile solve_equilibrium(const ModelParams& params, const Dataset& data, const SolverOptions& opts = {});

struct ContractionReport {
  double alpha_margin = 0.0;     // sqrt(2 pi) - alpha
  double sup_psi = 0.0;          // max_i |dPsi_Oi / d index|, delta factored out
  double delta_margin = 0.0;     // 1 / sup_psi - |delta|
  double sup_psi_w = 0.0;        // max_i |dPsi_Oi / dW_i|, delta included
  double delta_margin_w = 0.0;   // 1 - sup_psi_w
  bool degree_ok = false;        // 0 < max N_i <= bound
  bool satisfied = false;        // alpha >= 0 and both primary margins positive
};

ContractionReport contraction_diagnostics(const ModelParams& params, const Matrix& X, const Matrix& Z,
                                          const BinaryVector& D, const DirectedNetwork& net,
                                          const CcpProfile& profile);

}  // namespace peertreat
