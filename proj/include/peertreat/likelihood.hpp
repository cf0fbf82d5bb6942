#pragma once

#include <cstddef>
#include <vector>

#include "peertreat/model.hpp"
#include "peertreat/optimizer.hpp"

namespace peertreat {

// Joint probabilities of (Y, D) for one observation; p_yd.
struct CellProbabilities {
  double p11 = 0.0;
  double p10 = 0.0;
  double p01 = 0.0;
  double p00 = 0.0;
};

/// Bivariate probit cells. `outcome_index` excludes the treatment term
/// (X'beta_O + delta W); the D = 1 cells add gamma. `treatment_index` is
/// Z'beta_T + alpha V.
CellProbabilities cell_probabilities(const ModelParams& params, double outcome_index, double treatment_index);

inline constexpr double kIndexClamp = 37.0;
inline constexpr double kCellFloor = 1e-300;
// atanh of the largest |rho| the optimizer may reach, 1 - 2e-10. A bivariate
// probit likelihood can increase all the way to |rho| = 1 in small samples.
inline constexpr double kAtanhRhoMax = 11.5;
inline constexpr double kRhoBoundary = 0.99999;

// Pseudo log-likelihood L_n(theta; P) = (1/n) sum_i log P(Y_i = y_i, D_i = d_i)
// with the belief terms V(P_T), W(P_O) frozen at a supplied profile. Holding
// the profile fixed turns the model into a bivariate probit on the augmented
// designs [Z, V] and [X, D, W].
class PseudoLikelihood {
 public:
  PseudoLikelihood(const Dataset& data, const CcpProfile& profile);

  std::size_t size() const { return y_.size(); }
  Index dimension() const { return z_aug_.cols() + x_aug_.cols() + 1; }

  struct Evaluation {
    double value = 0.0;
    Vector gradient;  // w.r.t. the packed natural parameters (rho, not atanh rho)
    std::size_t clamp_events = 0;
  };

  Evaluation evaluate(const Vector& theta, bool with_gradient = true) const;

  /// log-likelihood and score of one observation, with its belief terms
  /// replaced by (v, w). Used for finite differences in the profile.
  double observation(std::size_t i, const Vector& theta, double v, double w, Vector* score) const;

  /// n x p matrix of per-observation scores at theta.
  Matrix scores(const Vector& theta) const;

  const Vector& V() const { return v_; }
  const Vector& W() const { return w_; }
  const Matrix& treatment_design() const { return z_aug_; }  // [Z, V]
  const Matrix& outcome_design() const { return x_aug_; }    // [X, D, W]
  Index k_T() const { return z_aug_.cols() - 1; }
  Index k_O() const { return x_aug_.cols() - 2; }

 private:
  Matrix z_aug_;
  Matrix x_aug_;
  Vector v_;
  Vector w_;
  BinaryVector y_;
  BinaryVector d_;
};

double pseudo_log_likelihood(const ModelParams& params, const CcpProfile& profile, const Dataset& data);

Vector pseudo_likelihood_gradient(const ModelParams& params, const CcpProfile& profile, const Dataset& data);

struct MleOptions {
  BfgsOptions bfgs{};
  std::vector<Index> fixed;  // packed indices held at their start values
};

struct MleResult {
  ModelParams params;
  double value = 0.0;
  double gradient_norm = 0.0;  // sup-norm over free natural parameters
  std::size_t iterations = 0;
  std::size_t clamp_events = 0;
  bool converged = false;
  std::string message;
  Matrix inverse_hessian;  // optimizer state in the atanh(rho) parametrization
};

/// Throws ValidationError when [Z, V] or [X, D, W] lacks full column rank.
/// Columns of fixed peer coefficients are left out of the check.
void check_rank(const Dataset& data, const CcpProfile& profile, bool alpha_free = true, bool delta_free = true);

/// Maximizes L_n over theta with the profile held fixed. rho is optimized
/// as atanh(rho). Throws ConvergenceError if the optimizer fails.
MleResult maximize_pseudo_likelihood(const Dataset& data, const CcpProfile& profile, const ModelParams& start,
                                     const MleOptions& opts = {}, const Matrix* warm_inverse_hessian = nullptr);

// Plain probit fit by Newton-Raphson, used for starting values and the
// exogeneity pretest.
struct ProbitFit {
  Vector beta;
  Vector std_errors;
  double log_likelihood = 0.0;
  std::size_t iterations = 0;
};

ProbitFit fit_probit(const Matrix& design, const BinaryVector& y, double tol = 1e-10, std::size_t max_iter = 100);

}  // namespace peertreat
