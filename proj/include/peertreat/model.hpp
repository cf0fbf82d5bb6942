#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "peertreat/network.hpp"
#include "peertreat/numerics.hpp"

namespace peertreat {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using BinaryVector = std::vector<std::uint8_t>;

// Parameters of the two-equation model
//   Y_i = 1{X_i'beta_O + gamma D_i + delta W_i + u_i > 0}
//   D_i = 1{Z_i'beta_T + alpha V_i + v_i > 0},  corr(u_i, v_i) = rho.
//
// Packed layout used by the optimizer and every covariance matrix:
//   [beta_T (k_T), alpha, beta_O (k_O), gamma, delta, rho].
struct ModelParams {
  Vector beta_T;
  double alpha = 0.0;
  Vector beta_O;
  double gamma = 0.0;
  double delta = 0.0;
  Correlation rho{0.0};

  Index k_T() const { return beta_T.size(); }
  Index k_O() const { return beta_O.size(); }
  Index dimension() const { return k_T() + k_O() + 4; }

  Index alpha_index() const { return k_T(); }
  Index beta_O_offset() const { return k_T() + 1; }
  Index gamma_index() const { return k_T() + 1 + k_O(); }
  Index delta_index() const { return gamma_index() + 1; }
  Index rho_index() const { return gamma_index() + 2; }

  Vector pack() const;
  static ModelParams unpack(const Vector& theta, Index k_T, Index k_O);

  /// beta_T0.., alpha, beta_O0.., gamma, delta, rho (packed order).
  std::vector<std::string> names() const;

  void validate() const;
};

// Equilibrium conditional choice probabilities of both games.
struct CcpProfile {
  Vector p_T;
  Vector p_O;
};

// Observed sample. X and Z carry an intercept in column 0.
struct Dataset {
  Matrix X;  // n x k_O, outcome covariates
  Matrix Z;  // n x k_T, treatment covariates
  BinaryVector D;
  BinaryVector Y;
  DirectedNetwork net;

  std::size_t size() const { return D.size(); }

  /// Row counts, binary entries, intercept columns, network size.
  void validate() const;
};

/// Throws ValidationError unless params match the design dimensions.
void check_dimensions(const ModelParams& params, const Dataset& data);

}  // namespace peertreat
