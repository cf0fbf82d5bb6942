#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include <Eigen/Dense>

namespace peertreat {

// Objective returning f(x) and, when grad != nullptr, writing its gradient.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct BfgsOptions {
  double grad_tol = 1e-8;   // sup-norm of the gradient
  double rel_tol = 1e-12;   // relative change of the objective between iterations
  std::size_t max_iter = 1000;
  std::size_t max_evals = 20000;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd inverse_hessian;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  std::string message;
};

/// Quasi-Newton minimization with BFGS inverse-Hessian updates and a
/// backtracking Armijo line search. `inverse_hessian0`, when given, seeds the
/// approximation (warm starts across related problems).
BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& opts = {},
                         const Eigen::MatrixXd* inverse_hessian0 = nullptr);

}  // namespace peertreat
