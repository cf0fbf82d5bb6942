#pragma once

// Probit by iteratively reweighted least squares, written against Eigen and
// std::erfc only. Used as the reference for the library's Newton-Raphson fit.

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "oracles.hpp"

namespace oracle {

inline Eigen::VectorXd probit_irls(const Eigen::MatrixXd& X, const std::vector<std::uint8_t>& y,
                                   int iters = 200) {
  const Eigen::Index n = X.rows();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(X.cols());
  for (int it = 0; it < iters; ++it) {
    const Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd w(n), z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mu = std::clamp(phi_erfc(eta[i]), 1e-15, 1.0 - 1e-15);
      const double d = normal_density(eta[i]);
      w[i] = d * d / (mu * (1.0 - mu));
      z[i] = eta[i] + (static_cast<double>(y[static_cast<std::size_t>(i)]) - mu) / std::max(d, 1e-300);
    }
    const Eigen::MatrixXd XtW = X.transpose() * w.asDiagonal();
    const Eigen::VectorXd next = (XtW * X).ldlt().solve(XtW * z);
    const double step = (next - beta).cwiseAbs().maxCoeff();
    beta = next;
    if (step < 1e-13) break;
  }
  return beta;
}

}  // namespace oracle
