#include "peertreat/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace peertreat {

using Eigen::MatrixXd;
using Eigen::VectorXd;

BfgsResult minimize_bfgs(const Objective& f, VectorXd x0, const BfgsOptions& opts,
                         const MatrixXd* inverse_hessian0) {
  const Eigen::Index p = x0.size();
  BfgsResult res;
  res.x = std::move(x0);
  res.grad.resize(p);
  res.f = f(res.x, &res.grad);
  res.evaluations = 1;
  if (!std::isfinite(res.f) || !res.grad.allFinite()) {
    res.message = "objective not finite at the starting point";
    return res;
  }

  MatrixXd H = MatrixXd::Identity(p, p);
  bool scaled = false;
  if (inverse_hessian0 && inverse_hessian0->rows() == p && inverse_hessian0->allFinite()) {
    H = *inverse_hessian0;
    scaled = true;
  }

  VectorXd x_new(p), g_new(p), dir(p), s(p), y(p);
  bool reset_once = false;
  while (res.iterations < opts.max_iter) {
    if (res.grad.cwiseAbs().maxCoeff() <= opts.grad_tol) {
      res.converged = true;
      res.message = "gradient tolerance reached";
      break;
    }
    dir = -H * res.grad;
    double slope = res.grad.dot(dir);
    if (!(slope < 0.0)) {
      H.setIdentity();
      scaled = false;
      dir = -res.grad;
      slope = -res.grad.squaredNorm();
    }

    // Backtracking with safeguarded quadratic interpolation.
    double step = 1.0;
    double f_new = 0.0;
    bool accepted = false;
    while (res.evaluations < opts.max_evals) {
      x_new = res.x + step * dir;
      f_new = f(x_new, &g_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && g_new.allFinite() && f_new <= res.f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      double next = 0.5 * step;
      if (std::isfinite(f_new)) {
        const double denom = 2.0 * (f_new - res.f - step * slope);
        if (denom > 0.0) next = std::clamp(-slope * step * step / denom, 0.1 * step, 0.5 * step);
      }
      step = next;
      if (step < 1e-20) break;
    }
    if (!accepted) {
      if (!reset_once) {
        // Stale curvature information; retry once along steepest descent.
        reset_once = true;
        H.setIdentity();
        scaled = false;
        continue;
      }
      res.message = "line search failed";
      break;
    }
    reset_once = false;

    s = x_new - res.x;
    y = g_new - res.grad;
    const double f_old = res.f;
    res.x.swap(x_new);
    res.grad.swap(g_new);
    res.f = f_new;
    ++res.iterations;

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        H *= sy / y.squaredNorm();
        scaled = true;
      }
      const double r = 1.0 / sy;
      const VectorXd Hy = H * y;
      // H+ = (I - r s y') H (I - r y s') + r s s'
      H += (r * r * y.dot(Hy) + r) * (s * s.transpose()) - r * (Hy * s.transpose() + s * Hy.transpose());
    }

    if (std::abs(f_old - res.f) <= opts.rel_tol * std::max(1.0, std::abs(res.f))) {
      res.converged = true;
      res.message = "relative objective change below tolerance";
      break;
    }
  }
  if (!res.converged && res.message.empty()) res.message = "iteration limit reached";
  res.inverse_hessian = std::move(H);
  return res;
}

}  // namespace peertreat
