#include "peertreat/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "peertreat/errors.hpp"

namespace peertreat {

namespace {

double clamp_index(double x, std::size_t& events) {
  if (x > kIndexClamp) {
    ++events;
    return kIndexClamp;
  }
  if (x < -kIndexClamp) {
    ++events;
    return -kIndexClamp;
  }
  return x;
}

}  // namespace

CellProbabilities cell_probabilities(const ModelParams& params, double outcome_index, double treatment_index) {
  const double r = params.rho.value();
  const double a1 = outcome_index + params.gamma;
  const double a0 = outcome_index;
  const double t = treatment_index;
  CellProbabilities c;
  // Each cell is evaluated as its own orthant probability, which equals the
  // difference form (e.g. p01 = Phi(t) - p11) without cancellation.
  c.p11 = bivariate_normal_cdf(a1, t, Correlation(r));
  c.p01 = bivariate_normal_cdf(-a1, t, Correlation(-r));
  c.p10 = bivariate_normal_cdf(a0, -t, Correlation(-r));
  c.p00 = bivariate_normal_cdf(-a0, -t, Correlation(r));
  // A cell may underflow to zero in the far tails; the likelihood floors it.
  for (double p : {c.p11, c.p01, c.p10, c.p00}) {
    if (std::isnan(p)) throw NumericalError("cell probability is NaN");
  }
  return c;
}

PseudoLikelihood::PseudoLikelihood(const Dataset& data, const CcpProfile& profile) : y_(data.Y), d_(data.D) {
  const std::size_t n = data.size();
  if (static_cast<std::size_t>(profile.p_T.size()) != n || static_cast<std::size_t>(profile.p_O.size()) != n) {
    throw ValidationError("pseudo-likelihood: profile length does not match the sample");
  }
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    if (!(profile.p_T[i] > 0.0 && profile.p_T[i] < 1.0 && profile.p_O[i] > 0.0 && profile.p_O[i] < 1.0)) {
      throw ValidationError("pseudo-likelihood: profile entry outside (0, 1) at observation " + std::to_string(i));
    }
  }
  v_ = local_average(data.net, profile.p_T);
  w_ = local_average(data.net, profile.p_O);
  const Index kT = data.Z.cols();
  const Index kO = data.X.cols();
  z_aug_.resize(static_cast<Index>(n), kT + 1);
  z_aug_.leftCols(kT) = data.Z;
  z_aug_.col(kT) = v_;
  x_aug_.resize(static_cast<Index>(n), kO + 2);
  x_aug_.leftCols(kO) = data.X;
  for (std::size_t i = 0; i < n; ++i) x_aug_(static_cast<Index>(i), kO) = data.D[i];
  x_aug_.col(kO + 1) = w_;
}

double PseudoLikelihood::observation(std::size_t i, const Vector& theta, double v, double w, Vector* score) const {
  const Index r = static_cast<Index>(i);
  const Index kT = k_T();
  const Index kO = k_O();
  const double rho = theta[theta.size() - 1];
  std::size_t events = 0;
  const double t_raw = z_aug_.row(r).head(kT).dot(theta.head(kT)) + theta[kT] * v;
  const double a_raw = x_aug_.row(r).head(kO + 1).dot(theta.segment(kT + 1, kO + 1)) + theta[kT + kO + 2] * w;
  const double t = clamp_index(t_raw, events);
  const double a = clamp_index(a_raw, events);
  const double qy = y_[i] ? 1.0 : -1.0;
  const double qd = d_[i] ? 1.0 : -1.0;
  const double A = qy * a;
  const double B = qd * t;
  const double s = qy * qd * rho;
  double P = bivariate_normal_cdf(A, B, Correlation(s));
  const bool floored = !(P > kCellFloor);
  if (floored) P = kCellFloor;
  if (score) {
    score->setZero(theta.size());
    if (!floored) {
      const double dA = bivariate_normal_cdf_da(A, B, s) / P;
      const double dB = bivariate_normal_cdf_da(B, A, s) / P;
      const double dS = bivariate_normal_pdf(A, B, s) / P;
      score->head(kT) = (qd * dB) * z_aug_.row(r).head(kT).transpose();
      (*score)[kT] = qd * dB * v;
      score->segment(kT + 1, kO + 1) = (qy * dA) * x_aug_.row(r).head(kO + 1).transpose();
      (*score)[kT + kO + 2] = qy * dA * w;
      (*score)[kT + kO + 3] = qy * qd * dS;
    }
  }
  return std::log(P);
}

PseudoLikelihood::Evaluation PseudoLikelihood::evaluate(const Vector& theta, bool with_gradient) const {
  if (theta.size() != dimension()) throw ValidationError("pseudo-likelihood: parameter length mismatch");
  if (!(std::abs(theta[theta.size() - 1]) < 1.0)) throw ValidationError("pseudo-likelihood: |rho| >= 1");
  const std::size_t n = size();
  const Index kT = k_T();
  const Index kO = k_O();
  const double rho = theta[theta.size() - 1];

  // Vectorized indices; the per-observation path above is kept for
  // finite-difference work where v, w are perturbed one at a time.
  const Vector t_all = z_aug_ * theta.head(kT + 1);
  const Vector a_all = x_aug_ * theta.segment(kT + 1, kO + 2);

  Evaluation ev;
  Vector dt, da;
  if (with_gradient) {
    dt.setZero(static_cast<Index>(n));
    da.setZero(static_cast<Index>(n));
  }
  double drho = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Index r = static_cast<Index>(i);
    const double t = clamp_index(t_all[r], ev.clamp_events);
    const double a = clamp_index(a_all[r], ev.clamp_events);
    const double qy = y_[i] ? 1.0 : -1.0;
    const double qd = d_[i] ? 1.0 : -1.0;
    const double A = qy * a;
    const double B = qd * t;
    const double s = qy * qd * rho;
    double P = bivariate_normal_cdf(A, B, Correlation(s));
    if (!(P > kCellFloor)) {
      if (std::isnan(P)) throw NumericalError("pseudo-likelihood: cell probability is NaN", i);
      P = kCellFloor;
      ++ev.clamp_events;
      total += std::log(P);
      continue;
    }
    total += std::log(P);
    if (with_gradient) {
      da[r] = qy * bivariate_normal_cdf_da(A, B, s) / P;
      dt[r] = qd * bivariate_normal_cdf_da(B, A, s) / P;
      drho += qy * qd * bivariate_normal_pdf(A, B, s) / P;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  ev.value = total * inv_n;
  if (with_gradient) {
    ev.gradient.resize(dimension());
    ev.gradient.head(kT + 1) = z_aug_.transpose() * dt * inv_n;
    ev.gradient.segment(kT + 1, kO + 2) = x_aug_.transpose() * da * inv_n;
    ev.gradient[dimension() - 1] = drho * inv_n;
  }
  return ev;
}

Matrix PseudoLikelihood::scores(const Vector& theta) const {
  Matrix out(static_cast<Index>(size()), dimension());
  Vector s;
  for (std::size_t i = 0; i < size(); ++i) {
    observation(i, theta, v_[static_cast<Index>(i)], w_[static_cast<Index>(i)], &s);
    out.row(static_cast<Index>(i)) = s.transpose();
  }
  return out;
}

double pseudo_log_likelihood(const ModelParams& params, const CcpProfile& profile, const Dataset& data) {
  check_dimensions(params, data);
  return PseudoLikelihood(data, profile).evaluate(params.pack(), false).value;
}

Vector pseudo_likelihood_gradient(const ModelParams& params, const CcpProfile& profile, const Dataset& data) {
  check_dimensions(params, data);
  return PseudoLikelihood(data, profile).evaluate(params.pack(), true).gradient;
}

void check_rank(const Dataset& data, const CcpProfile& profile, bool alpha_free, bool delta_free) {
  const Vector v = local_average(data.net, profile.p_T);
  const Vector w = local_average(data.net, profile.p_O);
  const Index n = static_cast<Index>(data.size());
  const Index kT = data.Z.cols();
  const Index kO = data.X.cols();

  Matrix zt(n, kT + (alpha_free ? 1 : 0));
  zt.leftCols(kT) = data.Z;
  if (alpha_free) zt.col(kT) = v;
  Matrix xt(n, kO + 1 + (delta_free ? 1 : 0));
  xt.leftCols(kO) = data.X;
  for (Index i = 0; i < n; ++i) xt(i, kO) = data.D[static_cast<std::size_t>(i)];
  if (delta_free) xt.col(kO + 1) = w;

  auto full_rank = [](const Matrix& m) {
    Eigen::ColPivHouseholderQR<Matrix> qr(m);
    qr.setThreshold(1e-10);
    return qr.rank() == m.cols();
  };
  if (!full_rank(zt)) throw ValidationError("rank condition failed: [Z, V] does not have full column rank");
  if (!full_rank(xt)) throw ValidationError("rank condition failed: [X, D, W] does not have full column rank");
}

MleResult maximize_pseudo_likelihood(const Dataset& data, const CcpProfile& profile, const ModelParams& start,
                                     const MleOptions& opts, const Matrix* warm_inverse_hessian) {
  check_dimensions(start, data);
  start.validate();
  const Index p = start.dimension();
  std::vector<char> is_fixed(static_cast<std::size_t>(p), 0);
  for (Index k : opts.fixed) {
    if (k < 0 || k >= p) throw ValidationError("fixed parameter index out of range");
    is_fixed[static_cast<std::size_t>(k)] = 1;
  }
  check_rank(data, profile, !is_fixed[static_cast<std::size_t>(start.alpha_index())],
             !is_fixed[static_cast<std::size_t>(start.delta_index())]);

  const PseudoLikelihood lik(data, profile);
  const Vector theta0 = start.pack();
  std::vector<Index> free_idx;
  for (Index k = 0; k < p; ++k) {
    if (!is_fixed[static_cast<std::size_t>(k)]) free_idx.push_back(k);
  }
  const Index rho_k = start.rho_index();

  // Free coordinates, with rho replaced by atanh(rho).
  auto to_theta = [&](const Vector& u) {
    Vector theta = theta0;
    for (std::size_t j = 0; j < free_idx.size(); ++j) {
      const Index k = free_idx[j];
      const double uj = u[static_cast<Index>(j)];
      theta[k] = k == rho_k ? std::tanh(std::clamp(uj, -kAtanhRhoMax, kAtanhRhoMax)) : uj;
    }
    return theta;
  };
  Vector u0(static_cast<Index>(free_idx.size()));
  for (std::size_t j = 0; j < free_idx.size(); ++j) {
    const Index k = free_idx[j];
    u0[static_cast<Index>(j)] = k == rho_k ? std::atanh(theta0[k]) : theta0[k];
  }

  std::size_t clamp_events = 0;
  Objective objective = [&](const Vector& u, Vector* grad) {
    Vector theta = to_theta(u);
    if (!(std::abs(theta[rho_k]) < 1.0)) return std::numeric_limits<double>::infinity();
    const auto ev = lik.evaluate(theta, grad != nullptr);
    clamp_events = ev.clamp_events;
    if (grad) {
      grad->resize(u.size());
      for (std::size_t j = 0; j < free_idx.size(); ++j) {
        const Index k = free_idx[j];
        double g = ev.gradient[k];
        if (k == rho_k) {
          // Flat beyond the cap, so the search stops at the boundary.
          g = std::abs(u[static_cast<Index>(j)]) >= kAtanhRhoMax ? 0.0 : g * (1.0 - theta[k] * theta[k]);
        }
        (*grad)[static_cast<Index>(j)] = -g;
      }
    }
    return -ev.value;
  };

  const Matrix* warm =
      warm_inverse_hessian && warm_inverse_hessian->rows() == u0.size() ? warm_inverse_hessian : nullptr;
  BfgsResult res = minimize_bfgs(objective, u0, opts.bfgs, warm);

  MleResult out;
  const Vector theta = to_theta(res.x);
  out.params = ModelParams::unpack(theta, start.k_T(), start.k_O());
  out.value = -res.f;
  out.iterations = res.iterations;
  out.clamp_events = clamp_events;
  out.converged = res.converged;
  out.message = res.message;
  out.inverse_hessian = std::move(res.inverse_hessian);
  const auto ev = lik.evaluate(theta, true);
  double gmax = 0.0;
  for (Index k : free_idx) gmax = std::max(gmax, std::abs(ev.gradient[k]));
  out.gradient_norm = gmax;
  if (!out.converged) {
    throw ConvergenceError("pseudo-likelihood maximization failed: " + out.message);
  }
  return out;
}

ProbitFit fit_probit(const Matrix& design, const BinaryVector& y, double tol, std::size_t max_iter) {
  const Index n = design.rows();
  const Index k = design.cols();
  if (static_cast<std::size_t>(n) != y.size()) throw ValidationError("probit: row count mismatch");
  {
    Eigen::ColPivHouseholderQR<Matrix> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() != k) throw ValidationError("probit: design matrix does not have full column rank");
  }

  auto loglik = [&](const Vector& beta, Vector* grad, Matrix* hess) {
    const Vector xb = design * beta;
    double ll = 0.0;
    Vector g = Vector::Zero(k);
    Matrix h = Matrix::Zero(k, k);
    for (Index i = 0; i < n; ++i) {
      const double q = y[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
      const double z = std::clamp(q * xb[i], -kIndexClamp, kIndexClamp);
      const double cdf = std_normal_cdf(z);
      ll += std::log(cdf);
      if (grad || hess) {
        const double lambda = std_normal_pdf(z) / cdf;
        if (grad) g += (q * lambda) * design.row(i).transpose();
        if (hess) h.noalias() -= (lambda * (lambda + z)) * design.row(i).transpose() * design.row(i);
      }
    }
    if (grad) *grad = std::move(g);
    if (hess) *hess = std::move(h);
    return ll;
  };

  ProbitFit fit;
  fit.beta = Vector::Zero(k);
  Vector g;
  Matrix h;
  double ll = loglik(fit.beta, &g, &h);
  bool converged = false;
  while (fit.iterations < max_iter) {
    const Vector step = (-h).ldlt().solve(g);
    double scale = 1.0;
    Vector trial;
    double ll_new;
    do {
      trial = fit.beta + scale * step;
      ll_new = loglik(trial, nullptr, nullptr);
      scale *= 0.5;
    } while (!(ll_new >= ll - 1e-12) && scale > 1e-10);
    fit.beta = trial;
    ++fit.iterations;
    ll = loglik(fit.beta, &g, &h);
    if (step.cwiseAbs().maxCoeff() < tol || g.cwiseAbs().maxCoeff() < tol) {
      converged = true;
      break;
    }
  }
  if (!converged) throw ConvergenceError("probit: Newton-Raphson did not converge");
  fit.log_likelihood = ll;
  const Matrix cov = (-h).inverse();
  fit.std_errors = cov.diagonal().cwiseSqrt();
  return fit;
}

}  // namespace peertreat
