#include "peertreat/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "peertreat/errors.hpp"
#include "peertreat/simulation.hpp"

namespace peertreat {

namespace {

Vector probit_ccp(const Vector& index) {
  Vector p(index.size());
  for (Index i = 0; i < index.size(); ++i) p[i] = std::clamp(std_normal_cdf(index[i]), kProbFloor, kProbCeil);
  return p;
}

Matrix with_column(const Matrix& M, const Vector& c) {
  Matrix out(M.rows(), M.cols() + 1);
  out.leftCols(M.cols()) = M;
  out.col(M.cols()) = c;
  return out;
}

Vector as_vector(const BinaryVector& b) {
  Vector v(static_cast<Index>(b.size()));
  for (std::size_t i = 0; i < b.size(); ++i) v[static_cast<Index>(i)] = b[i];
  return v;
}

double sup_gap(const CcpProfile& a, const CcpProfile& b) {
  if (a.p_T.size() == 0) return 0.0;
  return std::max((a.p_T - b.p_T).cwiseAbs().maxCoeff(), (a.p_O - b.p_O).cwiseAbs().maxCoeff());
}

std::vector<Index> fixed_indices(const EstimatorConfig& cfg, const ModelParams& shape) {
  std::vector<Index> out;
  if (cfg.fixed_alpha) out.push_back(shape.alpha_index());
  if (cfg.fixed_delta) out.push_back(shape.delta_index());
  if (cfg.fixed_rho) out.push_back(shape.rho_index());
  return out;
}

std::vector<Index> free_indices(Index p, const std::vector<Index>& fixed) {
  std::vector<Index> out;
  for (Index k = 0; k < p; ++k) {
    if (std::find(fixed.begin(), fixed.end(), k) == fixed.end()) out.push_back(k);
  }
  return out;
}

// Psi(theta; P): one sweep of both games, the outcome game using V(P_T).
CcpProfile sweep_profile(const ModelParams& theta, const Dataset& data, const CcpProfile& P) {
  CcpProfile next;
  TreatmentGame(theta, data.Z, data.net).sweep(P.p_T, next.p_T);
  const Vector v = local_average(data.net, P.p_T);
  OutcomeGame(theta, data.X, data.Z, data.D, v, data.net).sweep(P.p_O, next.p_O);
  return next;
}

CcpProfile solve_profile(const ModelParams& theta, const Dataset& data, const CcpProfile& P,
                         const SolverOptions& opts) {
  CcpProfile next;
  FixedPointReport t = TreatmentGame(theta, data.Z, data.net).solve(P.p_T, opts);
  if (!t.converged) throw ConvergenceError("treatment equilibrium did not converge inside the outer loop");
  next.p_T = std::move(t.profile);
  const Vector v = local_average(data.net, next.p_T);
  FixedPointReport o = OutcomeGame(theta, data.X, data.Z, data.D, v, data.net).solve(P.p_O, opts);
  if (!o.converged) throw ConvergenceError("outcome equilibrium did not converge inside the outer loop");
  next.p_O = std::move(o.profile);
  return next;
}

}  // namespace

void EstimatorConfig::validate() const {
  if (!(outer_tol > 0.0)) throw ValidationError("estimator config: outer_tol must be positive");
  if (max_outer < 1) throw ValidationError("estimator config: max_outer must be at least 1");
  if (se_method == SeMethod::Bootstrap && bootstrap_reps < 2) {
    throw ValidationError("estimator config: bootstrap needs at least 2 replications");
  }
  if (fixed_alpha && !std::isfinite(*fixed_alpha)) throw ValidationError("estimator config: fixed alpha not finite");
  if (fixed_delta && !std::isfinite(*fixed_delta)) throw ValidationError("estimator config: fixed delta not finite");
  if (fixed_rho && !(std::abs(*fixed_rho) < 1.0)) throw ValidationError("estimator config: fixed rho outside (-1, 1)");
}

EstimationResult npjl_estimate(const Dataset& data, const EstimatorConfig& config) {
  data.validate();
  config.validate();
  const Index kO = data.X.cols();

  // Step 0: exogenous probits give the starting CCPs and coefficients.
  const ProbitFit ft = fit_probit(data.Z, data.D);
  const Matrix xd = with_column(data.X, as_vector(data.D));
  const ProbitFit fo = fit_probit(xd, data.Y);
  CcpProfile P{probit_ccp(data.Z * ft.beta), probit_ccp(xd * fo.beta)};

  ModelParams theta;
  theta.beta_T = ft.beta;
  theta.alpha = config.fixed_alpha.value_or(0.0);
  theta.beta_O = fo.beta.head(kO);
  theta.gamma = fo.beta[kO];
  theta.delta = config.fixed_delta.value_or(0.0);
  theta.rho = Correlation(config.fixed_rho.value_or(0.0));

  EstimationResult res;
  res.fixed = fixed_indices(config, theta);
  MleOptions mle_opts{config.bfgs, res.fixed};
  Matrix warm;
  bool have_warm = false;

  for (std::size_t K = 0; K < config.max_outer; ++K) {
    MleResult m = maximize_pseudo_likelihood(data, P, theta, mle_opts, have_warm ? &warm : nullptr);
    theta = m.params;
    warm = std::move(m.inverse_hessian);
    have_warm = true;
    res.diagnostics.clamp_events = m.clamp_events;
    res.loglik = m.value;

    CcpProfile next = config.inner_mode == InnerMode::Sweep ? sweep_profile(theta, data, P)
                                                            : solve_profile(theta, data, P, config.solver);
    const double gap = sup_gap(next, P);
    P = std::move(next);
    res.trace.push_back({K + 1, gap, m.value});
    res.outer_iterations = K + 1;
    if (gap <= config.outer_tol) {
      res.converged = true;
      break;
    }
  }

  res.theta_hat = theta;
  res.profile_hat = P;
  res.diagnostics.rank_ok = true;
  // NaN marks standard errors that were not computed.
  res.std_errors = Vector::Constant(theta.dimension(), std::numeric_limits<double>::quiet_NaN());
  if (!res.converged) {
    res.diagnostics.se_note = "not computed: outer loop did not converge";
    res.diagnostics.warnings.push_back("outer loop stopped after " + std::to_string(config.max_outer) +
                                       " iterations without meeting outer_tol");
    return res;
  }

  res.diagnostics.contraction = contraction_diagnostics(theta, data.X, data.Z, data.D, data.net, P);
  if (!res.diagnostics.contraction.satisfied) {
    res.diagnostics.warnings.push_back("contraction condition not satisfied at the estimates; uniqueness of the "
                                       "equilibrium is not guaranteed");
  }
  if (!res.diagnostics.contraction.degree_ok) {
    res.diagnostics.warnings.push_back("no individual nominates a friend; peer terms are identically zero");
  }
  if (std::abs(static_cast<double>(theta.rho)) >= kRhoBoundary) {
    res.diagnostics.rho_at_boundary = true;
    res.diagnostics.warnings.push_back("rho estimate is at the boundary of (-1, 1); the likelihood is maximized "
                                       "in the limit and standard errors are not meaningful");
  }
  if (res.diagnostics.clamp_events > 0) {
    res.diagnostics.warnings.push_back(std::to_string(res.diagnostics.clamp_events) +
                                       " likelihood cells or indices were clamped at the final step");
  }

  if (res.diagnostics.rho_at_boundary && config.se_method == SeMethod::Sandwich) {
    res.diagnostics.se_note = "not computed: rho at the boundary";
    return res;
  }
  switch (config.se_method) {
    case SeMethod::Sandwich:
      try {
        res.std_errors = sandwich_standard_errors(res, data);
        res.diagnostics.se_note = "sandwich";
      } catch (const NumericalError& e) {
        res.diagnostics.se_note = std::string("sandwich failed: ") + e.what() + "; use se_method = bootstrap";
        res.diagnostics.warnings.push_back(res.diagnostics.se_note);
      }
      break;
    case SeMethod::Bootstrap:
      res.std_errors = bootstrap_standard_errors(res, data, config);
      res.diagnostics.se_note = "parametric bootstrap, " + std::to_string(config.bootstrap_reps) + " replications";
      break;
    case SeMethod::None:
      res.diagnostics.se_note = "not requested";
      break;
  }
  return res;
}

Vector sandwich_standard_errors(const EstimationResult& result, const Dataset& data) {
  const ModelParams& th = result.theta_hat;
  check_dimensions(th, data);
  const CcpProfile& P = result.profile_hat;
  const std::size_t n = data.size();
  const Index N = static_cast<Index>(n);
  const Index p = th.dimension();
  const std::vector<Index> F = free_indices(p, result.fixed);
  const Index q = static_cast<Index>(F.size());
  const Vector theta = th.pack();
  const PseudoLikelihood lik(data, P);
  const double inv_n = 1.0 / static_cast<double>(n);

  auto restrict_vec = [&](const Vector& full) {
    Vector r(q);
    for (Index j = 0; j < q; ++j) r[j] = full[F[static_cast<std::size_t>(j)]];
    return r;
  };

  // Omega_2: mean outer product of the scores.
  Matrix S(N, q);
  {
    const Matrix full = lik.scores(theta);
    for (Index j = 0; j < q; ++j) S.col(j) = full.col(F[static_cast<std::size_t>(j)]);
  }
  const Matrix omega2 = S.transpose() * S * inv_n;

  // Hessian of L_n by central differences of the analytic gradient.
  constexpr double h_theta = 1e-6;
  Matrix H(q, q);
  for (Index j = 0; j < q; ++j) {
    Vector up = theta, dn = theta;
    up[F[static_cast<std::size_t>(j)]] += h_theta;
    dn[F[static_cast<std::size_t>(j)]] -= h_theta;
    H.col(j) = restrict_vec(lik.evaluate(up).gradient - lik.evaluate(dn).gradient) / (2.0 * h_theta);
  }
  H = 0.5 * (H + H.transpose()).eval();

  // Per-observation score sensitivities to the belief terms V_i and W_i.
  constexpr double h_p = 1e-7;
  const Vector& V = lik.V();
  const Vector& W = lik.W();
  Matrix dSv(N, q), dSw(N, q);
  {
    Vector s_up, s_dn;
    for (std::size_t i = 0; i < n; ++i) {
      const Index r = static_cast<Index>(i);
      lik.observation(i, theta, V[r] + h_p, W[r], &s_up);
      lik.observation(i, theta, V[r] - h_p, W[r], &s_dn);
      dSv.row(r) = restrict_vec(s_up - s_dn).transpose() / (2.0 * h_p);
      lik.observation(i, theta, V[r], W[r] + h_p, &s_up);
      lik.observation(i, theta, V[r], W[r] - h_p, &s_dn);
      dSw.row(r) = restrict_vec(s_up - s_dn).transpose() / (2.0 * h_p);
    }
  }

  // dPsi/dP is sparse: Psi_Ti depends on V_i, Psi_Oi on V_i and W_i, and the
  // beliefs are row averages over friends. Store the per-individual slopes.
  const TreatmentGame tg(th, data.Z, data.net);
  const OutcomeGame og(th, data.X, data.Z, data.D, V, data.net);
  Vector cTV(N), cOV(N), cOW(N);
  {
    const Vector up_shift = Vector::Constant(N, th.alpha * h_p);
    const Vector dn_shift = -up_shift;
    const OutcomeGame og_up(th, data.X, data.Z, data.D, V, data.net, &up_shift);
    const OutcomeGame og_dn(th, data.X, data.Z, data.D, V, data.net, &dn_shift);
    for (std::size_t i = 0; i < n; ++i) {
      const Index r = static_cast<Index>(i);
      const int d = data.D[i];
      cTV[r] = (tg.response(i, V[r] + h_p) - tg.response(i, V[r] - h_p)) / (2.0 * h_p);
      cOV[r] = (og_up.response(i, W[r], d) - og_dn.response(i, W[r], d)) / (2.0 * h_p);
      cOW[r] = (og.response(i, W[r] + h_p, d) - og.response(i, W[r] - h_p, d)) / (2.0 * h_p);
    }
  }

  // dPsi/dtheta' at P_hat, 2n x q.
  Matrix psi_theta(2 * N, q);
  for (Index j = 0; j < q; ++j) {
    Vector up = theta, dn = theta;
    up[F[static_cast<std::size_t>(j)]] += h_theta;
    dn[F[static_cast<std::size_t>(j)]] -= h_theta;
    const CcpProfile a = sweep_profile(ModelParams::unpack(up, th.k_T(), th.k_O()), data, P);
    const CcpProfile b = sweep_profile(ModelParams::unpack(dn, th.k_T(), th.k_O()), data, P);
    psi_theta.col(j).head(N) = (a.p_T - b.p_T) / (2.0 * h_theta);
    psi_theta.col(j).tail(N) = (a.p_O - b.p_O) / (2.0 * h_theta);
  }

  // (I - dPsi/dP)^{-1} b by the Neumann series m <- b + J m.
  auto apply_J = [&](const Vector& m, Vector& out) {
    const Vector mT = m.head(N);
    const Vector mO = m.tail(N);
    out.resize(2 * N);
    for (std::size_t i = 0; i < n; ++i) {
      const Index r = static_cast<Index>(i);
      const double aT = data.net.local_average_at(i, mT);
      const double aO = data.net.local_average_at(i, mO);
      out[r] = cTV[r] * aT;
      out[N + r] = cOV[r] * aT + cOW[r] * aO;
    }
  };
  Matrix feedback(2 * N, q);
  for (Index j = 0; j < q; ++j) {
    const Vector b = psi_theta.col(j);
    const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
    Vector m = b, Jm;
    bool done = false;
    for (int it = 0; it < 100000; ++it) {
      apply_J(m, Jm);
      const Vector next = b + Jm;
      const double change = (next - m).cwiseAbs().maxCoeff();
      m = next;
      if (!std::isfinite(change) || change > 1e12 * scale) break;
      if (change <= 1e-14 * scale) {
        done = true;
        break;
      }
    }
    if (!done) throw NumericalError("equilibrium feedback series did not converge");
    feedback.col(j) = m;
  }

  // Cross derivative d2L/dtheta dP' applied to the feedback columns.
  Matrix cross(q, q);
  for (Index j = 0; j < q; ++j) {
    const Vector mT = feedback.col(j).head(N);
    const Vector mO = feedback.col(j).tail(N);
    Vector acc = Vector::Zero(q);
    for (std::size_t i = 0; i < n; ++i) {
      const Index r = static_cast<Index>(i);
      acc += dSv.row(r).transpose() * data.net.local_average_at(i, mT) +
             dSw.row(r).transpose() * data.net.local_average_at(i, mO);
    }
    cross.col(j) = acc * inv_n;
  }

  const Matrix omega1 = H + cross;
  Eigen::FullPivLU<Matrix> lu(omega1);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) throw NumericalError("Omega_1 is singular");
  const Matrix inv = lu.inverse();
  const Matrix cov = inv * omega2 * inv.transpose() * inv_n;

  Vector se = Vector::Zero(p);
  for (Index j = 0; j < q; ++j) {
    const double v = cov(j, j);
    if (!(v > 0.0) || !std::isfinite(v)) throw NumericalError("sandwich variance is not positive");
    se[F[static_cast<std::size_t>(j)]] = std::sqrt(v);
  }
  return se;
}

Vector bootstrap_standard_errors(const EstimationResult& result, const Dataset& data, const EstimatorConfig& config) {
  const ModelParams& th = result.theta_hat;
  check_dimensions(th, data);
  EstimatorConfig inner = config;
  inner.se_method = SeMethod::None;
  const Index p = th.dimension();
  std::vector<Vector> draws;
  for (std::size_t r = 0; r < config.bootstrap_reps; ++r) {
    RandomStream rng(RandomStream::derive_seed(config.seed, r));
    try {
      SimulatedChoices ch = simulate_choices(th, data.X, data.Z, data.net, rng, config.solver);
      const Dataset boot{data.X, data.Z, std::move(ch.D), std::move(ch.Y), data.net};
      const EstimationResult est = npjl_estimate(boot, inner);
      if (est.converged) draws.push_back(est.theta_hat.pack());
    } catch (const Error&) {
      // A failed replication is dropped; the count is checked below.
    }
  }
  if (draws.size() < 2) throw NumericalError("bootstrap: fewer than two replications succeeded");
  Vector mean = Vector::Zero(p);
  for (const auto& d : draws) mean += d;
  mean /= static_cast<double>(draws.size());
  Vector var = Vector::Zero(p);
  for (const auto& d : draws) var += (d - mean).cwiseAbs2();
  var /= static_cast<double>(draws.size() - 1);
  Vector se = var.cwiseSqrt();
  for (Index k : result.fixed) se[k] = 0.0;
  return se;
}

ProfileInterval profile_ci_rho(const EstimationResult& result, const Dataset& data, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("profile interval: level must lie in (0, 1)");
  if (!result.converged) throw ValidationError("profile interval: estimation did not converge");
  const ModelParams& th = result.theta_hat;
  const Index rho_k = th.rho_index();
  if (std::find(result.fixed.begin(), result.fixed.end(), rho_k) != result.fixed.end()) {
    throw ValidationError("profile interval: rho was held fixed in estimation");
  }
  const CcpProfile& P = result.profile_hat;
  const double n = static_cast<double>(data.size());

  ProfileInterval out;
  const double z = std_normal_quantile(0.5 * (1.0 + level));
  out.cutoff = z * z;

  MleOptions free_opts;
  free_opts.fixed = result.fixed;
  const MleResult top = maximize_pseudo_likelihood(data, P, th, free_opts);
  out.rho_hat = top.params.rho.value();

  MleOptions prof_opts;
  prof_opts.fixed = result.fixed;
  prof_opts.fixed.push_back(rho_k);
  ModelParams warm = top.params;
  auto lr = [&](double r) {
    ModelParams start = warm;
    start.rho = Correlation(r);
    const MleResult m = maximize_pseudo_likelihood(data, P, start, prof_opts);
    warm = m.params;
    return 2.0 * n * (top.value - m.value);
  };

  constexpr double kEdge = 0.999;
  constexpr double kStep = 0.05;
  auto search = [&](double dir, bool& open) {
    warm = top.params;
    double inside = out.rho_hat;
    double outside = std::nan("");
    for (double r = out.rho_hat + dir * kStep;; r += dir * kStep) {
      const bool last = dir * r >= kEdge;
      if (last) r = dir * kEdge;
      if (lr(r) > out.cutoff) {
        outside = r;
        break;
      }
      inside = r;
      if (last) break;
    }
    if (std::isnan(outside)) {
      open = true;
      return inside;
    }
    while (std::abs(outside - inside) > 1e-6) {
      const double mid = 0.5 * (inside + outside);
      (lr(mid) > out.cutoff ? outside : inside) = mid;
    }
    return 0.5 * (inside + outside);
  };
  out.hi = search(+1.0, out.hi_open);
  out.lo = search(-1.0, out.lo_open);
  return out;
}

ResidualTestReport generalized_residual_test(const Dataset& data, bool outcome_peer) {
  data.validate();
  constexpr double kTol = 1e-8;
  constexpr std::size_t kMaxIter = 500;
  const Matrix& Z = data.Z;

  // Treatment probit with its peer term at the single-game fixed point.
  Vector pT = probit_ccp(Z * fit_probit(Z, data.D).beta);
  Matrix zv;
  ProbitFit ft;
  for (std::size_t it = 0;; ++it) {
    zv = with_column(Z, local_average(data.net, pT));
    ft = fit_probit(zv, data.D);
    const Vector next = probit_ccp(zv * ft.beta);
    const double gap = (next - pT).cwiseAbs().maxCoeff();
    pT = next;
    if (gap <= kTol) break;
    if (it + 1 >= kMaxIter) throw ConvergenceError("residual test: treatment peer term did not converge");
  }

  ResidualTestReport rep;
  rep.treatment_coef = ft.beta;
  const Vector zhat = zv * ft.beta;
  const Index N = static_cast<Index>(data.size());
  rep.residual.resize(N);
  for (Index i = 0; i < N; ++i) {
    const double z = zhat[i];
    const double phi = std_normal_pdf(z);
    rep.residual[i] = data.D[static_cast<std::size_t>(i)] ? phi / std_normal_cdf(z) : -phi / std_normal_cdf(-z);
  }

  const Matrix xd = with_column(data.X, as_vector(data.D));
  ProbitFit fo;
  if (!outcome_peer) {
    fo = fit_probit(with_column(xd, rep.residual), data.Y);
  } else {
    Vector pO = probit_ccp(with_column(xd, rep.residual) * fit_probit(with_column(xd, rep.residual), data.Y).beta);
    for (std::size_t it = 0;; ++it) {
      const Matrix design = with_column(with_column(xd, local_average(data.net, pO)), rep.residual);
      fo = fit_probit(design, data.Y);
      const Vector next = probit_ccp(design * fo.beta);
      const double gap = (next - pO).cwiseAbs().maxCoeff();
      pO = next;
      if (gap <= kTol) break;
      if (it + 1 >= kMaxIter) throw ConvergenceError("residual test: outcome peer term did not converge");
    }
  }
  rep.outcome_coef = fo.beta;
  const Index last = fo.beta.size() - 1;
  rep.residual_coef = fo.beta[last];
  rep.std_error = fo.std_errors[last];
  rep.t_stat = rep.residual_coef / rep.std_error;
  return rep;
}

}  // namespace peertreat
