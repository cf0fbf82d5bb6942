#include "peertreat/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "peertreat/errors.hpp"

namespace peertreat {

namespace {

double clamp_prob(double p) { return std::clamp(p, kProbFloor, kProbCeil); }

void check_rows(const Matrix& M, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(M.rows()) != n) {
    throw ValidationError(std::string(what) + " has " + std::to_string(M.rows()) + " rows, expected " +
                          std::to_string(n));
  }
}

void check_length(const Vector& v, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(v.size()) != n) {
    throw ValidationError(std::string(what) + " has length " + std::to_string(v.size()) + ", expected " +
                          std::to_string(n));
  }
}

// Jacobi iteration driver shared by both games.
template <class Sweep>
FixedPointReport iterate(std::size_t n, const Vector& init, const SolverOptions& opts, Sweep&& sweep) {
  check_length(init, n, "initial profile");
  if (!(opts.tol > 0.0) || !(opts.damping > 0.0 && opts.damping <= 1.0)) {
    throw ValidationError("solver options: tol must be positive and damping in (0, 1]");
  }
  FixedPointReport rep;
  Vector current = init;
  Vector next(static_cast<Index>(n));
  while (rep.iterations < opts.max_iter) {
    sweep(current, next);
    if (opts.damping != 1.0) next = opts.damping * next + (1.0 - opts.damping) * current;
    const double gap = n == 0 ? 0.0 : (next - current).cwiseAbs().maxCoeff();
    current.swap(next);
    ++rep.iterations;
    rep.gaps.push_back(gap);
    rep.final_gap = gap;
    if (gap <= opts.tol) {
      rep.converged = true;
      break;
    }
  }
  rep.profile = std::move(current);
  return rep;
}

}  // namespace

// ---------------------------------------------------------------- treatment --

TreatmentGame::TreatmentGame(const ModelParams& params, const Matrix& Z, const DirectedNetwork& net,
                             const Vector* index_shift)
    : net_(&net), alpha_(params.alpha) {
  check_rows(Z, net.size(), "Z");
  if (Z.cols() != params.k_T()) throw ValidationError("Z columns do not match beta_T");
  zb_ = Z * params.beta_T;
  if (index_shift) {
    check_length(*index_shift, net.size(), "index shift");
    zb_ += *index_shift;
  }
}

double TreatmentGame::response(std::size_t i, double v) const {
  return clamp_prob(std_normal_cdf(zb_[static_cast<Index>(i)] + alpha_ * v));
}

void TreatmentGame::sweep(const Vector& p, Vector& out) const {
  out.resize(p.size());
  for (std::size_t i = 0; i < size(); ++i) out[static_cast<Index>(i)] = response(i, net_->local_average_at(i, p));
}

Vector TreatmentGame::no_peer_profile() const {
  Vector p(zb_.size());
  for (Index i = 0; i < zb_.size(); ++i) p[i] = clamp_prob(std_normal_cdf(zb_[i]));
  return p;
}

FixedPointReport TreatmentGame::solve(const Vector& init, const SolverOptions& opts) const {
  return iterate(size(), init, opts, [this](const Vector& p, Vector& out) { sweep(p, out); });
}

// ------------------------------------------------------------------ outcome --

OutcomeGame::OutcomeGame(const ModelParams& params, const Matrix& X, const Matrix& Z, const BinaryVector& D,
                         const Vector& v_star, const DirectedNetwork& net, const Vector* index_shift)
    : net_(&net), d_(D), gamma_(params.gamma), delta_(params.delta), rho_(params.rho.value()) {
  const std::size_t n = net.size();
  check_rows(X, n, "X");
  check_rows(Z, n, "Z");
  check_length(v_star, n, "V*");
  if (D.size() != n) throw ValidationError("treatment vector length does not match the network");
  if (X.cols() != params.k_O() || Z.cols() != params.k_T()) {
    throw ValidationError("design columns do not match the parameter dimensions");
  }
  xb_ = X * params.beta_O;
  t_ = Z * params.beta_T + params.alpha * v_star;
  if (index_shift) {
    check_length(*index_shift, n, "index shift");
    t_ += *index_shift;
  }
  pt_.resize(t_.size());
  qt_.resize(t_.size());
  for (Index i = 0; i < t_.size(); ++i) {
    pt_[i] = std_normal_cdf(t_[i]);
    qt_[i] = std_normal_cdf(-t_[i]);
  }
  for (std::size_t i = 0; i < n; ++i) check_denominator(i, d_[i]);
}

void OutcomeGame::check_denominator(std::size_t i, int d) const {
  const double den = d ? pt_[static_cast<Index>(i)] : qt_[static_cast<Index>(i)];
  if (!(den > 0.0)) {
    throw NumericalError(std::string("outcome best response: treatment CCP is numerically ") +
                             (d ? "0" : "1"),
                         i);
  }
}

double OutcomeGame::response_at_index(std::size_t i, double a, int d) const {
  const Index k = static_cast<Index>(i);
  if (rho_ == 0.0) return clamp_prob(std_normal_cdf(a));
  if (d) return clamp_prob(bivariate_normal_cdf(a, t_[k], Correlation(rho_)) / pt_[k]);
  // P(Y=1, D=0) = Phi(a) - Phi2(a, t; rho), evaluated as the orthant Phi2(a, -t; -rho).
  return clamp_prob(bivariate_normal_cdf(a, -t_[k], Correlation(-rho_)) / qt_[k]);
}

double OutcomeGame::response(std::size_t i, double w, int d) const {
  return response_at_index(i, outcome_index(i, w, d), d);
}

void OutcomeGame::sweep(const Vector& p, Vector& out) const {
  out.resize(p.size());
  for (std::size_t i = 0; i < size(); ++i) {
    out[static_cast<Index>(i)] = response(i, net_->local_average_at(i, p), d_[i]);
  }
}

Vector OutcomeGame::no_peer_profile() const {
  Vector p(xb_.size());
  for (std::size_t i = 0; i < size(); ++i) {
    p[static_cast<Index>(i)] = response_at_index(i, xb_[static_cast<Index>(i)] + gamma_ * d_[i], d_[i]);
  }
  return p;
}

void OutcomeGame::set_treatment(std::size_t i, int d) {
  check_denominator(i, d);
  d_[i] = static_cast<std::uint8_t>(d);
}

FixedPointReport OutcomeGame::solve(const Vector& init, const SolverOptions& opts) const {
  return iterate(size(), init, opts, [this](const Vector& p, Vector& out) { sweep(p, out); });
}

FixedPointReport OutcomeGame::solve_with_flip(std::size_t i, int d, const Vector& base,
                                              const SolverOptions& opts) const {
  const std::size_t n = size();
  check_length(base, n, "base profile");
  if (i >= n) throw ValidationError("solve_with_flip: index out of range");
  check_denominator(i, d);
  const double prune = opts.tol;
  const double lambda = opts.damping;

  auto own_treatment = [&](std::size_t j) { return j == i ? d : static_cast<int>(d_[j]); };

  FixedPointReport rep;
  Vector current = base;
  std::vector<std::size_t> active{i};
  std::vector<std::size_t> next_active;
  std::vector<double> updates;
  std::vector<char> marked(n, 0);

  while (rep.iterations < opts.max_iter) {
    updates.resize(active.size());
    for (std::size_t k = 0; k < active.size(); ++k) {
      const std::size_t j = active[k];
      const double r = response(j, net_->local_average_at(j, current), own_treatment(j));
      updates[k] = lambda * r + (1.0 - lambda) * current[static_cast<Index>(j)];
    }
    double gap = 0.0;
    next_active.clear();
    for (std::size_t k = 0; k < active.size(); ++k) {
      const std::size_t j = active[k];
      const double change = std::abs(updates[k] - current[static_cast<Index>(j)]);
      current[static_cast<Index>(j)] = updates[k];
      gap = std::max(gap, change);
      if (change > prune) {
        for (std::size_t m : net_->nominators(j)) {
          if (!marked[m]) {
            marked[m] = 1;
            next_active.push_back(m);
          }
        }
        if (lambda != 1.0 && !marked[j]) {
          marked[j] = 1;
          next_active.push_back(j);
        }
      }
    }
    for (std::size_t m : next_active) marked[m] = 0;
    ++rep.iterations;
    rep.gaps.push_back(gap);
    rep.final_gap = gap;
    active.swap(next_active);
    if (gap <= opts.tol || active.empty()) {
      rep.converged = gap <= opts.tol || active.empty();
      break;
    }
  }
  rep.profile = std::move(current);
  return rep;
}

// ------------------------------------------------------------ free functions --

Vector treatment_best_response(const ModelParams& params, const Matrix& Z, const DirectedNetwork& net,
                               const Vector& p_T) {
  check_length(p_T, net.size(), "P_T");
  TreatmentGame game(params, Z, net);
  Vector out;
  game.sweep(p_T, out);
  return out;
}

FixedPointReport solve_treatment_equilibrium(const ModelParams& params, const Matrix& Z,
                                             const DirectedNetwork& net, const Vector& init,
                                             const SolverOptions& opts) {
  return TreatmentGame(params, Z, net).solve(init, opts);
}

Vector outcome_best_response(const ModelParams& params, const Matrix& X, const Matrix& Z, const BinaryVector& D,
                             const Vector& v_star, const DirectedNetwork& net, const Vector& p_O) {
  check_length(p_O, net.size(), "P_O");
  OutcomeGame game(params, X, Z, D, v_star, net);
  Vector out;
  game.sweep(p_O, out);
  return out;
}

FixedPointReport solve_outcome_equilibrium(const ModelParams& params, const Matrix& X, const Matrix& Z,
                                           const BinaryVector& D, const Vector& v_star,
                                           const DirectedNetwork& net, const Vector& init,
                                           const SolverOptions& opts) {
  return OutcomeGame(params, X, Z, D, v_star, net).solve(init, opts);
}

CcpProfile solve_equilibrium(const ModelParams& params, const Dataset& data, const SolverOptions& opts) {
  TreatmentGame tgame(params, data.Z, data.net);
  FixedPointReport t = tgame.solve(tgame.no_peer_profile(), opts);
  if (!t.converged) {
    throw ConvergenceError("treatment equilibrium did not converge (gap " + std::to_string(t.final_gap) + ")");
  }
  const Vector v_star = local_average(data.net, t.profile);
  OutcomeGame ogame(params, data.X, data.Z, data.D, v_star, data.net);
  FixedPointReport o = ogame.solve(ogame.no_peer_profile(), opts);
  if (!o.converged) {
    throw ConvergenceError("outcome equilibrium did not converge (gap " + std::to_string(o.final_gap) + ")");
  }
  return {std::move(t.profile), std::move(o.profile)};
}

ContractionReport contraction_diagnostics(const ModelParams& params, const Matrix& X, const Matrix& Z,
                                          const BinaryVector& D, const DirectedNetwork& net,
                                          const CcpProfile& profile) {
  ContractionReport rep;
  rep.alpha_margin = kSqrt2Pi - params.alpha;

  const Vector v_star = local_average(net, profile.p_T);
  const Vector w = local_average(net, profile.p_O);
  OutcomeGame game(params, X, Z, D, v_star, net);
  constexpr double h = 1e-6;
  for (std::size_t i = 0; i < net.size(); ++i) {
    const double a = game.outcome_index(i, w[static_cast<Index>(i)], D[i]);
    const double slope =
        std::abs(game.response_at_index(i, a + h, D[i]) - game.response_at_index(i, a - h, D[i])) / (2.0 * h);
    rep.sup_psi = std::max(rep.sup_psi, slope);
  }
  rep.delta_margin = (rep.sup_psi > 0.0 ? 1.0 / rep.sup_psi : INFINITY) - std::abs(params.delta);
  rep.sup_psi_w = std::abs(params.delta) * rep.sup_psi;
  rep.delta_margin_w = 1.0 - rep.sup_psi_w;
  const std::size_t max_n = net.max_degree();
  rep.degree_ok = max_n > 0 && max_n <= net.max_degree_bound();
  rep.satisfied = params.alpha >= 0.0 && rep.alpha_margin > 0.0 && rep.delta_margin > 0.0;
  return rep;
}

}  // namespace peertreat
