#include "peertreat/simulation.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <string>
#include <thread>

#include "peertreat/effects.hpp"
#include "peertreat/errors.hpp"

namespace peertreat {

ModelParams reference_design_params(double rho) {
  ModelParams p;
  p.beta_T = Vector(3);
  p.beta_T << -1.0, 1.0, 1.0;
  p.alpha = 1.0;
  p.beta_O = Vector(2);
  p.beta_O << -1.0, 1.0;
  p.gamma = 1.0;
  p.delta = 1.0;
  p.rho = Correlation(rho);
  return p;
}

SimulatedChoices simulate_choices(const ModelParams& params, const Matrix& X, const Matrix& Z,
                                  const DirectedNetwork& net, RandomStream& rng, const SolverOptions& opts) {
  const std::size_t n = net.size();
  Vector u(static_cast<Index>(n)), v(static_cast<Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto [ui, vi] = sample_correlated_normal_pair(params.rho, rng);
    u[static_cast<Index>(i)] = ui;
    v[static_cast<Index>(i)] = vi;
  }

  SimulatedChoices out;
  const TreatmentGame tgame(params, Z, net);
  auto t_rep = tgame.solve(tgame.no_peer_profile(), opts);
  if (!t_rep.converged) throw ConvergenceError("simulation: treatment equilibrium did not converge");
  out.profile.p_T = std::move(t_rep.profile);
  const Vector v_star = local_average(net, out.profile.p_T);

  out.D.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Index r = static_cast<Index>(i);
    out.D[i] = tgame.base_index()[r] + params.alpha * v_star[r] + v[r] > 0.0 ? 1 : 0;
  }

  const OutcomeGame ogame(params, X, Z, out.D, v_star, net);
  auto o_rep = ogame.solve(ogame.no_peer_profile(), opts);
  if (!o_rep.converged) throw ConvergenceError("simulation: outcome equilibrium did not converge");
  out.profile.p_O = std::move(o_rep.profile);
  const Vector w_star = local_average(net, out.profile.p_O);

  out.Y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Index r = static_cast<Index>(i);
    out.Y[i] = ogame.outcome_index(i, w_star[r], out.D[i]) + u[r] > 0.0 ? 1 : 0;
  }
  return out;
}

Dataset simulate_dataset(std::size_t n, const ModelParams& params, std::size_t max_degree, RandomStream& rng,
                         CcpProfile* truth) {
  params.validate();
  if (params.k_T() != 3 || params.k_O() != 2) {
    throw ValidationError("simulate_dataset: the design uses Z = (1, X1, X2) and X = (1, X1)");
  }
  DirectedNetwork net = generate_random_network(n, max_degree, rng);
  Matrix X(static_cast<Index>(n), 2), Z(static_cast<Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    const Index r = static_cast<Index>(i);
    const double x1 = rng.normal(1.0, 1.0);
    const double x2 = rng.normal(0.0, 1.0);
    X(r, 0) = 1.0;
    X(r, 1) = x1;
    Z(r, 0) = 1.0;
    Z(r, 1) = x1;
    Z(r, 2) = x2;
  }
  SimulatedChoices ch = simulate_choices(params, X, Z, net, rng);
  if (truth) *truth = std::move(ch.profile);
  return Dataset{std::move(X), std::move(Z), std::move(ch.D), std::move(ch.Y), std::move(net)};
}

std::size_t default_worker_count() {
  if (const char* env = std::getenv("PEERTREAT_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  return 1;
}

namespace {

ReplicationRecord run_replication(const McDesign& design, std::size_t n, std::size_t r) {
  ReplicationRecord rec;
  rec.n = n;
  rec.replication = r;
  rec.seed = RandomStream::derive_seed(design.seed, static_cast<std::uint64_t>(n) * 1'000'003ULL + r);
  try {
    RandomStream rng(rec.seed);
    CcpProfile truth;
    const Dataset data = simulate_dataset(n, design.true_params, design.max_degree, rng, &truth);
    EstimatorConfig cfg = design.estimator;
    cfg.seed = rec.seed;
    const EstimationResult est = npjl_estimate(data, cfg);
    if (!est.converged) throw ConvergenceError("outer loop did not converge");
    rec.theta_hat = est.theta_hat.pack();
    rec.outer_iterations = est.outer_iterations;
    rec.rho_at_boundary = est.diagnostics.rho_at_boundary;
    rec.ccp_error = std::max((est.profile_hat.p_T - truth.p_T).cwiseAbs().maxCoeff(),
                             (est.profile_hat.p_O - truth.p_O).cwiseAbs().maxCoeff());
    if (design.compute_apte) {
      rec.apte_true = average_partial_treatment_effect(design.true_params, data, truth);
      rec.apte_est = average_partial_treatment_effect(est.theta_hat, data, est.profile_hat);
    }
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

}  // namespace

McResult monte_carlo_study(const McDesign& design) {
  design.true_params.validate();
  design.estimator.validate();
  if (design.replications < 1) throw ValidationError("mc-study: replications must be at least 1");
  if (design.n_list.empty()) throw ValidationError("mc-study: empty sample-size list");

  const auto t0 = std::chrono::steady_clock::now();
  McResult res;
  res.names = design.true_params.names();
  res.truth = design.true_params.pack();

  const std::size_t reps = design.replications;
  const std::size_t total = design.n_list.size() * reps;
  res.records.resize(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < total; k = next++) {
      res.records[k] = run_replication(design, design.n_list[k / reps], k % reps);
    }
  };
  const std::size_t workers = std::min(total, design.workers ? design.workers : default_worker_count());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  const Index p = res.truth.size();
  for (std::size_t c = 0; c < design.n_list.size(); ++c) {
    McCell cell;
    cell.n = design.n_list[c];
    cell.avg_bias = Vector::Zero(p);
    cell.mse = Vector::Zero(p);
    for (std::size_t r = 0; r < reps; ++r) {
      const ReplicationRecord& rec = res.records[c * reps + r];
      if (!rec.ok) {
        ++cell.failed;
        continue;
      }
      ++cell.succeeded;
      const Vector err = rec.theta_hat - res.truth;
      cell.avg_bias += err;
      cell.mse += err.cwiseAbs2();
      cell.apte_true += rec.apte_true;
      cell.apte_est += rec.apte_est;
      cell.apte_mse += (rec.apte_est - rec.apte_true) * (rec.apte_est - rec.apte_true);
      cell.apte_gap += rec.apte_est - rec.apte_true;
      cell.mean_ccp_error += rec.ccp_error;
      cell.rho_at_boundary += rec.rho_at_boundary ? 1 : 0;
    }
    if (cell.failed * 20 > reps) {
      throw ConvergenceError("mc-study: " + std::to_string(cell.failed) + " of " + std::to_string(reps) +
                             " replications failed at n = " + std::to_string(cell.n));
    }
    const double k = static_cast<double>(cell.succeeded);
    cell.avg_bias /= k;
    cell.mse /= k;
    cell.apte_true /= k;
    cell.apte_est /= k;
    cell.apte_mse /= k;
    cell.apte_gap /= k;
    cell.mean_ccp_error /= k;
    res.cells.push_back(std::move(cell));
  }
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace peertreat
