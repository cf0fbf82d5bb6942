#include "peertreat/effects.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>

#include "peertreat/errors.hpp"
#include "peertreat/simulation.hpp"

namespace peertreat {

namespace {

void check_profile(const CcpProfile& profile, std::size_t n) {
  if (static_cast<std::size_t>(profile.p_T.size()) != n || static_cast<std::size_t>(profile.p_O.size()) != n) {
    throw ValidationError("effects: profile length does not match the sample");
  }
}

double pte_with_game(std::size_t i, const OutcomeGame& game, const Dataset& data, const CcpProfile& profile,
                     const SolverOptions& opts) {
  const int d = data.D[i];
  const FixedPointReport other = game.solve_with_flip(i, 1 - d, profile.p_O, opts);
  if (!other.converged) {
    throw ConvergenceError("partial treatment effect: outcome game did not converge for individual " +
                           std::to_string(i));
  }
  const Vector& p1 = d == 1 ? profile.p_O : other.profile;
  const Vector& p0 = d == 1 ? other.profile : profile.p_O;
  const double w1 = data.net.local_average_at(i, p1);
  const double w0 = data.net.local_average_at(i, p0);
  return game.response(i, w1, 1) - game.response(i, w0, 0);
}

void add_sample(double x, double& sum, double& sumsq) {
  sum += x;
  sumsq += x * x;
}

CountSummary summarize(double sum, double sumsq, std::size_t B) {
  CountSummary s;
  const double b = static_cast<double>(B);
  s.mean = sum / b;
  s.sd = B > 1 ? std::sqrt(std::max(0.0, (sumsq - b * s.mean * s.mean) / (b - 1.0))) : 0.0;
  return s;
}

double ratio(double num, double den) { return den != 0.0 ? num / den : std::nan(""); }

}  // namespace

double partial_treatment_effect(std::size_t i, const ModelParams& theta, const Dataset& data,
                                const CcpProfile& profile, const SolverOptions& opts) {
  check_dimensions(theta, data);
  check_profile(profile, data.size());
  if (i >= data.size()) throw ValidationError("partial treatment effect: index out of range");
  const Vector v_star = local_average(data.net, profile.p_T);
  const OutcomeGame game(theta, data.X, data.Z, data.D, v_star, data.net);
  return pte_with_game(i, game, data, profile, opts);
}

Vector partial_treatment_effects(const ModelParams& theta, const Dataset& data, const CcpProfile& profile,
                                 const SolverOptions& opts) {
  check_dimensions(theta, data);
  check_profile(profile, data.size());
  const Vector v_star = local_average(data.net, profile.p_T);
  const OutcomeGame game(theta, data.X, data.Z, data.D, v_star, data.net);
  Vector out(static_cast<Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) out[static_cast<Index>(i)] = pte_with_game(i, game, data, profile, opts);
  return out;
}

double average_partial_treatment_effect(const ModelParams& theta, const Dataset& data, const CcpProfile& profile,
                                        const SolverOptions& opts) {
  if (data.size() == 0) throw ValidationError("average partial treatment effect: empty sample");
  return partial_treatment_effects(theta, data, profile, opts).mean();
}

double composite_treatment_effect(std::size_t i, const ModelParams& theta, const Dataset& data,
                                  const Vector& index_shift, std::size_t B, RandomStream& rng,
                                  const SolverOptions& opts) {
  check_dimensions(theta, data);
  const std::size_t n = data.size();
  if (i >= n) throw ValidationError("composite treatment effect: index out of range");
  if (B < 1) throw ValidationError("composite treatment effect: B must be at least 1");
  if (static_cast<std::size_t>(index_shift.size()) != n) {
    throw ValidationError("composite treatment effect: index shift length does not match the sample");
  }

  const TreatmentGame tg0(theta, data.Z, data.net);
  const TreatmentGame tg1(theta, data.Z, data.net, &index_shift);
  const FixedPointReport pt0 = tg0.solve(tg0.no_peer_profile(), opts);
  const FixedPointReport pt1 = tg1.solve(tg1.no_peer_profile(), opts);
  if (!pt0.converged || !pt1.converged) {
    throw ConvergenceError("composite treatment effect: treatment game did not converge");
  }
  const Vector v0 = local_average(data.net, pt0.profile);
  const Vector v1 = local_average(data.net, pt1.profile);
  const Vector t0 = tg0.base_index() + theta.alpha * v0;
  const Vector t1 = tg1.base_index() + theta.alpha * v1;

  BinaryVector d0(n), d1(n);
  OutcomeGame g0(theta, data.X, data.Z, d0, v0, data.net);
  OutcomeGame g1(theta, data.X, data.Z, d1, v1, data.net, &index_shift);
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = sample_correlated_normal_pair(theta.rho, rng).second;
      const Index r = static_cast<Index>(j);
      g0.set_treatment(j, j == i ? 0 : (t0[r] + v > 0.0));
      g1.set_treatment(j, j == i ? 1 : (t1[r] + v > 0.0));
    }
    const FixedPointReport p0 = g0.solve(g0.no_peer_profile(), opts);
    const FixedPointReport p1 = g1.solve(g1.no_peer_profile(), opts);
    if (!p0.converged || !p1.converged) {
      throw ConvergenceError("composite treatment effect: outcome game did not converge in draw " +
                             std::to_string(b));
    }
    total += g1.response(i, data.net.local_average_at(i, p1.profile), 1) -
             g0.response(i, data.net.local_average_at(i, p0.profile), 0);
  }
  return total / static_cast<double>(B);
}

std::vector<std::size_t> select_targets(const Dataset& data, const CounterfactualSpec& spec) {
  const std::size_t n = data.size();
  std::vector<std::size_t> out;
  switch (spec.selector) {
    case TargetSelector::Explicit: {
      std::vector<char> seen(n, 0);
      for (std::size_t t : spec.targets) {
        if (t >= n) throw ValidationError("counterfactual: target index " + std::to_string(t) + " out of range");
        if (seen[t]) throw ValidationError("counterfactual: duplicate target index " + std::to_string(t));
        seen[t] = 1;
      }
      return spec.targets;
    }
    case TargetSelector::LowestCovariate: {
      if (spec.target_count > n) throw ValidationError("counterfactual: target count exceeds sample size");
      if (spec.covariate_column < 0 || spec.covariate_column >= data.Z.cols()) {
        throw ValidationError("counterfactual: covariate column out of range");
      }
      out.resize(n);
      std::iota(out.begin(), out.end(), std::size_t{0});
      const auto col = data.Z.col(spec.covariate_column);
      std::stable_sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
        return col[static_cast<Index>(a)] < col[static_cast<Index>(b)];
      });
      break;
    }
    case TargetSelector::MostPopular:
      if (spec.target_count > n) throw ValidationError("counterfactual: target count exceeds sample size");
      out = in_degree_ranking(data.net);
      break;
  }
  out.resize(spec.target_count);
  return out;
}

CounterfactualReport run_counterfactual(const ModelParams& theta, const Dataset& data, const CcpProfile& profile,
                                        const CounterfactualSpec& spec, const SolverOptions& opts) {
  check_dimensions(theta, data);
  check_profile(profile, data.size());
  if (spec.draws < 1) throw ValidationError("counterfactual: at least one draw is required");
  const std::size_t n = data.size();

  CounterfactualReport rep;
  rep.targets = select_targets(data, spec);
  rep.draws = spec.draws;
  std::vector<char> is_target(n, 0);
  Vector shift = Vector::Zero(static_cast<Index>(n));
  for (std::size_t t : rep.targets) {
    is_target[t] = 1;
    shift[static_cast<Index>(t)] = spec.index_shift;
  }

  const TreatmentGame tg0(theta, data.Z, data.net);
  const TreatmentGame tg1(theta, data.Z, data.net, &shift);
  const FixedPointReport pt1 = tg1.solve(profile.p_T, opts);
  if (!pt1.converged) throw ConvergenceError("counterfactual: shifted treatment game did not converge");
  const Vector v0 = local_average(data.net, profile.p_T);
  const Vector v1 = local_average(data.net, pt1.profile);
  const Vector t0 = tg0.base_index() + theta.alpha * v0;
  const Vector t1 = tg1.base_index() + theta.alpha * v1;

  // Per-draw counts: whole D, whole Y, target D, target Y; baseline then shifted.
  std::vector<std::array<double, 8>> counts(spec.draws);
  auto run_draw = [&](std::size_t b) {
    RandomStream rng(RandomStream::derive_seed(spec.seed, b));
    Vector u(static_cast<Index>(n));
    BinaryVector d0(n), d1(n);
    for (std::size_t j = 0; j < n; ++j) {
      const auto [uj, vj] = sample_correlated_normal_pair(theta.rho, rng);
      const Index r = static_cast<Index>(j);
      u[r] = uj;
      d0[j] = t0[r] + vj > 0.0;
      d1[j] = t1[r] + vj > 0.0;
    }
    const OutcomeGame g0(theta, data.X, data.Z, d0, v0, data.net);
    const OutcomeGame g1(theta, data.X, data.Z, d1, v1, data.net, &shift);
    const FixedPointReport p0 = g0.solve(profile.p_O, opts);
    const FixedPointReport p1 = g1.solve(profile.p_O, opts);
    if (!p0.converged || !p1.converged) {
      throw ConvergenceError("counterfactual: outcome game did not converge in draw " + std::to_string(b));
    }
    std::array<double, 8> c{};
    for (std::size_t j = 0; j < n; ++j) {
      const Index r = static_cast<Index>(j);
      const bool y0 = g0.outcome_index(j, data.net.local_average_at(j, p0.profile), d0[j]) + u[r] > 0.0;
      const bool y1 = g1.outcome_index(j, data.net.local_average_at(j, p1.profile), d1[j]) + u[r] > 0.0;
      c[0] += d0[j];
      c[1] += y0;
      c[4] += d1[j];
      c[5] += y1;
      if (is_target[j]) {
        c[2] += d0[j];
        c[3] += y0;
        c[6] += d1[j];
        c[7] += y1;
      }
    }
    counts[b] = c;
  };

  const std::size_t workers = std::min(spec.draws, default_worker_count());
  if (workers <= 1) {
    for (std::size_t b = 0; b < spec.draws; ++b) run_draw(b);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t b = next++; b < spec.draws; b = next++) {
          try {
            run_draw(b);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  std::array<double, 8> sum{}, sumsq{};
  for (const auto& c : counts) {
    for (std::size_t k = 0; k < 8; ++k) add_sample(c[k], sum[k], sumsq[k]);
  }
  auto fill = [&](GroupCounts& g, std::size_t off) {
    g.baseline_treated = summarize(sum[off], sumsq[off], spec.draws);
    g.baseline_outcome = summarize(sum[off + 1], sumsq[off + 1], spec.draws);
    g.counterfactual_treated = summarize(sum[off + 4], sumsq[off + 4], spec.draws);
    g.counterfactual_outcome = summarize(sum[off + 5], sumsq[off + 5], spec.draws);
  };
  fill(rep.whole, 0);
  fill(rep.target, 2);
  for (std::size_t j = 0; j < n; ++j) {
    rep.whole.observed_treated += data.D[j];
    rep.whole.observed_outcome += data.Y[j];
    if (is_target[j]) {
      rep.target.observed_treated += data.D[j];
      rep.target.observed_outcome += data.Y[j];
    }
  }
  auto composite = [](const GroupCounts& g) {
    return ratio(g.counterfactual_outcome.mean - static_cast<double>(g.observed_outcome),
                 g.counterfactual_treated.mean - static_cast<double>(g.observed_treated));
  };
  auto composite_sim = [](const GroupCounts& g) {
    return ratio(g.counterfactual_outcome.mean - g.baseline_outcome.mean,
                 g.counterfactual_treated.mean - g.baseline_treated.mean);
  };
  rep.composite_ratio = composite(rep.whole);
  rep.composite_ratio_simulated = composite_sim(rep.whole);
  rep.target_composite_ratio = composite(rep.target);
  rep.target_composite_ratio_simulated = composite_sim(rep.target);

  if (!rep.targets.empty()) {
    const OutcomeGame game(theta, data.X, data.Z, data.D, v0, data.net);
    double s = 0.0;
    for (std::size_t t : rep.targets) s += pte_with_game(t, game, data, profile, opts);
    rep.target_apte = s / static_cast<double>(rep.targets.size());
  }
  return rep;
}

}  // namespace peertreat
