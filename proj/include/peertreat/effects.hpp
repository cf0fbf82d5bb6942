#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "peertreat/equilibrium.hpp"
#include "peertreat/model.hpp"

namespace peertreat {

/// Individual effect of switching D_i from 0 to 1 with D_{-i} and V* held
/// fixed. The arm matching the observed D_i uses profile.p_O; the other arm
/// re-solves the outcome game from profile.p_O with D_i flipped.
double partial_treatment_effect(std::size_t i, const ModelParams& theta, const Dataset& data,
                                const CcpProfile& profile, const SolverOptions& opts = {});

/// PTE_i for every i.
Vector partial_treatment_effects(const ModelParams& theta, const Dataset& data, const CcpProfile& profile,
                                 const SolverOptions& opts = {});

double average_partial_treatment_effect(const ModelParams& theta, const Dataset& data, const CcpProfile& profile,
                                        const SolverOptions& opts = {});

struct EffectsReport {
  Vector pte;
  double apte = 0.0;
  Vector cte;  // empty unless requested
  std::size_t draws = 0;
};

/// Composite effect for individual i. Arm 1 solves the treatment game with
/// `index_shift` added to the treatment indices; arm 0 uses the unshifted game.
/// Each of the B draws shares one set of (u, v) across both arms. D_{-i} is
/// realized in each arm from its own indices, D_i is set to 1 and 0, the
/// outcome game is re-solved per arm, and the two conditional expressions
/// are averaged over draws.
double composite_treatment_effect(std::size_t i, const ModelParams& theta, const Dataset& data,
                                  const Vector& index_shift, std::size_t B, RandomStream& rng,
                                  const SolverOptions& opts = {});

enum class TargetSelector { LowestCovariate, MostPopular, Explicit };

struct CounterfactualSpec {
  TargetSelector selector = TargetSelector::MostPopular;
  std::size_t target_count = 0;
  Index covariate_column = 0;       // column of Z, for LowestCovariate
  std::vector<std::size_t> targets;  // for Explicit
  double index_shift = 0.5;
  std::size_t draws = 1000;
  std::uint64_t seed = 0;
};

struct CountSummary {
  double mean = 0.0;
  double sd = 0.0;
};

struct GroupCounts {
  std::size_t observed_treated = 0;
  std::size_t observed_outcome = 0;
  CountSummary baseline_treated;       // simulated, no shift
  CountSummary baseline_outcome;
  CountSummary counterfactual_treated;
  CountSummary counterfactual_outcome;
};

struct CounterfactualReport {
  std::vector<std::size_t> targets;
  GroupCounts whole;
  GroupCounts target;
  double composite_ratio = 0.0;            // whole sample, against observed counts
  double composite_ratio_simulated = 0.0;  // whole sample, against simulated baseline
  double target_composite_ratio = 0.0;
  double target_composite_ratio_simulated = 0.0;
  double target_apte = 0.0;                // mean PTE over targets
  std::size_t draws = 0;
};

std::vector<std::size_t> select_targets(const Dataset& data, const CounterfactualSpec& spec);

/// Solves the treatment game with the shift applied to the targets, then for
/// each draw realizes D and Y under both the baseline and the shifted game
/// with common shocks. `profile` must be the equilibrium at theta.
CounterfactualReport run_counterfactual(const ModelParams& theta, const Dataset& data, const CcpProfile& profile,
                                        const CounterfactualSpec& spec, const SolverOptions& opts = {});

}  // namespace peertreat
