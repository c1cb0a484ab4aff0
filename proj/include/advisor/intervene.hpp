#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "advisor/budgeted.hpp"
#include "advisor/error.hpp"
#include "advisor/mdp.hpp"
#include "advisor/solve.hpp"
#include "advisor/trajectory.hpp"

namespace advisor {

enum class Strategy { human, expert, valuemax };

inline Strategy parse_strategy(std::string_view name) {
  if (name == "human" || name == "none") return Strategy::human;
  if (name == "expert") return Strategy::expert;
  if (name == "valuemax") return Strategy::valuemax;
  throw config_error("unknown strategy: " + std::string(name));
}

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::human: return "human";
    case Strategy::expert: return "expert";
    case Strategy::valuemax: return "valuemax";
  }
  return "human";
}

/// Threshold gate: open above τ, open with `boundary_prob` exactly at τ.
struct GateSpec {
  double threshold = 1.0;
  double boundary_prob = 0.0;
};

/// Deterministic override maximizing Q^{π_H}: best action if the human
/// continues afterwards.
inline StochasticPolicy valuemax_override(const QTable& q_h) { return greedy_policy(q_h); }

/// Deterministic override maximizing Q*: best action if play continues optimally.
inline StochasticPolicy expert_override(const QTable& q_star) { return greedy_policy(q_star); }

/// max(0, max_a Δ(s,a)). Mathematically max_a Δ ≥ 0; the clamp removes
/// round-off below zero so that τ = 0 opens every non-terminal state.
inline std::vector<double> gate_signal(const TabularMDP& mdp, const DeltaTable& delta) {
  if (!delta.same_shape(*mdp.layout())) throw config_error("delta table does not match the MDP");
  std::vector<double> g(mdp.num_states(), 0.0);
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (!mdp.is_terminal(s)) g[s] = std::max(0.0, row_max(delta.row(s)));
  }
  return g;
}

inline GatingFunction threshold_gate(const TabularMDP& mdp, const DeltaTable& delta, const GateSpec& spec) {
  if (!(spec.boundary_prob >= 0.0 && spec.boundary_prob <= 1.0)) throw config_error("boundary_prob must lie in [0,1]");
  const auto g = gate_signal(mdp, delta);
  GatingFunction phi(mdp.num_states(), 0.0);
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (mdp.is_terminal(s)) continue;
    phi[s] = g[s] > spec.threshold ? 1.0 : g[s] == spec.threshold ? spec.boundary_prob : 0.0;
  }
  return phi;
}

/// Exact intervention frequency of π_H ⊕ (φ, override), measured per
/// expected decision step of the composed policy.
inline double composed_frequency(const TabularMDP& mdp, const StochasticPolicy& pi_h, const GatingFunction& phi,
                                 const StochasticPolicy& override_policy) {
  return intervention_frequency(occupancy(mdp, compose(pi_h, phi, override_policy)), phi);
}

inline constexpr double kBudgetSlack = 1e-6;

/// Gate that spends as much of the frequency budget B as possible without
/// exceeding it (B + 1e-6), with frequency measured exactly on the composed
/// policy.
///
/// The gate family is ordered by the distinct values L_0 > L_1 > ... of the
/// gate signal: opening levels 0..i fully, then level i+1 with probability p.
/// Bisection runs first over whole levels, then over p within the boundary
/// level; every probe re-evaluates the composed occupancy.
inline GateSpec calibrate_budget(const TabularMDP& mdp, const StochasticPolicy& pi_h,
                                 const StochasticPolicy& override_policy, double budget) {
  if (!(budget >= 0.0 && budget <= 1.0)) throw config_error("budget B must lie in [0,1]");
  const auto pi = evaluate_policy(mdp, pi_h);
  const auto delta = delta_table(pi.v, pi.q);
  const auto signal = gate_signal(mdp, delta);

  std::vector<double> levels;
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (!mdp.is_terminal(s)) levels.push_back(signal[s]);
  }
  std::sort(levels.begin(), levels.end(), std::greater<>());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  const GateSpec everything{0.0, 1.0};
  if (levels.empty()) return everything;
  auto frequency = [&](const GateSpec& spec) {
    return composed_frequency(mdp, pi_h, threshold_gate(mdp, delta, spec), override_policy);
  };
  const double limit = budget + kBudgetSlack;
  if (frequency(everything) <= limit) return everything;
  if (budget == 0.0) return {std::nextafter(levels.front(), std::numeric_limits<double>::infinity()), 0.0};

  // Largest i whose levels 0..i fully open stay within budget (-1: none).
  std::ptrdiff_t lo = -1;
  auto hi = static_cast<std::ptrdiff_t>(levels.size()) - 1;
  while (hi - lo > 1) {
    const std::ptrdiff_t mid = lo + (hi - lo) / 2;
    if (frequency({levels[static_cast<std::size_t>(mid)], 1.0}) <= limit) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  // The slack only absorbs round-off on whole levels; the boundary
  // probability is fitted against B itself.
  const double tau = levels[static_cast<std::size_t>(hi)];
  double p_lo = 0.0;
  double p_hi = 1.0;
  for (int iter = 0; iter < 64 && p_hi - p_lo > 1e-13; ++iter) {
    const double mid = 0.5 * (p_lo + p_hi);
    if (frequency({tau, mid}) <= budget) {
      p_lo = mid;
    } else {
      p_hi = mid;
    }
  }
  return {tau, p_lo};
}

struct SingleIntervention {
  std::size_t step = 0;  // 0-based index into trajectory.steps
  ActionId action = 0;
  double gain = 0.0;  // max_a Δ at that step
};

/// Hindsight choice of the single best intervention along a realized
/// trajectory: the earliest step maximizing max_a Δ, with its argmax action.
inline SingleIntervention select_single_offline(const Trajectory& trajectory, const DeltaTable& delta) {
  if (trajectory.steps.empty()) throw domain_error("cannot select an intervention on an empty trajectory");
  SingleIntervention best{0, 0, -std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < trajectory.steps.size(); ++i) {
    const auto row = delta.row(trajectory.steps[i].state);
    const double g = row_max(row);
    if (g > best.gain) best = {i, argmax(row), g};
  }
  return best;
}

/// Online single-intervention policy read off the K = 1 budget DP: the gate
/// opens (at each stage) exactly where the DP intervenes, with its action.
inline InterventionPolicy select_single_online(const TabularMDP& mdp, const AugmentedValueTable& augmented) {
  if (augmented.budget() < 1) throw config_error("online selection needs a budget-augmented table with K >= 1");
  if (augmented.num_states() != mdp.num_states() || augmented.horizon() != mdp.horizon()) {
    throw config_error("augmented table does not match the MDP");
  }
  InterventionPolicy ip;
  ip.max_interventions = 1;
  for (int t = 1; t <= mdp.horizon(); ++t) {
    GatingFunction gate(mdp.num_states(), 0.0);
    std::vector<ActionId> choice(mdp.num_states(), 0);
    for (StateId s = 0; s < mdp.num_states(); ++s) {
      const auto d = augmented.decision(t, 1, s);
      if (d.intervene && !mdp.is_terminal(s)) gate[s] = 1.0;
      choice[s] = d.action;
    }
    ip.gates.push_back(std::move(gate));
    ip.overrides.push_back(deterministic_policy(mdp.layout(), choice));
  }
  return ip;
}

/// Exact start value J of π_H with a fixed intervention policy.
inline double intervention_return(const TabularMDP& mdp, const StochasticPolicy& pi_h, const InterventionPolicy& ip) {
  return expected_return(mdp, evaluate_intervention(mdp, pi_h, ip));
}

}  // namespace advisor
