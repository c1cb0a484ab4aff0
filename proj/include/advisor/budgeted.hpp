#pragma once

#include <algorithm>
#include <cstddef>
#include <iostream>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "advisor/mdp.hpp"
#include "advisor/solve.hpp"
#include "advisor/tables.hpp"

namespace advisor {

/// Gate φ plus override π_I, either stationary (one entry) or stage-indexed
/// (one entry per stage 1..T). With `max_interventions` set, the gate is
/// only consulted while interventions remain in the episode.
struct InterventionPolicy {
  std::vector<GatingFunction> gates;
  std::vector<StochasticPolicy> overrides;
  std::optional<int> max_interventions;

  static InterventionPolicy stationary(GatingFunction gate, StochasticPolicy override_policy,
                                       std::optional<int> cap = std::nullopt) {
    InterventionPolicy ip;
    ip.gates.push_back(std::move(gate));
    ip.overrides.push_back(std::move(override_policy));
    ip.max_interventions = cap;
    return ip;
  }

  const GatingFunction& gate(int t) const { return pick(gates, t); }
  const StochasticPolicy& override_policy(int t) const { return pick(overrides, t); }

 private:
  template <class T>
  static const T& pick(const std::vector<T>& items, int t) {
    if (items.size() == 1) return items.front();
    return items.at(static_cast<std::size_t>(t - 1));
  }
};

inline void check_intervention(const TabularMDP& mdp, const InterventionPolicy& ip) {
  const auto T = static_cast<std::size_t>(mdp.horizon());
  if (ip.gates.empty() || ip.overrides.empty()) throw config_error("intervention policy is empty");
  if ((ip.gates.size() != 1 && ip.gates.size() != T) || (ip.overrides.size() != 1 && ip.overrides.size() != T)) {
    throw config_error("staged intervention policy must have one entry per stage");
  }
  if (ip.max_interventions && *ip.max_interventions < 0) throw config_error("negative intervention cap");
  for (const auto& g : ip.gates) check_gate(mdp, g);
  for (const auto& o : ip.overrides) check_policy(mdp, o);
}

struct BudgetDecision {
  bool intervene = false;
  ActionId action = 0;  // best override action; meaningful for display even on "pass"
};

/// Exact solution of the budget-augmented problem over (stage, interventions
/// remaining, state). Stage-1 accessors are the reported tables; the full
/// stage-indexed decisions drive online execution.
class AugmentedValueTable {
 public:
  AugmentedValueTable(int budget, int horizon, std::size_t num_states)
      : budget_(budget),
        horizon_(horizon),
        n_(num_states),
        values_(cells(), 0.0),
        intervene_(cells(), 0),
        best_(cells(), 0) {}

  int budget() const { return budget_; }
  int horizon() const { return horizon_; }
  std::size_t num_states() const { return n_; }

  ValueTable v(int k) const {
    ValueTable out(n_);
    for (StateId s = 0; s < n_; ++s) out[s] = value(1, k, s);
    return out;
  }
  BudgetDecision decision(int k, StateId s) const { return decision(1, k, s); }

  double value(int t, int k, StateId s) const { return values_[at(t, k, s)]; }
  BudgetDecision decision(int t, int k, StateId s) const {
    return {intervene_[at(t, k, s)] != 0, best_[at(t, k, s)]};
  }

  // Writers used by the solver.
  void set(int t, int k, StateId s, double value, bool intervene, ActionId best) {
    const auto i = at(t, k, s);
    values_[i] = value;
    intervene_[i] = intervene ? 1 : 0;
    best_[i] = best;
  }

 private:
  std::size_t cells() const {
    return static_cast<std::size_t>(horizon_) * static_cast<std::size_t>(budget_ + 1) * n_;
  }
  std::size_t at(int t, int k, StateId s) const {
    return ((static_cast<std::size_t>(t - 1) * static_cast<std::size_t>(budget_ + 1)) + static_cast<std::size_t>(k)) *
               n_ +
           s;
  }

  int budget_;
  int horizon_;
  std::size_t n_;
  std::vector<double> values_;
  std::vector<char> intervene_;
  std::vector<ActionId> best_;
};

inline constexpr double kDecisionTolerance = 1e-12;

/// Optimal stopping / override DP with at most K interventions per episode.
///
/// v_0 = V^{π_H}; for k ≥ 1 the solver compares letting the human act
/// (keeping k) with overriding (spending one). Without `restrict_to`, the
/// override may be any action; with it, the override is that fixed policy
/// (e.g. the expert's argmax), which yields the best placement of a given
/// override rule. Ties go to "pass".
inline AugmentedValueTable solve_budgeted(const TabularMDP& mdp, const StochasticPolicy& pi_h, int K,
                                          const StochasticPolicy* restrict_to = nullptr) {
  check_policy(mdp, pi_h);
  if (restrict_to) check_policy(mdp, *restrict_to);
  if (K < 0) throw config_error("intervention budget K must be non-negative");
  if (K > mdp.horizon()) {
    std::cerr << "warning: intervention budget " << K << " exceeds the horizon; clamped to " << mdp.horizon() << "\n";
    K = mdp.horizon();
  }
  const std::size_t n = mdp.num_states();
  const int T = mdp.horizon();
  const double gamma = mdp.discount();
  AugmentedValueTable table(K, T, n);

  std::vector<ValueTable> next(static_cast<std::size_t>(K + 1), ValueTable(n, 0.0));
  for (int t = T; t >= 1; --t) {
    std::vector<ValueTable> here(static_cast<std::size_t>(K + 1), ValueTable(n, 0.0));
    for (int k = 0; k <= K; ++k) {
      const auto& keep = next[static_cast<std::size_t>(k)];
      for (StateId s = 0; s < n; ++s) {
        const auto probs = pi_h.row(s);
        double pass = 0.0;
        for (ActionId a = 0; a < probs.size(); ++a) {
          if (probs[a] == 0.0) continue;
          pass += probs[a] * (mdp.reward(s, a) + gamma * detail::continuation(mdp, s, a, keep));
        }
        if (k == 0 || mdp.is_terminal(s)) {
          // Best override still recorded for display: argmax of the k-1 = 0 layer, i.e. Q^{π_H}.
          ActionId best = 0;
          if (!mdp.is_terminal(s)) {
            double best_value = -std::numeric_limits<double>::infinity();
            for (ActionId a = 0; a < probs.size(); ++a) {
              const double q = mdp.reward(s, a) + gamma * detail::continuation(mdp, s, a, keep);
              if (q > best_value) {
                best_value = q;
                best = a;
              }
            }
          }
          here[static_cast<std::size_t>(k)][s] = pass;
          table.set(t, k, s, pass, false, best);
          continue;
        }
        const auto& spend = next[static_cast<std::size_t>(k - 1)];
        ActionId best = 0;
        double best_value = 0.0;
        if (restrict_to) {
          const auto ovr = restrict_to->row(s);
          best = argmax(ovr);
          for (ActionId a = 0; a < ovr.size(); ++a) {
            if (ovr[a] == 0.0) continue;
            best_value += ovr[a] * (mdp.reward(s, a) + gamma * detail::continuation(mdp, s, a, spend));
          }
        } else {
          best_value = -std::numeric_limits<double>::infinity();
          for (ActionId a = 0; a < probs.size(); ++a) {
            const double q = mdp.reward(s, a) + gamma * detail::continuation(mdp, s, a, spend);
            if (q > best_value) {
              best_value = q;
              best = a;
            }
          }
        }
        const bool intervene = best_value > pass + kDecisionTolerance;
        const double v = intervene ? best_value : pass;
        here[static_cast<std::size_t>(k)][s] = v;
        table.set(t, k, s, v, intervene, best);
      }
    }
    next = std::move(here);
  }
  return table;
}

/// Exact value of π_H under an intervention policy (stage 1, full budget).
/// Capped policies are evaluated on the budget-augmented process.
inline ValueTable evaluate_intervention(const TabularMDP& mdp, const StochasticPolicy& pi_h,
                                        const InterventionPolicy& ip) {
  check_policy(mdp, pi_h);
  check_intervention(mdp, ip);
  const std::size_t n = mdp.num_states();
  const int T = mdp.horizon();
  const double gamma = mdp.discount();
  const int layers = ip.max_interventions ? *ip.max_interventions + 1 : 1;

  std::vector<ValueTable> next(static_cast<std::size_t>(layers), ValueTable(n, 0.0));
  for (int t = T; t >= 1; --t) {
    const auto& phi = ip.gate(t);
    const auto& pi_i = ip.override_policy(t);
    std::vector<ValueTable> here(static_cast<std::size_t>(layers), ValueTable(n, 0.0));
    for (int k = 0; k < layers; ++k) {
      const bool active = !ip.max_interventions || k > 0;
      const auto& keep = next[static_cast<std::size_t>(k)];
      const auto& spend = next[static_cast<std::size_t>(ip.max_interventions ? std::max(k - 1, 0) : k)];
      for (StateId s = 0; s < n; ++s) {
        const double g = active ? phi[s] : 0.0;
        double human = 0.0;
        double over = 0.0;
        const auto h = pi_h.row(s);
        const auto o = pi_i.row(s);
        for (ActionId a = 0; a < h.size(); ++a) {
          if (g < 1.0 && h[a] != 0.0) human += h[a] * (mdp.reward(s, a) + gamma * detail::continuation(mdp, s, a, keep));
          if (g > 0.0 && o[a] != 0.0) over += o[a] * (mdp.reward(s, a) + gamma * detail::continuation(mdp, s, a, spend));
        }
        here[static_cast<std::size_t>(k)][s] = g == 0.0 ? human : g == 1.0 ? over : g * over + (1.0 - g) * human;
      }
    }
    next = std::move(here);
  }
  return std::move(next.back());
}

struct InterventionStats {
  ValueTable occupancy;  // summed over remaining-budget layers
  double expected_steps = 0.0;
  double expected_interventions = 0.0;

  double frequency() const { return expected_steps > 0.0 ? expected_interventions / expected_steps : 0.0; }
};

/// Forward recursion over the (budget-augmented) composed process.
inline InterventionStats intervention_stats(const TabularMDP& mdp, const StochasticPolicy& pi_h,
                                            const InterventionPolicy& ip) {
  check_policy(mdp, pi_h);
  check_intervention(mdp, ip);
  const std::size_t n = mdp.num_states();
  const int layers = ip.max_interventions ? *ip.max_interventions + 1 : 1;
  InterventionStats out{ValueTable(n, 0.0), 0.0, 0.0};

  // Layer index = interventions remaining (capped) or 0 (uncapped).
  std::vector<std::vector<double>> dist(static_cast<std::size_t>(layers), std::vector<double>(n, 0.0));
  dist.back() = mdp.start_distribution();
  for (int t = 1; t <= mdp.horizon(); ++t) {
    const auto& phi = ip.gate(t);
    const auto& pi_i = ip.override_policy(t);
    std::vector<std::vector<double>> next(static_cast<std::size_t>(layers), std::vector<double>(n, 0.0));
    for (int k = 0; k < layers; ++k) {
      const bool active = !ip.max_interventions || k > 0;
      const auto spend_layer = static_cast<std::size_t>(ip.max_interventions ? std::max(k - 1, 0) : k);
      for (StateId s = 0; s < n; ++s) {
        const double d = dist[static_cast<std::size_t>(k)][s];
        if (d == 0.0 || mdp.is_terminal(s)) continue;
        const double g = active ? phi[s] : 0.0;
        out.occupancy[s] += d;
        out.expected_steps += d;
        out.expected_interventions += d * g;
        const auto h = pi_h.row(s);
        const auto o = pi_i.row(s);
        for (ActionId a = 0; a < h.size(); ++a) {
          const double wh = d * (1.0 - g) * h[a];
          const double wo = d * g * o[a];
          for (const auto& tr : mdp.transitions(s, a)) {
            if (wh != 0.0) next[static_cast<std::size_t>(k)][tr.next] += wh * tr.prob;
            if (wo != 0.0) next[spend_layer][tr.next] += wo * tr.prob;
          }
        }
      }
    }
    dist = std::move(next);
  }
  return out;
}

}  // namespace advisor
