#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "advisor/mdp.hpp"
#include "advisor/tables.hpp"

namespace advisor {

/// V and Q at every decision stage t = 1..T (index t-1). Stage T+1 is the
/// all-zero table and is not stored.
struct StagedValues {
  std::vector<ValueTable> v;
  std::vector<QTable> q;

  int horizon() const { return static_cast<int>(v.size()); }
  const ValueTable& value(int t) const { return v.at(static_cast<std::size_t>(t - 1)); }
  const QTable& action_value(int t) const { return q.at(static_cast<std::size_t>(t - 1)); }
};

/// Stage-1 tables: the ones reported everywhere in the toolkit.
struct PolicyValues {
  ValueTable v;
  QTable q;
};

struct OptimalSolution {
  StochasticPolicy policy;  // deterministic, lowest-index tie-break, stage 1
  ValueTable v;
  QTable q;
};

namespace detail {

inline double continuation(const TabularMDP& mdp, StateId s, ActionId a, const ValueTable& next) {
  double acc = 0.0;
  for (const auto& t : mdp.transitions(s, a)) acc += t.prob * next[t.next];
  return acc;
}

}  // namespace detail

/// q(s,a) = r(s,a) + γ Σ_{s'} P(s'|s,a) v(s').
inline QTable q_from_v(const TabularMDP& mdp, const ValueTable& v) {
  if (v.size() != mdp.num_states()) throw config_error("value table dimensions do not match the MDP");
  QTable q(mdp.layout());
  const double gamma = mdp.discount();
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    for (ActionId a = 0; a < mdp.num_actions(s); ++a) {
      q(s, a) = mdp.reward(s, a) + gamma * detail::continuation(mdp, s, a, v);
    }
  }
  return q;
}

/// Finite-horizon backward induction for a fixed stationary policy.
inline StagedValues evaluate_policy_staged(const TabularMDP& mdp, const StochasticPolicy& pi) {
  check_policy(mdp, pi);
  const int T = mdp.horizon();
  StagedValues out;
  out.v.resize(static_cast<std::size_t>(T));
  out.q.resize(static_cast<std::size_t>(T));
  ValueTable next(mdp.num_states(), 0.0);
  for (int t = T; t >= 1; --t) {
    QTable q = q_from_v(mdp, next);
    ValueTable v(mdp.num_states(), 0.0);
    for (StateId s = 0; s < mdp.num_states(); ++s) {
      const auto probs = pi.row(s);
      const auto qs = q.row(s);
      double acc = 0.0;
      for (std::size_t a = 0; a < qs.size(); ++a) acc += probs[a] * qs[a];
      v[s] = acc;
    }
    next = v;
    out.v[static_cast<std::size_t>(t - 1)] = std::move(v);
    out.q[static_cast<std::size_t>(t - 1)] = std::move(q);
  }
  return out;
}

inline PolicyValues evaluate_policy(const TabularMDP& mdp, const StochasticPolicy& pi) {
  auto staged = evaluate_policy_staged(mdp, pi);
  return {std::move(staged.v.front()), std::move(staged.q.front())};
}

/// Optimal values at every stage, with the greedy policy of each stage.
struct StagedOptimal {
  StagedValues values;
  std::vector<StochasticPolicy> policies;
};

inline StagedOptimal value_iteration_staged(const TabularMDP& mdp) {
  const int T = mdp.horizon();
  StagedOptimal out;
  out.values.v.resize(static_cast<std::size_t>(T));
  out.values.q.resize(static_cast<std::size_t>(T));
  out.policies.resize(static_cast<std::size_t>(T));
  ValueTable next(mdp.num_states(), 0.0);
  for (int t = T; t >= 1; --t) {
    QTable q = q_from_v(mdp, next);
    ValueTable v(mdp.num_states(), 0.0);
    for (StateId s = 0; s < mdp.num_states(); ++s) v[s] = row_max(q.row(s));
    const auto idx = static_cast<std::size_t>(t - 1);
    out.policies[idx] = greedy_policy(q);
    next = v;
    out.values.v[idx] = std::move(v);
    out.values.q[idx] = std::move(q);
  }
  return out;
}

/// π*, V*, Q* at stage 1.
inline OptimalSolution value_iteration(const TabularMDP& mdp) {
  auto staged = value_iteration_staged(mdp);
  return {std::move(staged.policies.front()), std::move(staged.values.v.front()),
          std::move(staged.values.q.front())};
}

/// Δ(s,a) = q(s,a) − v(s).
inline DeltaTable delta_table(const ValueTable& v, const QTable& q) {
  if (v.size() != q.num_states()) throw config_error("value and Q tables disagree on the number of states");
  DeltaTable d(q.layout());
  for (StateId s = 0; s < v.size(); ++s) {
    const auto qs = q.row(s);
    auto ds = d.row(s);
    for (std::size_t a = 0; a < qs.size(); ++a) ds[a] = qs[a] - v[s];
  }
  return d;
}

/// π_H ⊕ (φ, π_I): override with probability φ(s), otherwise follow π_H.
inline StochasticPolicy compose(const StochasticPolicy& pi_h, const GatingFunction& phi,
                                const StochasticPolicy& pi_i) {
  if (!pi_h.layout() || !pi_i.same_shape(*pi_h.layout()) || phi.size() != pi_h.num_states()) {
    throw config_error("compose: policies and gate are defined on different MDPs");
  }
  StochasticPolicy out(pi_h.layout());
  for (StateId s = 0; s < pi_h.num_states(); ++s) {
    const double g = phi[s];
    const auto h = pi_h.row(s);
    const auto i = pi_i.row(s);
    auto o = out.row(s);
    for (std::size_t a = 0; a < o.size(); ++a) {
      // Written so that g == 0 and g == 1 reproduce the inputs bit for bit.
      o[a] = g == 0.0 ? h[a] : g == 1.0 ? i[a] : g * i[a] + (1.0 - g) * h[a];
    }
  }
  return out;
}

inline double expected_return(const TabularMDP& mdp, const ValueTable& v) {
  double j = 0.0;
  const auto& start = mdp.start_distribution();
  for (StateId s = 0; s < mdp.num_states(); ++s) j += start[s] * v[s];
  return j;
}

/// J(π) = Σ_s S0(s) V^π(s).
inline double expected_return(const TabularMDP& mdp, const StochasticPolicy& pi) {
  return expected_return(mdp, evaluate_policy(mdp, pi).v);
}

/// Distribution over non-terminal states at each stage t = 1..T.
inline std::vector<std::vector<double>> stage_occupancy(const TabularMDP& mdp, const StochasticPolicy& pi) {
  check_policy(mdp, pi);
  const std::size_t n = mdp.num_states();
  std::vector<std::vector<double>> out;
  std::vector<double> dist = mdp.start_distribution();
  for (int t = 1; t <= mdp.horizon(); ++t) {
    std::vector<double> here(n, 0.0);
    std::vector<double> next(n, 0.0);
    for (StateId s = 0; s < n; ++s) {
      if (dist[s] == 0.0 || mdp.is_terminal(s)) continue;
      here[s] = dist[s];
      const auto probs = pi.row(s);
      for (ActionId a = 0; a < probs.size(); ++a) {
        const double w = dist[s] * probs[a];
        if (w == 0.0) continue;
        for (const auto& tr : mdp.transitions(s, a)) next[tr.next] += w * tr.prob;
      }
    }
    out.push_back(std::move(here));
    dist = std::move(next);
  }
  return out;
}

/// Expected number of visits to each non-terminal state over t = 1..T.
/// The sum is the expected number of decision steps.
inline ValueTable occupancy(const TabularMDP& mdp, const StochasticPolicy& pi) {
  ValueTable occ(mdp.num_states(), 0.0);
  for (const auto& stage : stage_occupancy(mdp, pi)) {
    for (StateId s = 0; s < stage.size(); ++s) occ[s] += stage[s];
  }
  return occ;
}

/// Occupancy-weighted gate mass over expected decision steps; 0 when the
/// policy never reaches a decision.
inline double intervention_frequency(const ValueTable& occ, const GatingFunction& phi) {
  double steps = 0.0;
  double fired = 0.0;
  for (StateId s = 0; s < occ.size(); ++s) {
    steps += occ[s];
    fired += occ[s] * phi[s];
  }
  return steps > 0.0 ? fired / steps : 0.0;
}

}  // namespace advisor
