#pragma once

#include <memory>
#include <string_view>

#include "advisor/behavior.hpp"
#include "advisor/env/environment.hpp"
#include "advisor/env/registry.hpp"
#include "advisor/intervene.hpp"
#include "advisor/solve.hpp"

namespace advisor {

/// An environment with a human model and every table the strategies need.
/// Built once, then read-only.
struct SolvedInstance {
  std::shared_ptr<const Environment> env;
  SkillModel skill;
  OptimalSolution optimal;  // π*, V*, Q*
  StochasticPolicy human;
  PolicyValues human_values;  // V^{π_H}, Q^{π_H}
  DeltaTable delta;
  StochasticPolicy expert;
  StochasticPolicy valuemax;
  double j_human = 0.0;
  double j_optimal = 0.0;

  const TabularMDP& mdp() const { return env->mdp; }

  /// Override used by a strategy; the human strategy "overrides" with π_H itself.
  const StochasticPolicy& override_for(Strategy s) const {
    switch (s) {
      case Strategy::expert: return expert;
      case Strategy::valuemax: return valuemax;
      case Strategy::human: return human;
    }
    return human;
  }
};

inline SolvedInstance solve_instance(std::shared_ptr<const Environment> env, const SkillModel& skill) {
  SolvedInstance out;
  out.env = std::move(env);
  out.skill = skill;
  const auto& mdp = out.env->mdp;
  out.optimal = value_iteration(mdp);
  out.human = make_human_policy(out.optimal.q, skill);
  out.human_values = evaluate_policy(mdp, out.human);
  out.delta = delta_table(out.human_values.v, out.human_values.q);
  out.expert = expert_override(out.optimal.q);
  out.valuemax = valuemax_override(out.human_values.q);
  out.j_human = expected_return(mdp, out.human_values.v);
  out.j_optimal = expected_return(mdp, out.optimal.v);
  return out;
}

inline SolvedInstance solve_instance(std::string_view env_id, std::string_view skill) {
  return solve_instance(std::make_shared<const Environment>(make_environment(env_id)), parse_skill(skill));
}

}  // namespace advisor
