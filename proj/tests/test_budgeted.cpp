#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "advisor/behavior.hpp"
#include "advisor/budgeted.hpp"
#include "advisor/env/trap.hpp"
#include "advisor/intervene.hpp"
#include "advisor/sim.hpp"
#include "oracles.hpp"

using namespace advisor;

namespace {

// Best value with at most k overrides, by expanding the trajectory tree.
double best_k(const TabularMDP& mdp, const StochasticPolicy& pi_h, StateId s, int t, int k) {
  if (t > mdp.horizon() || mdp.is_terminal(s)) return 0.0;
  double pass = 0.0;
  double force = -1.0;
  for (ActionId a = 0; a < mdp.num_actions(s); ++a) {
    double keep = 0.0;
    double spend = 0.0;
    for (const auto& tr : mdp.transitions(s, a)) {
      keep += tr.prob * (tr.reward + best_k(mdp, pi_h, tr.next, t + 1, k));
      if (k > 0) spend += tr.prob * (tr.reward + best_k(mdp, pi_h, tr.next, t + 1, k - 1));
    }
    pass += pi_h(s, a) * keep;
    if (k > 0) force = std::max(force, spend);
  }
  return std::max(pass, force);
}

std::vector<std::pair<TabularMDP, StochasticPolicy>> boltzmann_corpus(std::uint64_t seed, int count,
                                                                      oracle::RandomShape shape = {}) {
  std::mt19937_64 gen(seed);
  std::vector<std::pair<TabularMDP, StochasticPolicy>> out;
  for (int i = 0; i < count; ++i) {
    auto mdp = oracle::random_mdp(gen, shape);
    auto human = make_boltzmann(value_iteration(mdp).q, 1.0 + 3.0 * oracle::random_simplex(gen, 2)[0]);
    out.emplace_back(std::move(mdp), std::move(human));
  }
  return out;
}

}  // namespace

TEST(SolveBudgeted, ZeroBudgetIsHumanValue) {
  for (const auto& [mdp, human] : boltzmann_corpus(51, 40)) {
    const auto dp = solve_budgeted(mdp, human, 0);
    const auto pv = evaluate_policy(mdp, human);
    EXPECT_EQ(dp.v(0).values(), pv.v.values());
  }
}

TEST(SolveBudgeted, OptimalHumanNeverIntervenes) {
  std::mt19937_64 gen(52);
  oracle::RandomShape layered;
  layered.layered = true;
  for (int i = 0; i < 40; ++i) {
    const auto mdp = oracle::random_mdp(gen, layered);
    const auto opt = value_iteration(mdp);
    const auto dp = solve_budgeted(mdp, opt.policy, 3);
    const auto reached = stage_occupancy(mdp, opt.policy);
    for (int k = 0; k <= dp.budget(); ++k) {
      for (StateId s = 0; s < mdp.num_states(); ++s) {
        EXPECT_NEAR(dp.v(k)[s], opt.v[s], 1e-12);
        for (int t = 1; t <= mdp.horizon(); ++t) {
          if (reached[static_cast<std::size_t>(t - 1)][s] > 0.0) {
            EXPECT_FALSE(dp.decision(t, k, s).intervene);
          }
        }
      }
    }
  }
}

TEST(SolveBudgeted, ValueNonDecreasingInBudget) {
  for (const auto& [mdp, human] : boltzmann_corpus(53, 40)) {
    const auto dp = solve_budgeted(mdp, human, 4);
    for (int t = 1; t <= mdp.horizon(); ++t) {
      for (int k = 1; k <= dp.budget(); ++k) {
        for (StateId s = 0; s < mdp.num_states(); ++s) EXPECT_GE(dp.value(t, k, s), dp.value(t, k - 1, s));
      }
    }
  }
}

TEST(SolveBudgeted, MatchesTreeSearchForSeveralBudgets) {
  for (const auto& [mdp, human] : boltzmann_corpus(54, 40)) {
    const auto dp = solve_budgeted(mdp, human, 3);
    for (int k = 0; k <= dp.budget(); ++k) {
      for (StateId s = 0; s < mdp.num_states(); ++s) EXPECT_NEAR(dp.v(k)[s], best_k(mdp, human, s, 1, k), 1e-12);
    }
  }
}

TEST(SolveBudgeted, SingleInterventionMatchesRuleEnumeration) {
  oracle::RandomShape tiny;
  tiny.max_states = 3;
  tiny.max_actions = 2;
  tiny.max_horizon = 3;
  for (const auto& [mdp, human] : boltzmann_corpus(55, 25, tiny)) {
    const int T = mdp.horizon();
    const std::size_t n = mdp.num_states();
    // Every Markov rule: at each (stage, state) pass or force one action.
    std::vector<std::vector<int>> rule(static_cast<std::size_t>(T), std::vector<int>(n, -1));
    double best = -1.0;
    std::function<void(std::size_t)> enumerate = [&](std::size_t cell) {
      if (cell == static_cast<std::size_t>(T) * n) {
        best = std::max(best, oracle::single_rule_value(mdp, human, rule));
        return;
      }
      const auto t = cell / n;
      const auto s = cell % n;
      const int options = mdp.is_terminal(s) ? 0 : static_cast<int>(mdp.num_actions(s));
      for (int choice = -1; choice < options; ++choice) {
        rule[t][s] = choice;
        enumerate(cell + 1);
      }
      rule[t][s] = -1;
    };
    enumerate(0);
    const auto dp = solve_budgeted(mdp, human, 1);
    EXPECT_NEAR(expected_return(mdp, dp.v(1)), best, 1e-12);
    EXPECT_NEAR(oracle::best_single_intervention(mdp, human), best, 1e-12);
  }
}

TEST(SolveBudgeted, RestrictedOverrideMatchesTreeSearch) {
  for (const auto& [mdp, human] : boltzmann_corpus(56, 40)) {
    const auto ex = expert_override(value_iteration(mdp).q);
    const auto dp = solve_budgeted(mdp, human, 1, &ex);
    std::function<double(StateId, int)> best = [&](StateId s, int t) -> double {
      if (t > mdp.horizon() || mdp.is_terminal(s)) return 0.0;
      double pass = 0.0;
      double force = 0.0;
      for (ActionId a = 0; a < mdp.num_actions(s); ++a) {
        for (const auto& tr : mdp.transitions(s, a)) {
          pass += human(s, a) * tr.prob * (tr.reward + best(tr.next, t + 1));
          force += ex(s, a) * tr.prob * (tr.reward + oracle::tree_value(mdp, human, tr.next, t + 1));
        }
      }
      return std::max(pass, force);
    };
    for (StateId s = 0; s < mdp.num_states(); ++s) EXPECT_NEAR(dp.v(1)[s], best(s, 1), 1e-12);
  }
}

TEST(SolveBudgeted, TiesGoToPass) {
  // Both actions are worth the same, so overriding never strictly helps.
  MdpBuilder b;
  b.add_state();
  b.add_state("t", true);
  b.add_action(0, 0.5, {{1, 1.0}});
  b.add_action(0, 0.5, {{1, 1.0}});
  b.set_start_state(0);
  const auto mdp = b.build();
  const auto dp = solve_budgeted(mdp, uniform_policy(mdp), 1);
  EXPECT_FALSE(dp.decision(1, 0).intervene);
}

TEST(SolveBudgeted, BudgetAboveHorizonIsClamped) {
  const auto trap = build_trap_instance();
  const auto dp = solve_budgeted(trap.mdp, trap.human, 10);
  EXPECT_EQ(dp.budget(), trap.mdp.horizon());
  EXPECT_THROW(solve_budgeted(trap.mdp, trap.human, -1), config_error);
}

TEST(EvaluateIntervention, UncappedEqualsComposedPolicy) {
  std::mt19937_64 gen(57);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 40; ++i) {
    const auto mdp = oracle::random_mdp(gen);
    const auto human = oracle::random_policy(gen, mdp);
    const auto ovr = oracle::random_policy(gen, mdp);
    GatingFunction phi(mdp.num_states(), 0.0);
    for (StateId s = 0; s < mdp.num_states(); ++s) phi[s] = mdp.is_terminal(s) ? 0.0 : unit(gen);
    const auto ip = InterventionPolicy::stationary(phi, ovr);
    const auto direct = evaluate_policy(mdp, compose(human, phi, ovr)).v;
    const auto v = evaluate_intervention(mdp, human, ip);
    for (StateId s = 0; s < mdp.num_states(); ++s) EXPECT_NEAR(v[s], direct[s], 1e-12);
    const auto stats = intervention_stats(mdp, human, ip);
    const auto occ = occupancy(mdp, compose(human, phi, ovr));
    EXPECT_NEAR(stats.frequency(), intervention_frequency(occ, phi), 1e-12);
  }
}

TEST(EvaluateIntervention, CapMatchesMonteCarlo) {
  std::mt19937_64 gen(58);
  for (int i = 0; i < 5; ++i) {
    const auto mdp = oracle::random_mdp(gen);
    const auto human = oracle::random_policy(gen, mdp);
    GatingFunction phi(mdp.num_states(), 0.0);
    for (StateId s = 0; s < mdp.num_states(); ++s) phi[s] = mdp.is_terminal(s) ? 0.0 : 0.6;
    const auto ip = InterventionPolicy::stationary(phi, value_iteration(mdp).policy, 1);
    const double exact = intervention_return(mdp, human, ip);
    const auto stats = intervention_stats(mdp, human, ip);
    constexpr std::size_t N = 40000;
    std::vector<double> ret(N);
    std::vector<double> fired(N);
    std::vector<double> steps(N);
    for (std::size_t e = 0; e < N; ++e) {
      auto rng = RngStream::derive(99, {static_cast<std::uint64_t>(i), e});
      const auto t = rollout(mdp, human, rng, &ip);
      ret[e] = t.total_return();
      fired[e] = static_cast<double>(t.interventions());
      steps[e] = static_cast<double>(t.steps.size());
      EXPECT_LE(t.interventions(), 1u);
    }
    const auto r = estimate_mean(ret);
    EXPECT_NEAR(r.mean, exact, 3.0 * r.std_err + 1e-12);
    const auto f = estimate_ratio(fired, steps);
    EXPECT_NEAR(f.mean, stats.frequency(), 3.0 * f.std_err + 1e-12);
  }
}

TEST(EvaluateIntervention, RejectsMalformedPolicies) {
  const auto trap = build_trap_instance();
  InterventionPolicy empty;
  EXPECT_THROW(evaluate_intervention(trap.mdp, trap.human, empty), config_error);
  GatingFunction bad(trap.mdp.num_states(), 0.0);
  bad[trap::kWon] = 1.0;
  EXPECT_THROW(evaluate_intervention(trap.mdp, trap.human, InterventionPolicy::stationary(bad, trap.human)),
               config_error);
  InterventionPolicy two;
  two.gates.assign(2, GatingFunction(trap.mdp.num_states(), 0.0));
  two.overrides.push_back(trap.human);
  EXPECT_THROW(evaluate_intervention(trap.mdp, trap.human, two), config_error);
}
