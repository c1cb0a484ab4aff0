#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <random>

#include "advisor/sim.hpp"
#include "oracles.hpp"

using namespace advisor;

namespace {

bool same(const Trajectory& a, const Trajectory& b) {
  if (a.steps.size() != b.steps.size() || a.final_state != b.final_state) return false;
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    const auto& x = a.steps[i];
    const auto& y = b.steps[i];
    if (x.state != y.state || x.action != y.action || x.reward != y.reward || x.intervened != y.intervened) return false;
  }
  return true;
}

const RunStats& find(const std::vector<RunStats>& rows, const std::string& strategy, std::optional<double> budget = {}) {
  for (const auto& r : rows) {
    if (r.strategy == strategy && (!budget || r.budget_target == budget)) return r;
  }
  throw std::runtime_error("row not found: " + strategy);
}

}  // namespace

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  auto a = RngStream::derive(5, {1, 2});
  auto b = RngStream::derive(5, {1, 2});
  auto c = RngStream::derive(5, {2, 1});
  auto d = RngStream::derive(6, {1, 2});
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_NE(u, c.uniform());
    EXPECT_NE(u, d.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Rng, SampleIndexSkipsZeroMass) {
  const std::vector<double> p{0.0, 0.25, 0.0, 0.75};
  EXPECT_EQ(sample_index(p, 0.0), 1u);
  EXPECT_EQ(sample_index(p, 0.2499), 1u);
  EXPECT_EQ(sample_index(p, 0.25), 3u);
  EXPECT_EQ(sample_index(p, 0.999999999), 3u);
  const std::vector<double> q{0.5, 0.5, 0.0};
  EXPECT_EQ(sample_index(q, 1.0 - 1e-17), 1u);
}

TEST(Rollout, DeterministicForAStream) {
  std::mt19937_64 gen(21);
  for (int i = 0; i < 20; ++i) {
    const auto mdp = oracle::random_mdp(gen);
    const auto pi = oracle::random_policy(gen, mdp);
    auto r1 = RngStream::derive(3, {static_cast<std::uint64_t>(i)});
    auto r2 = RngStream::derive(3, {static_cast<std::uint64_t>(i)});
    EXPECT_TRUE(same(rollout(mdp, pi, r1), rollout(mdp, pi, r2)));
  }
}

TEST(Rollout, OpenGateFlagsEveryStep) {
  const auto inst = solve_instance("grid:open", "L3");
  const auto& mdp = inst.mdp();
  GatingFunction phi(mdp.num_states(), 0.0);
  for (StateId s = 0; s < mdp.num_states(); ++s) phi[s] = mdp.is_terminal(s) ? 0.0 : 1.0;
  const auto ip = InterventionPolicy::stationary(phi, inst.expert);
  for (std::uint64_t e = 0; e < 50; ++e) {
    auto rng = RngStream::derive(1, {e});
    const auto t = rollout(mdp, inst.human, rng, &ip);
    EXPECT_EQ(t.interventions(), t.steps.size());
    for (const auto& st : t.steps) EXPECT_EQ(st.action, argmax(inst.expert.row(st.state)));
  }
}

TEST(Rollout, RespectsHorizonAndTerminals) {
  std::mt19937_64 gen(22);
  for (int i = 0; i < 20; ++i) {
    const auto mdp = oracle::random_mdp(gen);
    const auto pi = oracle::random_policy(gen, mdp);
    for (std::uint64_t e = 0; e < 20; ++e) {
      auto rng = RngStream::derive(9, {static_cast<std::uint64_t>(i), e});
      const auto t = rollout(mdp, pi, rng);
      EXPECT_LE(t.steps.size(), static_cast<std::size_t>(mdp.horizon()));
      for (const auto& st : t.steps) EXPECT_FALSE(mdp.is_terminal(st.state));
      if (t.steps.size() < static_cast<std::size_t>(mdp.horizon())) {
        EXPECT_TRUE(mdp.is_terminal(t.final_state));
      }
    }
  }
}

TEST(Rollout, MonteCarloAgreesWithDynamicProgramming) {
  std::mt19937_64 gen(23);
  for (int i = 0; i < 5; ++i) {
    const auto mdp = oracle::random_mdp(gen);
    const auto pi = oracle::random_policy(gen, mdp);
    const double exact = oracle::tree_return(mdp, pi);
    const auto eps = simulate_episodes(mdp, pi, nullptr, 40000, 100 + i, 1);
    std::vector<double> r;
    for (const auto& t : eps) r.push_back(t.total_return());
    const auto est = estimate_mean(r);
    EXPECT_NEAR(est.mean, exact, 3.0 * est.std_err + 1e-12);
  }
}

TEST(Simulation, WorkerCountDoesNotChangeResults) {
  const auto inst = solve_instance("trap", "L1");
  const auto ip = InterventionPolicy::stationary(threshold_gate(inst.mdp(), inst.delta, {0.01, 0.0}), inst.valuemax);
  const auto a = simulate_episodes(inst.mdp(), inst.human, &ip, 3000, 17, 1);
  const auto b = simulate_episodes(inst.mdp(), inst.human, &ip, 3000, 17, 4);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(same(a[i], b[i])) << i;

  ExperimentConfig cfg;
  cfg.env_id = "trap";
  cfg.episodes = 500;
  cfg.rollouts = 8;
  cfg.seed = 4;
  const auto s1 = run_single_intervention_experiment(inst, cfg);
  cfg.workers = 4;
  const auto s4 = run_single_intervention_experiment(inst, cfg);
  EXPECT_EQ(to_csv(s1), to_csv(s4));
}

TEST(Simulation, ParallelForPropagatesErrors) {
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 7) throw domain_error("boom");
               }),
               domain_error);
}

TEST(SingleExperiment, TracksExactValuesAndOrdering) {
  const auto inst = solve_instance("ttt:3x3m3:L1", "L1");
  ExperimentConfig cfg;
  cfg.episodes = 3000;
  cfg.rollouts = 16;
  cfg.seed = 8;
  const auto rows = run_single_intervention_experiment(inst, cfg);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) {
    ASSERT_TRUE(r.exact_return.has_value());
    EXPECT_NEAR(r.mean_return, *r.exact_return, 4.0 * r.std_err) << r.strategy;
    EXPECT_EQ(r.gate, "single");
    EXPECT_EQ(r.skill, "L1");
  }
  const auto& human = find(rows, "human");
  const auto& vm = find(rows, "valuemax");
  const auto& ex = find(rows, "expert");
  EXPECT_EQ(human.frequency, 0.0);
  EXPECT_GT(vm.frequency, 0.0);
  EXPECT_LE(vm.frequency, 1.0);
  EXPECT_GE(vm.mean_return, human.mean_return - 3.0 * human.std_err);
  EXPECT_GE(*vm.exact_return, *ex.exact_return - 1e-12);
}

TEST(SingleExperiment, OptimalHumanMakesStrategiesAgree) {
  auto inst = solve_instance("trap", "L1");
  inst.human = inst.optimal.policy;
  inst.human_values = evaluate_policy(inst.mdp(), inst.human);
  inst.delta = delta_table(inst.human_values.v, inst.human_values.q);
  inst.valuemax = valuemax_override(inst.human_values.q);
  ExperimentConfig cfg;
  cfg.episodes = 400;
  cfg.rollouts = 8;
  cfg.seed = 2;
  const auto rows = run_single_intervention_experiment(inst, cfg);
  EXPECT_EQ(find(rows, "human").mean_return, find(rows, "expert").mean_return);
  EXPECT_EQ(find(rows, "human").mean_return, find(rows, "valuemax").mean_return);
  EXPECT_NEAR(*find(rows, "expert").exact_return, *find(rows, "human").exact_return, 1e-12);
}

TEST(BudgetSweep, BaselineAndFullBudget) {
  const auto inst = solve_instance("trap", "L1");
  ExperimentConfig cfg;
  cfg.episodes = 20000;
  cfg.seed = 12;
  const auto rows = run_budget_sweep(inst, cfg, {GateTarget::parse("0"), GateTarget::parse("0.2"), GateTarget::parse("1")});
  ASSERT_EQ(rows.size(), 7u);
  const auto& none = find(rows, "human");
  EXPECT_EQ(none.gate, "none");
  EXPECT_EQ(none.frequency, 0.0);
  EXPECT_FALSE(none.budget_target.has_value());
  EXPECT_NEAR(none.mean_return, inst.j_human, 3.0 * none.std_err);

  const auto& ex1 = find(rows, "expert", 1.0);
  EXPECT_EQ(*ex1.exact_return, inst.j_optimal);
  EXPECT_EQ(ex1.frequency, 1.0);
  EXPECT_EQ(ex1.mean_return, 1.0);
  const auto& vm1 = find(rows, "valuemax", 1.0);
  EXPECT_NEAR(*vm1.exact_return, 0.75, 1e-15);

  for (const char* s : {"expert", "valuemax"}) {
    const auto& zero = find(rows, s, 0.0);
    EXPECT_EQ(zero.frequency, 0.0);
    EXPECT_EQ(zero.mean_return, none.mean_return);
  }
  for (const auto& r : rows) {
    EXPECT_NEAR(r.mean_return, *r.exact_return, 3.0 * r.std_err + 1e-12) << r.strategy << " " << r.gate;
    EXPECT_NEAR(r.frequency, *r.exact_frequency, 4.0 * r.frequency_se + 1e-12) << r.strategy << " " << r.gate;
    if (r.budget_target) {
      EXPECT_LE(*r.exact_frequency, *r.budget_target + 1e-6);
    }
  }
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LE(rows[i - 1].frequency, rows[i].frequency);
}

TEST(BudgetSweep, ThresholdTargets) {
  const auto inst = solve_instance("trap", "L1");
  ExperimentConfig cfg;
  cfg.strategies = {Strategy::valuemax};
  cfg.episodes = 2000;
  const auto rows = run_budget_sweep(inst, cfg, {GateTarget::parse("threshold=10")});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].frequency, 0.0);
  EXPECT_EQ(rows[0].threshold_target, std::optional<double>(10.0));
  EXPECT_EQ(rows[0].gate, "tau=10:p=0");
  EXPECT_THROW(run_budget_sweep(inst, cfg, {}), config_error);
}

TEST(GateTarget, ParseAndPrint) {
  EXPECT_EQ(GateTarget::parse("0.05").kind, GateTarget::Kind::budget);
  EXPECT_EQ(GateTarget::parse("budget=0.05").value, 0.05);
  EXPECT_EQ(GateTarget::parse("threshold=0.2").kind, GateTarget::Kind::threshold);
  EXPECT_EQ(GateTarget::parse("threshold=2").value, 2.0);
  EXPECT_EQ(GateTarget::parse("budget=0.1").to_string(), "budget=0.10000000000000001");
  EXPECT_EQ(GateTarget::parse(GateTarget::parse("threshold=0.3").to_string()).value, 0.3);
  EXPECT_THROW(GateTarget::parse("1.5"), config_error);
  EXPECT_THROW(GateTarget::parse("-0.1"), config_error);
  EXPECT_THROW(GateTarget::parse("budget=abc"), config_error);
  EXPECT_THROW(GateTarget::parse("0.1x"), config_error);
  EXPECT_THROW(GateTarget::parse("threshold=inf"), config_error);
}

TEST(Output, CsvHeaderAndNumbers) {
  RunStats r;
  r.strategy = "expert";
  r.skill = "L2";
  r.gate = "single";
  r.budget_target = 0.1;
  r.frequency = 0.25;
  r.mean_return = 1.0 / 3.0;
  r.std_err = 0.0;
  r.episodes = 10;
  r.seed = 3;
  const auto csv = to_csv({r});
  EXPECT_EQ(csv,
            "strategy,skill,gate,budget_target,frequency,mean_return,std_err,episodes,seed\n"
            "expert,L2,single,0.1,0.25,0.3333333333333333,0,10,3\n");
  for (double x : {0.1, 1.0 / 3.0, 2.0 / 3.0, 1e-300, 123456789.125, 0.30467489281446936}) {
    EXPECT_EQ(std::strtod(format_number(x).c_str(), nullptr), x);
  }
  EXPECT_EQ(format_number(0.5), "0.5");
}

TEST(Estimators, MeanRatioAndPaired) {
  const auto m = estimate_mean({1, 0, 1, 0});
  EXPECT_EQ(m.mean, 0.5);
  EXPECT_DOUBLE_EQ(m.std_err, std::sqrt(0.25 / 4));
  EXPECT_EQ(estimate_mean({}).mean, 0.0);

  // Constant ratio has zero delta-method error.
  const auto r = estimate_ratio({1, 2, 3}, {2, 4, 6});
  EXPECT_EQ(r.mean, 0.5);
  EXPECT_EQ(r.std_err, 0.0);
  // Oracle: SE = sqrt(Σ(n_i − f d_i)² / N) / (d̄ √N).
  const std::vector<double> num{0, 1, 3, 1};
  const std::vector<double> den{2, 2, 4, 1};
  const double f = 5.0 / 9.0;
  double ss = 0.0;
  for (int i = 0; i < 4; ++i) ss += std::pow(num[i] - f * den[i], 2);
  const auto rr = estimate_ratio(num, den);
  EXPECT_DOUBLE_EQ(rr.mean, f);
  EXPECT_DOUBLE_EQ(rr.std_err, std::sqrt(ss / 4) / (9.0 / 4 * 2));

  const auto p = estimate_paired_difference({3, 4, 5}, {1, 2, 3});
  EXPECT_EQ(p.mean, 2.0);
  EXPECT_EQ(p.std_err, 0.0);
  EXPECT_THROW(estimate_paired_difference({1}, {1, 2}), config_error);
}

TEST(PositionDistribution, WeightsFollowOccupancy) {
  const auto inst = solve_instance("trap", "L1");
  const auto dist = position_distribution(inst.mdp(), inst.human, PositionSampling::occupancy);
  const auto occ = occupancy(inst.mdp(), inst.human);
  double total = 0.0;
  for (StateId s = 0; s < inst.mdp().num_states(); ++s) total += occ[s];
  std::vector<double> per_state(inst.mdp().num_states(), 0.0);
  double sum = 0.0;
  for (std::size_t k = 0; k < dist.positions.size(); ++k) {
    per_state[dist.positions[k].state] += dist.weights[k];
    sum += dist.weights[k];
  }
  for (StateId s = 0; s < inst.mdp().num_states(); ++s) EXPECT_NEAR(per_state[s], occ[s] / total, 1e-15);
  EXPECT_NEAR(sum, 1.0, 1e-15);
  const auto start = position_distribution(inst.mdp(), inst.human, PositionSampling::start);
  ASSERT_EQ(start.positions.size(), 1u);
  EXPECT_EQ(start.positions[0].state, trap::kStart);
}
