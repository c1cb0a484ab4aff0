#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "advisor/env/registry.hpp"
#include "advisor/solve.hpp"
#include "oracles.hpp"

using namespace advisor;

namespace {

GridworldSpec make_grid(std::vector<std::string> rows, double slip, int horizon) {
  auto spec = GridworldSpec::from_map(rows);
  spec.slip = slip;
  spec.horizon = horizon;
  return spec;
}

StateId state(const GridworldModel& m, int cell, int t) {
  for (StateId s = 0; s < m.mdp.num_states(); ++s) {
    if (m.cell_of[s] == cell && m.time_of[s] == t) return s;
  }
  ADD_FAILURE() << "no state for cell " << cell << " at t=" << t;
  return 0;
}

double prob_to(const TabularMDP& mdp, StateId s, ActionId a, StateId target) {
  double p = 0.0;
  for (const auto& t : mdp.transitions(s, a)) p += t.next == target ? t.prob : 0.0;
  return p;
}

}  // namespace

TEST(Gridworld, AdjacentGoalWithoutSlipIsWorthGoalReward) {
  const auto mdp = build_gridworld(make_grid({"SG", ".."}, 0.0, 4));
  const auto opt = value_iteration(mdp);
  EXPECT_EQ(expected_return(mdp, opt.v), 1.0);
}

TEST(Gridworld, TwoByTwoOptimumMatchesPolicyEnumeration) {
  for (int T : {2, 4}) {
    const auto mdp = build_gridworld(make_grid({"S.", ".G"}, 0.0, T));
    const double vstar = expected_return(mdp, value_iteration(mdp).v);
    EXPECT_EQ(vstar, 1.0);
    if (T == 2) {
      double best = 0.0;
      oracle::for_each_deterministic_policy(mdp, [&](const StochasticPolicy& pi) {
        best = std::max(best, oracle::tree_return(mdp, pi));
      });
      EXPECT_EQ(best, vstar);
    }
  }
}

TEST(Gridworld, FullSlipMakesOppositeActionsEquivalent) {
  const auto spec = make_grid({"S..", ".#.", "..G"}, 1.0, 3);
  const auto mdp = build_gridworld(spec);
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (mdp.is_terminal(s)) continue;
    EXPECT_EQ(mdp.transition_vector(s, grid::kUp), mdp.transition_vector(s, grid::kDown));
    EXPECT_EQ(mdp.transition_vector(s, grid::kLeft), mdp.transition_vector(s, grid::kRight));
  }
  // Flipping any action to its opposite never changes a policy's value.
  const auto small = build_gridworld(make_grid({"S.", ".G"}, 1.0, 2));
  oracle::for_each_deterministic_policy(small, [&](const StochasticPolicy& pi) {
    std::vector<ActionId> flipped(small.num_states(), 0);
    for (StateId s = 0; s < small.num_states(); ++s) {
      const ActionId a = argmax(pi.row(s));
      flipped[s] = small.is_terminal(s) ? 0 : (a + 2) % 4;
    }
    EXPECT_EQ(oracle::tree_return(small, pi), oracle::tree_return(small, deterministic_policy(small.layout(), flipped)));
  });
}

TEST(Gridworld, SlipSplitsOverPerpendicularMoves) {
  const auto spec = make_grid({".....", ".....", "..S..", ".....", "....G"}, 0.2, 6);
  const auto m = build_gridworld_model(spec);
  const StateId s = state(m, 12, 0);
  EXPECT_DOUBLE_EQ(prob_to(m.mdp, s, grid::kUp, state(m, 7, 1)), 0.8);
  EXPECT_DOUBLE_EQ(prob_to(m.mdp, s, grid::kUp, state(m, 11, 1)), 0.1);
  EXPECT_DOUBLE_EQ(prob_to(m.mdp, s, grid::kUp, state(m, 13, 1)), 0.1);
  EXPECT_EQ(prob_to(m.mdp, s, grid::kUp, state(m, 17, 1)), 0.0);
}

TEST(Gridworld, BlockedMassStaysInPlace) {
  const auto spec = make_grid({"S#G", "..."}, 0.2, 5);
  const auto m = build_gridworld_model(spec);
  const StateId s = state(m, 0, 0);
  // Right hits the wall (0.8) and up hits the edge (0.1): 0.9 stays, 0.1 goes down.
  EXPECT_NEAR(prob_to(m.mdp, s, grid::kRight, state(m, 0, 1)), 0.9, 1e-15);
  EXPECT_NEAR(prob_to(m.mdp, s, grid::kRight, state(m, 3, 1)), 0.1, 1e-15);
  EXPECT_EQ(m.mdp.transitions(s, grid::kRight).size(), 2u);
}

TEST(Gridworld, ReturnsAreNormalized) {
  for (const auto& [name, text] : shipped_gridworlds()) {
    const auto mdp = build_gridworld(shipped_gridworld(name));
    for (StateId s = 0; s < mdp.num_states(); ++s) {
      for (ActionId a = 0; a < mdp.num_actions(s); ++a) {
        for (const auto& t : mdp.transitions(s, a)) {
          EXPECT_GE(t.reward, 0.0);
          EXPECT_LE(t.reward, 1.0);
        }
      }
    }
    const auto opt = value_iteration(mdp);
    for (StateId s = 0; s < mdp.num_states(); ++s) {
      EXPECT_GE(opt.v[s], 0.0);
      EXPECT_LE(opt.v[s], 1.0 + 1e-12);
    }
  }
}

TEST(Gridworld, CorridorIsForcedWin) {
  const auto mdp = build_gridworld(shipped_gridworld("corridor"));
  EXPECT_EQ(expected_return(mdp, value_iteration(mdp).v), 1.0);
}

TEST(Gridworld, CliffPenalizesSteps) {
  const auto spec = shipped_gridworld("cliff");
  const auto mdp = build_gridworld(spec);
  const double j = expected_return(mdp, value_iteration(mdp).v);
  EXPECT_GT(j, 0.5);
  EXPECT_LT(j, 1.0);
}

TEST(Gridworld, HazardEndsTheEpisode) {
  const auto m = build_gridworld_model(make_grid({"SHG"}, 0.0, 3));
  const StateId s = state(m, 0, 0);
  const auto ts = m.mdp.transitions(s, grid::kRight);
  ASSERT_EQ(ts.size(), 1u);
  EXPECT_TRUE(m.mdp.is_terminal(ts[0].next));
  EXPECT_EQ(m.mdp.state_name(ts[0].next), "hazard");
  EXPECT_EQ(ts[0].reward, 0.0);
}

TEST(Gridworld, SpecValidation) {
  EXPECT_THROW(GridworldSpec::from_map({"S..", ".."}), config_error);
  EXPECT_THROW(GridworldSpec::from_map({"S.X"}), config_error);
  EXPECT_THROW(GridworldSpec::from_map({"..G"}), config_error);
  EXPECT_THROW(build_gridworld(make_grid({"S.."}, 0.0, 3)), config_error);  // no goal
  EXPECT_THROW(build_gridworld(make_grid({"S.G"}, 1.5, 3)), config_error);
  EXPECT_THROW(build_gridworld(make_grid({"S.G"}, 0.0, 0)), config_error);
}

TEST(Gridworld, UnreachableGoalOnlyWarns) {
  testing::internal::CaptureStderr();
  const auto mdp = build_gridworld(make_grid({"S#G"}, 0.0, 3));
  const auto err = testing::internal::GetCapturedStderr();
  EXPECT_NE(err.find("unreachable"), std::string::npos);
  EXPECT_EQ(expected_return(mdp, value_iteration(mdp).v), 0.0);
}

TEST(Gridworld, JsonRoundTrip) {
  for (const auto& [name, text] : shipped_gridworlds()) {
    const auto spec = shipped_gridworld(name);
    const auto back = GridworldSpec::from_json(spec.to_json());
    EXPECT_EQ(back.to_map(), spec.to_map());
    EXPECT_EQ(back.slip, spec.slip);
    EXPECT_EQ(back.horizon, spec.horizon);
    EXPECT_EQ(back.step_reward, spec.step_reward);
  }
  EXPECT_THROW(GridworldSpec::from_json(nlohmann::json::parse(R"({"slip": 0.1})")), config_error);
}

TEST(Gridworld, LoadsFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "advisor_grid_test.json";
  {
    std::ofstream out(path);
    out << R"({"name": "tiny", "map": ["S.G"], "slip": 0.0, "horizon": 4})";
  }
  const auto env = make_environment("grid:" + path.string());
  EXPECT_EQ(expected_return(env.mdp, value_iteration(env.mdp).v), 1.0);
  std::filesystem::remove(path);
  EXPECT_THROW(make_environment("grid:/nonexistent/grid.json"), config_error);
  EXPECT_THROW(make_environment("grid:maze"), config_error);
}

TEST(Gridworld, RenderAndLabels) {
  const auto env = make_environment("grid:open");
  const auto& s0 = env.mdp.start_distribution();
  const auto start = static_cast<StateId>(std::find(s0.begin(), s0.end(), 1.0) - s0.begin());
  const auto r = env.render(start);
  EXPECT_EQ(r.kind, "grid");
  EXPECT_EQ(r.rows, 4);
  EXPECT_EQ(r.cols, 4);
  EXPECT_EQ(r.cells[0], "A...");
  EXPECT_EQ(r.cells[3], "...G");
  EXPECT_EQ(env.action_labels(start), (std::vector<std::string>{"up", "right", "down", "left"}));
  EXPECT_EQ(env.mdp.state_name(start), "r0c0t0");
  const auto goal = env.find_state("goal");
  ASSERT_TRUE(goal.has_value());
  EXPECT_EQ(env.action_label(*goal, 0), "-");
  EXPECT_TRUE(env.render(*goal).terminal);
}

TEST(Gridworld, FeaturesCompareAgainstStartCell) {
  const auto env = make_environment("grid:open");
  ASSERT_EQ(env.concepts.features.size(), 3u);
  const auto start = env.find_state("r0c0t0");
  ASSERT_TRUE(start.has_value());
  for (const auto& v : env.concepts.extract(*start)) EXPECT_EQ(v.player, v.opponent);
  // r2c1 sits beside the hazard at r2c2, closer to the goal than the start.
  const auto near = env.find_state("r2c1t3");
  ASSERT_TRUE(near.has_value());
  const auto f = env.concepts.extract(*near);
  EXPECT_LT(f[0].player, f[0].opponent);
  EXPECT_EQ(f[1].player, 1.0);
  EXPECT_EQ(f[2].player, 1.0);
  EXPECT_EQ(f[2].opponent, 0.0);
}
