#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "advisor/io.hpp"
#include "oracles.hpp"

using namespace advisor;

namespace {

void expect_identical(const TabularMDP& a, const TabularMDP& b) {
  ASSERT_EQ(a.num_states(), b.num_states());
  EXPECT_EQ(a.horizon(), b.horizon());
  EXPECT_EQ(a.discount(), b.discount());
  EXPECT_EQ(a.start_distribution(), b.start_distribution());
  for (StateId s = 0; s < a.num_states(); ++s) {
    EXPECT_EQ(a.state_name(s), b.state_name(s));
    EXPECT_EQ(a.is_terminal(s), b.is_terminal(s));
    ASSERT_EQ(a.num_actions(s), b.num_actions(s));
    for (ActionId x = 0; x < a.num_actions(s); ++x) {
      EXPECT_EQ(a.reward(s, x), b.reward(s, x));
      const auto ta = a.transitions(s, x);
      const auto tb = b.transitions(s, x);
      ASSERT_EQ(ta.size(), tb.size());
      for (std::size_t i = 0; i < ta.size(); ++i) {
        EXPECT_EQ(ta[i].next, tb[i].next);
        EXPECT_EQ(ta[i].prob, tb[i].prob);
        EXPECT_EQ(ta[i].reward, tb[i].reward);
      }
    }
  }
}

}  // namespace

TEST(MdpJson, RandomModelsRoundTripBitExactly) {
  std::mt19937_64 gen(31);
  for (int i = 0; i < 50; ++i) {
    const auto mdp = oracle::random_mdp(gen);
    const auto doc = mdp_to_json(mdp);
    const auto back = mdp_from_json(json::parse(doc.dump()));
    expect_identical(mdp, back);
    EXPECT_EQ(mdp_to_json(back).dump(), doc.dump());
  }
}

TEST(MdpJson, ShippedEnvironmentsRoundTrip) {
  for (const char* id : {"trap", "grid:cliff", "ttt:3x3m3:L2"}) {
    const auto env = make_environment(id);
    expect_identical(env.mdp, mdp_from_json(mdp_to_json(env.mdp)));
  }
}

TEST(MdpJson, HandWrittenDocument) {
  const auto doc = json::parse(R"({
    "states": ["a", "b", "end"], "actions": [["go", "wait"], ["go"], []],
    "transitions": [[0, 0, 1, "0.5"], [0, 0, 2, "0.5"], [0, 1, 0, "1"], [1, 0, 2, "1", "1"]],
    "rewards": [[0, 0, "0.25"]],
    "terminals": [2], "start": [[0, "1"]], "horizon": 3})");
  const auto mdp = mdp_from_json(doc);
  EXPECT_EQ(mdp.num_actions(0), 2u);
  EXPECT_EQ(mdp.reward(0, 0), 0.25);
  EXPECT_EQ(mdp.reward(0, 1), 0.0);
  EXPECT_EQ(mdp.reward(1, 0), 1.0);
  EXPECT_EQ(mdp.transitions(0, 0)[0].reward, 0.25);
  EXPECT_TRUE(mdp.is_terminal(2));
}

TEST(MdpJson, MalformedDocumentsAreConfigErrors) {
  EXPECT_THROW(mdp_from_json(json::parse(R"({"states": ["a"]})")), config_error);
  EXPECT_THROW(mdp_from_json(json::parse(R"({
    "states": ["a", "t"], "actions": [["x"], []], "transitions": [[0, 0, 1, "0.4"]],
    "rewards": [], "terminals": [1], "start": [[0, "1"]], "horizon": 1})")),
               config_error);
  EXPECT_THROW(mdp_from_json(json::parse(R"({
    "states": ["a", "t"], "actions": [["x"], []], "transitions": [[0, 3, 1, "1"]],
    "rewards": [], "terminals": [1], "start": [[0, "1"]], "horizon": 1})")),
               config_error);
}

TEST(Decimal, StrictParsing) {
  EXPECT_EQ(from_decimal(json("0.1")), 0.1);
  EXPECT_EQ(from_decimal(json(0.25)), 0.25);
  EXPECT_EQ(from_decimal(json("-1e-3")), -1e-3);
  EXPECT_THROW(from_decimal(json("")), config_error);
  EXPECT_THROW(from_decimal(json("0.1 ")), config_error);
  EXPECT_THROW(from_decimal(json("abc")), config_error);
  EXPECT_THROW(from_decimal(json("1e999")), config_error);
  EXPECT_THROW(from_decimal(json(true)), config_error);
  for (double x : {0.1, 1.0 / 7.0, 5e-324, 1.7976931348623157e308}) EXPECT_EQ(from_decimal(json(to_decimal(x))), x);
}

TEST(Manifest, RecordsEveryDefault) {
  ExperimentConfig cfg;
  cfg.env_id = "trap";
  cfg.seed = 18446744073709551615ULL;
  const auto m = run_manifest("sweep", cfg, {GateTarget::parse("0.05")}, "sweep.csv");
  for (const char* key :
       {"command", "env", "skill", "strategies", "targets", "episodes", "rollouts", "seed", "position_sampling", "csv"}) {
    EXPECT_TRUE(m.contains(key)) << key;
  }
  EXPECT_FALSE(m.contains("workers"));
  EXPECT_EQ(m["seed"], "18446744073709551615");
  EXPECT_EQ(m["episodes"], kDefaultEpisodes);
  EXPECT_EQ(m["rollouts"], kDefaultRollouts);
  EXPECT_EQ(m["strategies"], json({"human", "expert", "valuemax"}));
  EXPECT_EQ(m["targets"], json({"budget=0.050000000000000003"}));
}

TEST(Tables, InstanceDump) {
  const auto inst = solve_instance("trap", "L1");
  const auto j = instance_tables_to_json(inst);
  EXPECT_EQ(j["env"], "trap");
  EXPECT_EQ(from_decimal(j["j_human"]), inst.j_human);
  EXPECT_EQ(from_decimal(j["j_optimal"]), 1.0);
  ASSERT_EQ(j["states"].size(), inst.mdp().num_states());
  const auto& start = j["states"][trap::kStart];
  EXPECT_EQ(start["actions"].size(), 4u);
  EXPECT_EQ(from_decimal(start["delta"][trap::kSafeMove]), inst.delta(trap::kStart, trap::kSafeMove));
}

TEST(Files, WriteAndRead) {
  const auto dir = std::filesystem::temp_directory_path() / "advisor_io_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "x.json").string();
  write_text_file(path, R"({"a": 1})");
  EXPECT_EQ(read_json_file(path)["a"], 1);
  write_text_file(path, "{");
  EXPECT_THROW(read_json_file(path), config_error);
  EXPECT_THROW(read_json_file((dir / "missing.json").string()), config_error);
  EXPECT_THROW(write_text_file((dir / "no" / "such" / "dir.txt").string(), "x"), domain_error);
  std::filesystem::remove_all(dir);
}
