#pragma once

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "advisor/error.hpp"
#include "advisor/instance.hpp"
#include "advisor/mdp.hpp"
#include "advisor/sim.hpp"

namespace advisor {

using nlohmann::json;

/// Decimal text that reads back to the same double.
inline std::string to_decimal(double x) { return format_number(x); }

inline double from_decimal(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (!j.is_string()) throw config_error("expected a decimal string, got " + j.dump());
  const auto text = j.get<std::string>();
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || (errno == ERANGE && std::isinf(x))) {
    throw config_error("malformed decimal: " + text);
  }
  return x;
}

/// Interchange document:
///
///     {"states": ["s0", ...], "actions": [["a0", "a1"], ...],
///      "transitions": [[s, a, s2, "p", "r"], ...], "rewards": [[s, a, "r"], ...],
///      "terminals": [4, 5], "start": [[0, "1"]], "horizon": 3, "discount": "1",
///      "reward_range": ["0", "1"]}
///
/// `r` on a transition is the realized reward of that outcome; `rewards`
/// holds the expected r(s,a). Terminal self-loops are implicit.
inline json mdp_to_json(const TabularMDP& mdp, const std::vector<std::vector<std::string>>& action_names = {}) {
  json states = json::array();
  json actions = json::array();
  json transitions = json::array();
  json rewards = json::array();
  json terminals = json::array();
  json start = json::array();
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    states.push_back(mdp.state_name(s));
    json names = json::array();
    if (mdp.is_terminal(s)) {
      terminals.push_back(s);
    } else {
      for (ActionId a = 0; a < mdp.num_actions(s); ++a) {
        names.push_back(s < action_names.size() ? action_names[s].at(a) : "a" + std::to_string(a));
        rewards.push_back({s, a, to_decimal(mdp.reward(s, a))});
        for (const auto& t : mdp.transitions(s, a)) {
          transitions.push_back({s, a, t.next, to_decimal(t.prob), to_decimal(t.reward)});
        }
      }
    }
    actions.push_back(std::move(names));
    if (mdp.start_distribution()[s] > 0.0) start.push_back({s, to_decimal(mdp.start_distribution()[s])});
  }
  return {{"states", states},
          {"actions", actions},
          {"transitions", transitions},
          {"rewards", rewards},
          {"terminals", terminals},
          {"start", start},
          {"horizon", mdp.horizon()},
          {"discount", to_decimal(mdp.discount())},
          {"reward_range", {to_decimal(mdp.reward_range().min), to_decimal(mdp.reward_range().max)}}};
}

inline TabularMDP mdp_from_json(const json& j) {
  try {
    MdpBuilder b;
    const auto& states = j.at("states");
    const auto& actions = j.at("actions");
    if (actions.size() != states.size()) throw config_error("`actions` needs one entry per state");
    std::vector<char> terminal(states.size(), 0);
    for (const auto& t : j.at("terminals")) terminal.at(t.get<std::size_t>()) = 1;
    for (std::size_t s = 0; s < states.size(); ++s) b.add_state(states[s].get<std::string>(), terminal[s] != 0);

    std::vector<std::vector<std::vector<Transition>>> outcomes(states.size());
    std::vector<std::vector<double>> expected(states.size());
    for (std::size_t s = 0; s < states.size(); ++s) {
      if (terminal[s]) continue;
      outcomes[s].resize(actions[s].size());
      expected[s].assign(actions[s].size(), 0.0);
    }
    auto slot = [&](const json& row, auto& table) -> auto& {
      const auto s = row.at(0).get<std::size_t>();
      const auto a = row.at(1).get<std::size_t>();
      if (s >= states.size() || terminal[s] || a >= table[s].size()) {
        throw config_error("reference to an unknown state-action pair: " + row.dump());
      }
      return table[s][a];
    };
    std::vector<std::vector<bool>> has_reward(states.size());
    std::vector<std::vector<bool>> realized(states.size());
    for (std::size_t s = 0; s < states.size(); ++s) {
      has_reward[s].assign(expected[s].size(), false);
      realized[s].assign(expected[s].size(), false);
    }
    for (const auto& row : j.at("transitions")) {
      const double reward = row.size() > 4 ? from_decimal(row[4]) : 0.0;
      slot(row, outcomes).push_back({row.at(2).get<StateId>(), from_decimal(row.at(3)), reward});
      if (row.size() > 4) realized[row[0].get<std::size_t>()][row[1].get<std::size_t>()] = true;
    }
    for (const auto& row : j.at("rewards")) {
      slot(row, expected) = from_decimal(row.at(2));
      has_reward[row.at(0).get<std::size_t>()][row.at(1).get<std::size_t>()] = true;
    }
    for (std::size_t s = 0; s < states.size(); ++s) {
      for (std::size_t a = 0; a < outcomes[s].size(); ++a) {
        // Outcomes without an explicit reward carry the expected reward.
        auto& outs = outcomes[s][a];
        if (!realized[s][a]) {
          for (auto& t : outs) t.reward = expected[s][a];
        }
        if (has_reward[s][a]) {
          b.add_action_with_expected(s, expected[s][a], std::move(outs));
        } else {
          b.add_action(s, std::move(outs));
        }
      }
    }
    std::vector<double> start(states.size(), 0.0);
    for (const auto& row : j.at("start")) start.at(row.at(0).get<std::size_t>()) += from_decimal(row.at(1));
    b.set_start(std::move(start));
    b.set_horizon(j.at("horizon").get<int>());
    if (j.contains("discount")) b.set_discount(from_decimal(j["discount"]));
    if (j.contains("reward_range")) b.set_reward_range({from_decimal(j["reward_range"].at(0)), from_decimal(j["reward_range"].at(1))});
    return b.build();
  } catch (const json::exception& e) {
    throw config_error(std::string("malformed MDP document: ") + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw config_error("malformed JSON in " + path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw domain_error("cannot write " + path);
  out << text;
  if (!out) throw domain_error("failed writing " + path);
}

/// Manifest written next to every CSV: the full configuration, defaults
/// included, so the run can be repeated exactly. Worker count is left out
/// because it never changes the output.
inline json run_manifest(const std::string& command, const ExperimentConfig& config,
                         const std::vector<GateTarget>& targets, const std::string& csv_file) {
  json strategies = json::array();
  for (auto s : config.strategies) strategies.push_back(to_string(s));
  json gate_targets = json::array();
  for (const auto& t : targets) gate_targets.push_back(t.to_string());
  return {{"command", command},
          {"env", config.env_id},
          {"skill", config.skill},
          {"strategies", strategies},
          {"targets", gate_targets},
          {"episodes", config.episodes},
          {"rollouts", config.rollouts},
          {"seed", std::to_string(config.seed)},
          {"position_sampling", config.sampling == PositionSampling::occupancy ? "occupancy" : "start"},
          {"csv", csv_file}};
}

/// Per-state table dump of a solved instance, with J values.
inline json instance_tables_to_json(const SolvedInstance& inst) {
  const auto& mdp = inst.mdp();
  auto row_json = [](std::span<const double> row) {
    json out = json::array();
    for (double x : row) out.push_back(to_decimal(x));
    return out;
  };
  json states = json::array();
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    states.push_back({{"state", mdp.state_name(s)},
                      {"terminal", mdp.is_terminal(s)},
                      {"actions", inst.env->action_labels(s)},
                      {"v_star", to_decimal(inst.optimal.v[s])},
                      {"q_star", row_json(inst.optimal.q.row(s))},
                      {"v_human", to_decimal(inst.human_values.v[s])},
                      {"q_human", row_json(inst.human_values.q.row(s))},
                      {"delta", row_json(inst.delta.row(s))},
                      {"pi_human", row_json(inst.human.row(s))}});
  }
  return {{"env", inst.env->id},
          {"skill", inst.skill.label},
          {"j_human", to_decimal(inst.j_human)},
          {"j_optimal", to_decimal(inst.j_optimal)},
          {"states", states}};
}

}  // namespace advisor
