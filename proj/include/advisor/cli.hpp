#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "advisor/error.hpp"
#include "advisor/http_api.hpp"
#include "advisor/instance.hpp"
#include "advisor/io.hpp"
#include "advisor/sim.hpp"

namespace advisor::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

inline const std::vector<double> kDefaultSweepBudgets{0.0, 0.01, 0.05, 0.1, 0.25, 0.5, 1.0};
inline constexpr double kDefaultConceptBudget = 0.05;

/// Seed from --seed, else ADVISOR_LAB_SEED, else 0.
inline std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("ADVISOR_LAB_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const std::string text(env);
      const auto v = std::stoull(text, &used);
      if (used == text.size() && text[0] != '-') return v;
    } catch (const std::exception&) {
    }
    throw config_error("ADVISOR_LAB_SEED must be a non-negative integer");
  }
  return 0;
}

struct Options {
  std::string env;
  std::string skill = "L1";
  std::vector<std::string> strategies;
  std::vector<double> budgets;
  std::vector<double> thresholds;
  std::size_t episodes = kDefaultEpisodes;
  std::size_t rollouts = kDefaultRollouts;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  std::string out = ".";
  std::size_t top_k = 10;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string log;
};

inline ExperimentConfig make_config(const Options& o, std::vector<Strategy> fallback) {
  ExperimentConfig c;
  c.env_id = o.env;
  c.skill = o.skill;
  c.strategies.clear();
  for (const auto& s : o.strategies) c.strategies.push_back(parse_strategy(s));
  if (c.strategies.empty()) c.strategies = std::move(fallback);
  c.episodes = o.episodes;
  c.rollouts = o.rollouts;
  c.seed = resolve_seed(o.seed);
  c.workers = o.workers;
  c.validate();
  return c;
}

inline std::string output_path(const Options& o, const std::string& name) {
  std::filesystem::create_directories(o.out);
  return (std::filesystem::path(o.out) / name).string();
}

inline void write_run(const Options& o, const std::string& command, const ExperimentConfig& config,
                      const std::vector<GateTarget>& targets, const std::string& csv, std::ostream& out) {
  const std::string csv_name = command + ".csv";
  write_text_file(output_path(o, csv_name), csv);
  write_text_file(output_path(o, command + ".manifest.json"), run_manifest(command, config, targets, csv_name).dump(2) + "\n");
  out << csv;
}

inline int cmd_solve(const Options& o, std::ostream& out) {
  const auto inst = solve_instance(o.env, o.skill);
  std::vector<std::vector<std::string>> names;
  for (StateId s = 0; s < inst.mdp().num_states(); ++s) names.push_back(inst.env->action_labels(s));
  write_text_file(output_path(o, "mdp.json"), mdp_to_json(inst.mdp(), names).dump(1) + "\n");
  write_text_file(output_path(o, "tables.json"), instance_tables_to_json(inst).dump(1) + "\n");
  out << "env " << inst.env->id << " skill " << inst.skill.label << " states " << inst.mdp().num_states() << "\n";
  out << "J(pi_H) = " << to_decimal(inst.j_human) << "\n";
  out << "J(pi*) = " << to_decimal(inst.j_optimal) << "\n";
  return kExitOk;
}

inline int cmd_single(const Options& o, std::ostream& out) {
  const auto config = make_config(o, {Strategy::human, Strategy::expert, Strategy::valuemax});
  const auto inst = solve_instance(o.env, o.skill);
  write_run(o, "single", config, {}, to_csv(run_single_intervention_experiment(inst, config)), out);
  return kExitOk;
}

inline std::vector<GateTarget> sweep_targets(const Options& o) {
  std::vector<GateTarget> targets;
  for (double b : o.budgets) targets.push_back(GateTarget::parse("budget=" + to_decimal(b)));
  for (double t : o.thresholds) targets.push_back(GateTarget::parse("threshold=" + to_decimal(t)));
  if (targets.empty()) {
    for (double b : kDefaultSweepBudgets) targets.push_back({GateTarget::Kind::budget, b});
  }
  return targets;
}

inline int cmd_sweep(const Options& o, std::ostream& out) {
  const auto config = make_config(o, {Strategy::human, Strategy::expert, Strategy::valuemax});
  const auto targets = sweep_targets(o);
  const auto inst = solve_instance(o.env, o.skill);
  write_run(o, "sweep", config, targets, to_csv(run_budget_sweep(inst, config, targets)), out);
  return kExitOk;
}

inline int cmd_concepts(const Options& o, std::ostream& out) {
  const auto config = make_config(o, {Strategy::valuemax});
  if (config.strategies.size() != 1) throw config_error("concepts takes exactly one strategy");
  if (!o.thresholds.empty() && !o.budgets.empty()) throw config_error("give either --budget or --threshold");
  if (o.budgets.size() > 1 || o.thresholds.size() > 1) throw config_error("concepts takes a single gate target");
  GateTarget target{GateTarget::Kind::budget, kDefaultConceptBudget};
  if (!o.budgets.empty()) target = GateTarget::parse("budget=" + to_decimal(o.budgets.front()));
  if (!o.thresholds.empty()) target = GateTarget::parse("threshold=" + to_decimal(o.thresholds.front()));
  const auto inst = solve_instance(o.env, o.skill);
  auto report = run_concept_analysis(inst, config.strategies.front(), target, config.episodes, config.seed, config.workers);
  report.rows = report.top(o.top_k);
  write_run(o, "concepts", config, {target}, report.to_csv(), out);
  return kExitOk;
}

inline int cmd_serve(const Options& o, std::ostream& out) {
  SessionManager sessions(o.log);
  httplib::Server server;
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  register_routes(server, sessions);
  out << "listening on http://" << o.host << ":" << o.port << "\n" << std::flush;
  if (!server.listen(o.host, o.port)) throw domain_error("cannot listen on " + o.host + ":" + std::to_string(o.port));
  return kExitOk;
}

/// Entry point shared by the binary and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"advisor_lab: budgeted intervention experiments on tabular environments"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub, bool env_positional) {
    if (env_positional) {
      sub->add_option("env_id", o.env, "environment id (positional form)");
      sub->add_option("skill_id", o.skill, "skill (positional form)");
    }
    sub->add_option("--env", o.env, "environment id: trap, grid:<name|file.json>, ttt:<k>x<k>m<m>:<opponent>");
    sub->add_option("--skill", o.skill, "L1..L5, eps:L1..eps:L5, beta=<x> or eps=<x>")->capture_default_str();
    sub->add_option("--seed", o.seed, "master seed (default: $ADVISOR_LAB_SEED or 0)");
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
  };
  auto experiment = [&](CLI::App* sub) {
    sub->add_option("--strategy", o.strategies, "human, expert or valuemax (repeatable)");
    sub->add_option("--episodes", o.episodes, "episodes N (positions for `single`)")->capture_default_str();
    sub->add_option("--workers", o.workers, "worker threads; does not change results")->capture_default_str();
  };

  auto* solve = app.add_subcommand("solve", "solve an environment and write its tables");
  common(solve, true);
  auto* single = app.add_subcommand("single", "single-intervention experiment");
  common(single, false);
  experiment(single);
  single->add_option("--rollouts", o.rollouts, "continuations M per position")->capture_default_str();
  auto* sweep = app.add_subcommand("sweep", "budget or threshold sweep");
  common(sweep, false);
  experiment(sweep);
  sweep->add_option("--budget", o.budgets, "frequency budget B (repeatable)");
  sweep->add_option("--threshold", o.thresholds, "raw threshold tau (repeatable)");
  auto* concepts = app.add_subcommand("concepts", "concept frequency report");
  common(concepts, false);
  experiment(concepts);
  concepts->add_option("--budget", o.budgets, "frequency budget B")->expected(1);
  concepts->add_option("--threshold", o.thresholds, "raw threshold tau")->expected(1);
  concepts->add_option("--top-k", o.top_k, "rows to keep")->capture_default_str();
  auto* serve = app.add_subcommand("serve", "run the session server");
  serve->add_option("--host", o.host)->capture_default_str();
  serve->add_option("--port", o.port)->capture_default_str();
  serve->add_option("--log", o.log, "append-only session log (JSON lines)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (!serve->parsed() && o.env.empty()) throw config_error("--env is required");
    if (solve->parsed()) return cmd_solve(o, out);
    if (single->parsed()) return cmd_single(o, out);
    if (sweep->parsed()) return cmd_sweep(o, out);
    if (concepts->parsed()) return cmd_concepts(o, out);
    return cmd_serve(o, out);
  } catch (const config_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace advisor::cli
