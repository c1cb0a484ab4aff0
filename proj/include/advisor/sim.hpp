#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "advisor/budgeted.hpp"
#include "advisor/concepts.hpp"
#include "advisor/error.hpp"
#include "advisor/instance.hpp"
#include "advisor/intervene.hpp"
#include "advisor/rng.hpp"
#include "advisor/trajectory.hpp"

namespace advisor {

inline constexpr std::size_t kDefaultRollouts = 64;
inline constexpr std::size_t kDefaultEpisodes = 2560;

/// Where a rollout begins: a state and the stage at which it is entered.
struct RolloutStart {
  StateId state = 0;
  int stage = 1;
};

namespace detail {

inline const Transition& sample_transition(const TabularMDP& mdp, StateId s, ActionId a, double u) {
  const auto ts = mdp.transitions(s, a);
  double acc = 0.0;
  for (const auto& t : ts) {
    acc += t.prob;
    if (u < acc) return t;
  }
  return ts.back();
}

}  // namespace detail

/// Samples one episode of π_H, composed with `ip` when given. Every step
/// consumes exactly three uniforms (gate, action, transition) whether or not
/// they matter, so runs that share a stream share their randomness.
inline Trajectory rollout(const TabularMDP& mdp, const StochasticPolicy& pi_h, RngStream& rng,
                          const InterventionPolicy* ip = nullptr, std::optional<RolloutStart> from = std::nullopt) {
  RolloutStart at = from ? *from : RolloutStart{sample_index(mdp.start_distribution(), rng.uniform()), 1};
  if (at.state >= mdp.num_states() || at.stage < 1) throw config_error("rollout start is out of range");
  int remaining = ip && ip->max_interventions ? *ip->max_interventions : -1;
  Trajectory traj;
  StateId s = at.state;
  for (int t = at.stage; t <= mdp.horizon() && !mdp.is_terminal(s); ++t) {
    const double u_gate = rng.uniform();
    const double u_action = rng.uniform();
    const double u_next = rng.uniform();
    bool fire = false;
    if (ip && remaining != 0) {
      const double g = ip->gate(t)[s];
      fire = g >= 1.0 || (g > 0.0 && u_gate < g);
    }
    const auto& policy = fire ? ip->override_policy(t) : pi_h;
    const ActionId a = sample_index(policy.row(s), u_action);
    if (fire && remaining > 0) --remaining;
    const auto& tr = detail::sample_transition(mdp, s, a, u_next);
    traj.steps.push_back({s, a, tr.reward, fire});
    s = tr.next;
  }
  traj.final_state = s;
  return traj;
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Callers write to
/// slot i only, so results do not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Mean and population-variance standard error of per-unit values; for 0/1
/// outcomes the SE is sqrt(p̄(1−p̄)/N).
struct MeanEstimate {
  double mean = 0.0;
  double std_err = 0.0;
};

inline MeanEstimate estimate_mean(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  const auto n = static_cast<double>(xs.size());
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / n / n)};
}

/// Ratio estimate Σ num / Σ den with a delta-method standard error.
inline MeanEstimate estimate_ratio(const std::vector<double>& num, const std::vector<double>& den) {
  double sn = 0.0;
  double sd = 0.0;
  for (std::size_t i = 0; i < num.size(); ++i) {
    sn += num[i];
    sd += den[i];
  }
  if (sd <= 0.0) return {};
  const double f = sn / sd;
  const auto n = static_cast<double>(num.size());
  double ss = 0.0;
  for (std::size_t i = 0; i < num.size(); ++i) ss += (num[i] - f * den[i]) * (num[i] - f * den[i]);
  const double mean_den = sd / n;
  return {f, std::sqrt(ss / n) / (mean_den * std::sqrt(n))};
}

/// Mean and SE of the per-unit difference a_i − b_i. Under common random
/// numbers this is the standard error that applies to a comparison.
inline MeanEstimate estimate_paired_difference(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw config_error("paired samples differ in size");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return estimate_mean(d);
}

/// How to address a gate in a sweep: a budget B (calibrated) or a raw threshold τ.
struct GateTarget {
  enum class Kind { budget, threshold } kind = Kind::budget;
  double value = 0.0;

  /// "budget=0.05", "threshold=0.2", or a bare number (a budget).
  static GateTarget parse(std::string_view text) {
    GateTarget g;
    std::string_view number = text;
    if (text.starts_with("budget=")) {
      number = text.substr(7);
    } else if (text.starts_with("threshold=")) {
      g.kind = Kind::threshold;
      number = text.substr(10);
    }
    try {
      std::size_t used = 0;
      g.value = std::stod(std::string(number), &used);
      if (used != number.size()) throw config_error("");
    } catch (const std::exception&) {
      throw config_error("malformed gate target: " + std::string(text));
    }
    if (g.kind == Kind::budget && !(g.value >= 0.0 && g.value <= 1.0)) throw config_error("budget B must lie in [0,1]");
    if (!std::isfinite(g.value)) throw config_error("gate target must be finite");
    return g;
  }

  std::string to_string() const {
    std::ostringstream out;
    out.precision(17);
    out << (kind == Kind::budget ? "budget=" : "threshold=") << value;
    return out.str();
  }
};

enum class PositionSampling { occupancy, start };

struct ExperimentConfig {
  std::string env_id;
  std::string skill = "L1";
  std::vector<Strategy> strategies{Strategy::human, Strategy::expert, Strategy::valuemax};
  std::size_t episodes = kDefaultEpisodes;  // positions for the single-intervention run
  std::size_t rollouts = kDefaultRollouts;
  std::uint64_t seed = 0;
  std::size_t workers = 1;  // never affects results
  PositionSampling sampling = PositionSampling::occupancy;

  void validate() const {
    if (episodes < 1) throw config_error("episodes N must be at least 1");
    if (rollouts < 1) throw config_error("rollouts M must be at least 1");
    if (strategies.empty()) throw config_error("no strategies requested");
  }
};

struct RunStats {
  std::string strategy;
  std::string skill;
  std::string gate;           // "single", "none", or "tau=<τ>:p=<p>"
  std::optional<double> budget_target;
  std::optional<double> threshold_target;
  double mean_return = 0.0;
  double std_err = 0.0;
  double frequency = 0.0;
  double frequency_se = 0.0;
  std::size_t episodes = 0;
  std::uint64_t seed = 0;
  std::optional<double> exact_return;     // DP value of the evaluated policy, when defined
  std::optional<double> exact_frequency;  // occupancy-based, when defined
};

/// Shortest %.{15,16,17}g text that reads back to exactly `x`.
inline std::string format_number(double x) {
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

inline std::string to_csv(const std::vector<RunStats>& rows) {
  std::ostringstream out;
  out << "strategy,skill,gate,budget_target,frequency,mean_return,std_err,episodes,seed\n";
  for (const auto& r : rows) {
    out << r.strategy << ',' << r.skill << ',' << r.gate << ','
        << (r.budget_target ? format_number(*r.budget_target) : std::string()) << ',' << format_number(r.frequency)
        << ',' << format_number(r.mean_return) << ',' << format_number(r.std_err) << ',' << r.episodes << ','
        << r.seed << '\n';
  }
  return out.str();
}

/// Stage-resolved occupancy of π_H flattened into (state, stage) positions
/// and their normalized weights.
struct PositionDistribution {
  std::vector<RolloutStart> positions;
  std::vector<double> weights;
};

inline PositionDistribution position_distribution(const TabularMDP& mdp, const StochasticPolicy& pi_h,
                                                  PositionSampling rule) {
  PositionDistribution out;
  if (rule == PositionSampling::start) {
    for (StateId s = 0; s < mdp.num_states(); ++s) {
      const double w = mdp.start_distribution()[s];
      if (w > 0.0 && !mdp.is_terminal(s)) {
        out.positions.push_back({s, 1});
        out.weights.push_back(w);
      }
    }
  } else {
    const auto stages = stage_occupancy(mdp, pi_h);
    for (std::size_t t = 0; t < stages.size(); ++t) {
      for (StateId s = 0; s < mdp.num_states(); ++s) {
        if (stages[t][s] > 0.0) {
          out.positions.push_back({s, static_cast<int>(t) + 1});
          out.weights.push_back(stages[t][s]);
        }
      }
    }
  }
  double total = 0.0;
  for (double w : out.weights) total += w;
  if (total <= 0.0) throw domain_error("the human policy never reaches a decision state");
  for (double& w : out.weights) w /= total;
  return out;
}

// Stream tags keep the experiments' randomness disjoint.
inline constexpr std::uint64_t kPositionStream = 1;
inline constexpr std::uint64_t kHumanMoveStream = 2;
inline constexpr std::uint64_t kContinuationStream = 3;
inline constexpr std::uint64_t kEpisodeStream = 4;

/// One-shot strategy evaluation at positions drawn from π_H's occupancy:
/// the strategy picks one action, then M continuations under π_H are
/// averaged. All strategies see the same positions and continuation
/// streams.
inline std::vector<RunStats> run_single_intervention_experiment(const SolvedInstance& inst,
                                                                const ExperimentConfig& config) {
  config.validate();
  const auto& mdp = inst.mdp();
  const auto dist = position_distribution(mdp, inst.human, config.sampling);
  const auto staged = evaluate_policy_staged(mdp, inst.human);
  const std::size_t N = config.episodes;
  const std::size_t M = config.rollouts;
  std::vector<RunStats> out;
  for (Strategy strategy : config.strategies) {
    std::vector<double> values(N, 0.0);
    std::vector<double> fired(N, 0.0);
    std::vector<double> steps(N, 0.0);
    parallel_for(N, config.workers, [&](std::size_t i) {
      auto pos_rng = RngStream::derive(config.seed, {kPositionStream, i});
      const RolloutStart pos = dist.positions[sample_index(dist.weights, pos_rng.uniform())];
      ActionId a = 0;
      if (strategy == Strategy::human) {
        auto move_rng = RngStream::derive(config.seed, {kHumanMoveStream, i});
        a = sample_index(inst.human.row(pos.state), move_rng.uniform());
      } else {
        a = argmax(inst.override_for(strategy).row(pos.state));
      }
      double total = 0.0;
      double n_steps = 0.0;
      for (std::size_t j = 0; j < M; ++j) {
        auto rng = RngStream::derive(config.seed, {kContinuationStream, i, j});
        const auto& tr = detail::sample_transition(mdp, pos.state, a, rng.uniform());
        double ret = tr.reward;
        n_steps += 1.0;
        if (!mdp.is_terminal(tr.next) && pos.stage < mdp.horizon()) {
          const auto rest = rollout(mdp, inst.human, rng, nullptr, RolloutStart{tr.next, pos.stage + 1});
          ret += rest.total_return();
          n_steps += static_cast<double>(rest.steps.size());
        }
        total += ret;
      }
      values[i] = total / static_cast<double>(M);
      fired[i] = strategy == Strategy::human ? 0.0 : static_cast<double>(M);
      steps[i] = n_steps;
    });
    const auto ret = estimate_mean(values);
    const auto freq = estimate_ratio(fired, steps);
    RunStats row;
    row.strategy = to_string(strategy);
    row.skill = inst.skill.label;
    row.gate = "single";
    row.mean_return = ret.mean;
    row.std_err = ret.std_err;
    row.frequency = freq.mean;
    row.frequency_se = freq.std_err;
    row.episodes = N;
    row.seed = config.seed;
    // Exact expectation of the same quantity from the stage tables of π_H.
    double exact = 0.0;
    for (std::size_t k = 0; k < dist.positions.size(); ++k) {
      const auto [s, t] = dist.positions[k];
      const auto& q = staged.action_value(t);
      double v = 0.0;
      if (strategy == Strategy::human) {
        v = staged.value(t)[s];
      } else {
        v = q(s, argmax(inst.override_for(strategy).row(s)));
      }
      exact += dist.weights[k] * v;
    }
    row.exact_return = exact;
    out.push_back(std::move(row));
  }
  return out;
}

/// Episodes of π_H composed with a stationary gate and override. Episode i
/// uses stream (seed, i) whatever the gate, so sweep cells share randomness.
inline std::vector<Trajectory> simulate_episodes(const TabularMDP& mdp, const StochasticPolicy& pi_h,
                                                 const InterventionPolicy* ip, std::size_t episodes,
                                                 std::uint64_t seed, std::size_t workers) {
  std::vector<Trajectory> out(episodes);
  parallel_for(episodes, workers, [&](std::size_t i) {
    auto rng = RngStream::derive(seed, {kEpisodeStream, i});
    out[i] = rollout(mdp, pi_h, rng, ip);
  });
  return out;
}

/// Calibrated or thresholded gate for one sweep cell.
struct ResolvedGate {
  GateSpec spec;
  GatingFunction phi;
};

inline ResolvedGate resolve_gate(const SolvedInstance& inst, Strategy strategy, const GateTarget& target) {
  const auto& mdp = inst.mdp();
  GateSpec spec{target.value, 0.0};
  if (target.kind == GateTarget::Kind::budget) {
    spec = calibrate_budget(mdp, inst.human, inst.override_for(strategy), target.value);
  }
  return {spec, threshold_gate(mdp, inst.delta, spec)};
}

inline RunStats summarize_episodes(const std::vector<Trajectory>& episodes) {
  std::vector<double> returns;
  std::vector<double> fired;
  std::vector<double> steps;
  for (const auto& e : episodes) {
    returns.push_back(e.total_return());
    fired.push_back(static_cast<double>(e.interventions()));
    steps.push_back(static_cast<double>(e.steps.size()));
  }
  const auto ret = estimate_mean(returns);
  const auto freq = estimate_ratio(fired, steps);
  RunStats row;
  row.mean_return = ret.mean;
  row.std_err = ret.std_err;
  row.frequency = freq.mean;
  row.frequency_se = freq.std_err;
  row.episodes = episodes.size();
  return row;
}

/// Full-episode evaluation of each (strategy, gate) cell from the start
/// distribution. The human strategy contributes a single ungated baseline
/// row. Rows are sorted by empirical frequency.
inline std::vector<RunStats> run_budget_sweep(const SolvedInstance& inst, const ExperimentConfig& config,
                                              const std::vector<GateTarget>& targets) {
  config.validate();
  if (targets.empty()) throw config_error("the sweep needs at least one budget or threshold");
  const auto& mdp = inst.mdp();
  std::vector<RunStats> out;
  for (Strategy strategy : config.strategies) {
    const bool baseline = strategy == Strategy::human;
    for (std::size_t c = 0; c < (baseline ? 1 : targets.size()); ++c) {
      RunStats row;
      if (baseline) {
        const auto episodes = simulate_episodes(mdp, inst.human, nullptr, config.episodes, config.seed, config.workers);
        row = summarize_episodes(episodes);
        row.gate = "none";
        row.exact_return = inst.j_human;
        row.exact_frequency = 0.0;
      } else {
        const auto gate = resolve_gate(inst, strategy, targets[c]);
        const auto ip = InterventionPolicy::stationary(gate.phi, inst.override_for(strategy));
        const auto episodes = simulate_episodes(mdp, inst.human, &ip, config.episodes, config.seed, config.workers);
        row = summarize_episodes(episodes);
        row.gate = "tau=" + format_number(gate.spec.threshold) + ":p=" + format_number(gate.spec.boundary_prob);
        if (targets[c].kind == GateTarget::Kind::budget) {
          row.budget_target = targets[c].value;
        } else {
          row.threshold_target = targets[c].value;
        }
        row.exact_return = intervention_return(mdp, inst.human, ip);
        row.exact_frequency = composed_frequency(mdp, inst.human, gate.phi, inst.override_for(strategy));
      }
      row.strategy = to_string(strategy);
      row.skill = inst.skill.label;
      row.seed = config.seed;
      out.push_back(std::move(row));
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const RunStats& a, const RunStats& b) { return a.frequency < b.frequency; });
  return out;
}

/// Concept analysis over a fresh set of gated episodes: states where the
/// gate fired against the rest.
inline ConceptReport run_concept_analysis(const SolvedInstance& inst, Strategy strategy, const GateTarget& target,
                                          std::size_t episodes, std::uint64_t seed, std::size_t workers = 1) {
  if (strategy == Strategy::human) throw config_error("concept analysis needs an intervening strategy");
  const auto gate = resolve_gate(inst, strategy, target);
  const auto ip = InterventionPolicy::stationary(gate.phi, inst.override_for(strategy));
  return concept_report(simulate_episodes(inst.mdp(), inst.human, &ip, episodes, seed, workers), inst.env->concepts);
}

}  // namespace advisor
