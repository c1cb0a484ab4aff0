#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "advisor/budgeted.hpp"
#include "advisor/error.hpp"
#include "advisor/instance.hpp"
#include "advisor/intervene.hpp"
#include "advisor/rng.hpp"

namespace advisor {

/// Failure with a machine-readable code and the HTTP status it maps to.
class SessionError : public std::runtime_error {
 public:
  SessionError(std::string code, int status, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)), status_(status) {}
  const std::string& code() const { return code_; }
  int status() const { return status_; }

 private:
  std::string code_;
  int status_;
};

enum class BudgetMode { count, frequency };

struct SessionRequest {
  std::string env;
  std::string skill = "L1";
  std::string strategy = "none";
  BudgetMode mode = BudgetMode::count;
  double budget = 1.0;  // K in count mode, B in frequency mode
  std::optional<std::uint64_t> seed;
  std::optional<std::string> start_from;  // a state label
};

struct Advice {
  StateId state = 0;  // the state advised on
  bool would_intervene = false;
  ActionId recommended = 0;
  std::vector<double> deltas;  // Δ^{π_H}(s, a) per legal action
  double budget_remaining = 0.0;
};

struct SessionStep {
  StateId state = 0;
  ActionId action = 0;
  double reward = 0.0;
  bool advised = false;   // the gate was open when the move was made
  bool accepted = false;  // the player reported taking the advice
  bool intervened = false;
  double delta = 0.0;  // Δ of the action taken
};

struct SessionSnapshot {
  std::string id;
  std::string env;
  std::string skill;
  Strategy strategy = Strategy::human;
  BudgetMode mode = BudgetMode::count;
  double budget = 0.0;
  std::uint64_t seed = 0;
  StateId start = 0;
  StateId state = 0;
  std::uint64_t version = 0;
  std::vector<SessionStep> history;
  bool finished = false;
  double outcome = 0.0;  // total reward so far; final once finished

  std::size_t interventions() const {
    std::size_t n = 0;
    for (const auto& s : history) n += s.intervened ? 1 : 0;
    return n;
  }
  double frequency() const {
    return history.empty() ? 0.0 : static_cast<double>(interventions()) / static_cast<double>(history.size());
  }
  Trajectory trajectory() const {
    Trajectory t;
    for (const auto& s : history) t.steps.push_back({s.state, s.action, s.reward, s.intervened});
    t.final_state = state;
    return t;
  }
};

namespace detail {
inline constexpr std::uint64_t kGateStream = 11;
inline constexpr std::uint64_t kMoveStream = 12;
}  // namespace detail

/// One live episode. All methods lock the session; advice is a pure
/// function of (state, step index, budget left, seed).
class Session {
 public:
  Session(SessionSnapshot init, std::shared_ptr<const SolvedInstance> inst, std::optional<AugmentedValueTable> dp,
          GatingFunction gate)
      : s_(std::move(init)), inst_(std::move(inst)), dp_(std::move(dp)), gate_(std::move(gate)) {}

  SessionSnapshot snapshot() const {
    std::lock_guard lock(mu_);
    return s_;
  }

  std::optional<Advice> advice() const {
    std::lock_guard lock(mu_);
    if (s_.finished) throw SessionError("session_finished", 409, "session is finished");
    return advice_locked();
  }

  SessionSnapshot step(ActionId action, std::uint64_t version, bool accepted) {
    std::lock_guard lock(mu_);
    if (s_.finished) throw SessionError("session_finished", 409, "session is finished");
    if (version != s_.version) throw SessionError("conflict", 409, "stale state version");
    const auto& mdp = inst_->mdp();
    if (action >= mdp.num_actions(s_.state)) throw SessionError("illegal_action", 400, "action is not legal here");
    const auto adv = advice_locked();
    const bool advised = adv && adv->would_intervene;
    if (accepted && adv && action != adv->recommended) {
      throw SessionError("illegal_action", 400, "accepted advice but played a different action");
    }
    const bool intervened = advised && accepted;

    auto rng = RngStream::derive(s_.seed, {detail::kMoveStream, s_.history.size()});
    const auto ts = mdp.transitions(s_.state, action);
    std::vector<double> probs;
    for (const auto& t : ts) probs.push_back(t.prob);
    const auto& tr = ts[sample_index(probs, rng.uniform())];

    s_.history.push_back({s_.state, action, tr.reward, advised, accepted, intervened, inst_->delta(s_.state, action)});
    s_.outcome += tr.reward;
    s_.state = tr.next;
    ++s_.version;
    if (mdp.is_terminal(s_.state) || static_cast<int>(s_.history.size()) >= mdp.horizon()) s_.finished = true;
    return s_;
  }

  const SolvedInstance& instance() const { return *inst_; }

 private:
  int budget_left() const {
    return static_cast<int>(s_.budget) - static_cast<int>(s_.interventions());
  }

  std::optional<Advice> advice_locked() const {
    if (s_.strategy == Strategy::human) return std::nullopt;
    const auto& inst = *inst_;
    const StateId s = s_.state;
    Advice a;
    a.state = s;
    const auto d = inst.delta.row(s);
    a.deltas.assign(d.begin(), d.end());
    a.recommended = argmax(inst.override_for(s_.strategy).row(s));
    if (s_.mode == BudgetMode::count) {
      const int left = budget_left();
      a.budget_remaining = left;
      const int t = static_cast<int>(s_.history.size()) + 1;
      if (left > 0 && dp_ && t <= dp_->horizon()) {
        const auto dec = dp_->decision(t, std::min(left, dp_->budget()), s);
        a.would_intervene = dec.intervene;
        if (dec.intervene) a.recommended = dec.action;
      }
    } else {
      a.budget_remaining = s_.budget;
      auto rng = RngStream::derive(s_.seed, {detail::kGateStream, s_.history.size()});
      const double g = gate_[s];
      a.would_intervene = g >= 1.0 || (g > 0.0 && rng.uniform() < g);
    }
    return a;
  }

  mutable std::mutex mu_;
  SessionSnapshot s_;
  std::shared_ptr<const SolvedInstance> inst_;
  std::optional<AugmentedValueTable> dp_;
  GatingFunction gate_;
};

/// Owns sessions and the solved instances they share. Requests for
/// different sessions run concurrently; one session's requests serialize on
/// its own lock.
class SessionManager {
 public:
  explicit SessionManager(std::string log_path = {}) : log_path_(std::move(log_path)) {}

  std::shared_ptr<const SolvedInstance> instance(const std::string& env, const std::string& skill) {
    std::lock_guard lock(cache_mu_);
    const auto key = env + "|" + skill;
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    SkillModel model;
    try {
      model = parse_skill(skill);
    } catch (const config_error& e) {
      throw SessionError("unknown_skill", 400, e.what());
    }
    std::shared_ptr<const Environment> environment;
    try {
      environment = std::make_shared<const Environment>(make_environment(env));
    } catch (const config_error& e) {
      throw SessionError("unknown_env", 400, e.what());
    }
    auto inst = std::make_shared<const SolvedInstance>(solve_instance(std::move(environment), model));
    cache_.emplace(key, inst);
    return inst;
  }

  SessionSnapshot create(const SessionRequest& req) {
    Strategy strategy;
    try {
      strategy = parse_strategy(req.strategy);
    } catch (const config_error& e) {
      throw SessionError("unknown_strategy", 400, e.what());
    }
    const auto inst = instance(req.env, req.skill);
    const auto& mdp = inst->mdp();

    if (req.mode == BudgetMode::count) {
      if (!(req.budget >= 0.0) || req.budget != static_cast<double>(static_cast<int>(req.budget))) {
        throw SessionError("invalid_budget", 400, "count budget K must be a non-negative integer");
      }
    } else if (!(req.budget >= 0.0 && req.budget <= 1.0)) {
      throw SessionError("invalid_budget", 400, "frequency budget B must lie in [0,1]");
    }

    StateId start = 0;
    if (req.start_from) {
      const auto s = inst->env->find_state(*req.start_from);
      if (!s || mdp.is_terminal(*s) || !reachable(mdp)[*s]) {
        throw SessionError("invalid_start_state", 400, "start state is unknown, terminal or unreachable");
      }
      start = *s;
    }

    std::uint64_t index = 0;
    {
      std::lock_guard lock(sessions_mu_);
      index = next_id_++;
    }
    SessionSnapshot snap;
    snap.id = "s" + std::to_string(index);
    snap.env = inst->env->id;
    snap.skill = inst->skill.label;
    snap.strategy = strategy;
    snap.mode = req.mode;
    snap.budget = req.budget;
    snap.seed = req.seed ? *req.seed : mix64(index + kGolden);
    if (!req.start_from) {
      auto rng = RngStream::derive(snap.seed, {detail::kMoveStream, ~std::uint64_t{0}});
      start = sample_index(mdp.start_distribution(), rng.uniform());
    }
    snap.start = start;
    snap.state = start;

    std::optional<AugmentedValueTable> dp;
    GatingFunction gate(mdp.num_states(), 0.0);
    if (strategy != Strategy::human) {
      if (req.mode == BudgetMode::count) {
        const int K = std::min(static_cast<int>(req.budget), mdp.horizon());
        const StochasticPolicy* restrict_to = strategy == Strategy::expert ? &inst->expert : nullptr;
        dp = solve_budgeted(mdp, inst->human, K, restrict_to);
      } else {
        const auto spec = calibrate_budget(mdp, inst->human, inst->override_for(strategy), req.budget);
        gate = threshold_gate(mdp, inst->delta, spec);
      }
    }
    auto session = std::make_shared<Session>(snap, inst, std::move(dp), std::move(gate));
    {
      std::unique_lock lock(sessions_mu_);
      sessions_.emplace(snap.id, session);
    }
    log_event("create", snap);
    return snap;
  }

  std::shared_ptr<Session> get(const std::string& id) const {
    std::shared_lock lock(sessions_mu_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw SessionError("not_found", 404, "no session " + id);
    return it->second;
  }

  std::optional<Advice> advice(const std::string& id) const { return get(id)->advice(); }

  SessionSnapshot step(const std::string& id, ActionId action, std::uint64_t version, bool accepted) {
    auto snap = get(id)->step(action, version, accepted);
    log_event("step", snap);
    return snap;
  }

  SessionSnapshot summary(const std::string& id) const { return get(id)->snapshot(); }

 private:
  static std::vector<char> reachable(const TabularMDP& mdp) {
    std::vector<char> seen(mdp.num_states(), 0);
    std::queue<StateId> q;
    for (StateId s = 0; s < mdp.num_states(); ++s) {
      if (mdp.start_distribution()[s] > 0.0) {
        seen[s] = 1;
        q.push(s);
      }
    }
    while (!q.empty()) {
      const StateId s = q.front();
      q.pop();
      for (ActionId a = 0; a < mdp.num_actions(s); ++a) {
        for (const auto& t : mdp.transitions(s, a)) {
          if (!seen[t.next]) {
            seen[t.next] = 1;
            q.push(t.next);
          }
        }
      }
    }
    return seen;
  }

  void log_event(const char* kind, const SessionSnapshot& snap) {
    if (log_path_.empty()) return;
    nlohmann::json line{{"event", kind},
                        {"session", snap.id},
                        {"env", snap.env},
                        {"state", snap.state},
                        {"version", snap.version},
                        {"steps", snap.history.size()},
                        {"finished", snap.finished}};
    if (!snap.history.empty()) {
      const auto& last = snap.history.back();
      line["action"] = last.action;
      line["accepted"] = last.accepted;
      line["intervened"] = last.intervened;
    }
    std::lock_guard lock(log_mu_);
    std::ofstream out(log_path_, std::ios::app);
    out << line.dump() << '\n';
  }

  std::string log_path_;
  std::mutex log_mu_;
  std::mutex cache_mu_;
  std::map<std::string, std::shared_ptr<const SolvedInstance>> cache_;
  mutable std::shared_mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
};

}  // namespace advisor
