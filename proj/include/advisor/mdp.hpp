#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "advisor/error.hpp"
#include "advisor/tables.hpp"

namespace advisor {

/// One outcome of taking an action. `reward` is the reward realized on this
/// particular transition; the expected reward of the action is stored
/// separately on the MDP and is what every solver uses.
struct Transition {
  StateId next = 0;
  double prob = 0.0;
  double reward = 0.0;
};

struct RewardRange {
  double min = 0.0;
  double max = 1.0;
};

inline constexpr double kProbabilityTolerance = 1e-12;

/// Finite-horizon tabular MDP with sparse transitions.
///
/// Terminal states carry exactly one zero-reward self-loop, so every state has
/// at least one action and terminal handling needs no special cases in the
/// solvers. Instances are immutable; build them with MdpBuilder.
class TabularMDP {
 public:
  /// The empty model (no states); a placeholder until assigned.
  TabularMDP() = default;

  std::size_t num_states() const { return layout_->num_states(); }
  std::size_t num_actions(StateId s) const { return layout_->num_actions(s); }
  std::size_t num_pairs() const { return layout_->num_pairs(); }
  const LayoutPtr& layout() const { return layout_; }

  std::span<const Transition> transitions(StateId s, ActionId a) const {
    const std::size_t p = layout_->index(s, a);
    return {transitions_.data() + transition_offsets_[p], transition_offsets_[p + 1] - transition_offsets_[p]};
  }
  /// Expected immediate reward r(s,a).
  double reward(StateId s, ActionId a) const { return rewards_[layout_->index(s, a)]; }
  bool is_terminal(StateId s) const { return terminal_[s] != 0; }
  const std::vector<double>& start_distribution() const { return start_; }
  int horizon() const { return horizon_; }
  double discount() const { return discount_; }
  RewardRange reward_range() const { return range_; }
  const std::string& state_name(StateId s) const { return names_[s]; }

  /// Dense transition row over all states (test and export helper).
  std::vector<double> transition_vector(StateId s, ActionId a) const {
    std::vector<double> row(num_states(), 0.0);
    for (const auto& t : transitions(s, a)) row[t.next] += t.prob;
    return row;
  }

 private:
  friend class MdpBuilder;

  LayoutPtr layout_ = std::make_shared<const ActionLayout>(std::vector<std::size_t>{0});
  std::vector<std::size_t> transition_offsets_;
  std::vector<Transition> transitions_;
  std::vector<double> rewards_;
  std::vector<char> terminal_;
  std::vector<double> start_;
  std::vector<std::string> names_;
  int horizon_ = 1;
  double discount_ = 1.0;
  RewardRange range_;
};

/// Incremental constructor for TabularMDP. `build()` validates every model
/// invariant and throws config_error on the first violation.
class MdpBuilder {
 public:
  StateId add_state(std::string name = {}, bool terminal = false) {
    const StateId id = states_.size();
    if (name.empty()) name = "s" + std::to_string(id);
    states_.push_back({std::move(name), terminal, {}});
    return id;
  }

  void set_terminal(StateId s, bool terminal = true) { states_.at(s).terminal = terminal; }

  /// Adds an action whose realized reward equals `reward` on every outcome.
  ActionId add_action(StateId s, double reward, const std::vector<std::pair<StateId, double>>& outcomes) {
    std::vector<Transition> ts;
    ts.reserve(outcomes.size());
    for (const auto& [next, p] : outcomes) ts.push_back({next, p, reward});
    return add_action_with_expected(s, reward, std::move(ts));
  }

  /// Adds an action with outcome-dependent rewards; r(s,a) = Σ p·reward.
  ActionId add_action(StateId s, std::vector<Transition> outcomes) {
    double expected = 0.0;
    for (const auto& t : outcomes) expected += t.prob * t.reward;
    return add_action_with_expected(s, expected, std::move(outcomes));
  }

  /// Adds an action with an explicitly stated expected reward (used by the
  /// interchange reader so that r(s,a) round-trips bit-exactly).
  ActionId add_action_with_expected(StateId s, double expected, std::vector<Transition> outcomes) {
    auto& st = states_.at(s);
    st.actions.push_back({expected, std::move(outcomes)});
    return st.actions.size() - 1;
  }

  void set_start(std::vector<double> dist) { start_ = std::move(dist); }
  void set_start_state(StateId s) {
    start_.assign(states_.size(), 0.0);
    start_.at(s) = 1.0;
  }
  void set_horizon(int horizon) { horizon_ = horizon; }
  void set_discount(double discount) { discount_ = discount; }
  void set_reward_range(RewardRange range) { range_ = range; }

  std::size_t num_states() const { return states_.size(); }

  TabularMDP build() const {
    const std::size_t n = states_.size();
    if (n == 0) throw config_error("MDP has no states");
    if (horizon_ < 1) throw config_error("horizon must be a positive integer");
    if (!(discount_ > 0.0 && discount_ <= 1.0)) throw config_error("discount must lie in (0, 1]");
    if (!(range_.min <= range_.max)) throw config_error("reward range is empty");

    TabularMDP mdp;
    std::vector<std::size_t> offsets{0};
    mdp.transition_offsets_.push_back(0);
    for (StateId s = 0; s < n; ++s) {
      const auto& st = states_[s];
      mdp.names_.push_back(st.name);
      mdp.terminal_.push_back(st.terminal ? 1 : 0);
      if (st.terminal) {
        if (!st.actions.empty()) {
          const bool self_loop = st.actions.size() == 1 && st.actions[0].reward == 0.0 &&
                                 merged(st.actions[0].outcomes, n, s, 0).size() == 1 &&
                                 st.actions[0].outcomes.front().next == s;
          if (!self_loop) throw config_error("terminal state " + st.name + " must have a single zero-reward self-loop");
        }
        mdp.rewards_.push_back(0.0);
        mdp.transitions_.push_back({s, 1.0, 0.0});
        mdp.transition_offsets_.push_back(mdp.transitions_.size());
        offsets.push_back(offsets.back() + 1);
        continue;
      }
      if (st.actions.empty()) throw config_error("non-terminal state " + st.name + " has no actions");
      for (std::size_t a = 0; a < st.actions.size(); ++a) {
        const auto& act = st.actions[a];
        auto outcomes = merged(act.outcomes, n, s, a);
        double total = 0.0;
        double expected = 0.0;
        for (const auto& t : outcomes) {
          total += t.prob;
          expected += t.prob * t.reward;
          check_reward(t.reward, s, a);
        }
        if (std::abs(total - 1.0) > kProbabilityTolerance) {
          throw config_error("transition(" + st.name + ", " + std::to_string(a) + ") sums to " + std::to_string(total));
        }
        check_reward(act.reward, s, a);
        if (std::abs(expected - act.reward) > 1e-9) {
          throw config_error("expected reward of (" + st.name + ", " + std::to_string(a) +
                             ") disagrees with its outcome rewards");
        }
        mdp.rewards_.push_back(act.reward);
        mdp.transitions_.insert(mdp.transitions_.end(), outcomes.begin(), outcomes.end());
        mdp.transition_offsets_.push_back(mdp.transitions_.size());
      }
      offsets.push_back(offsets.back() + st.actions.size());
    }
    mdp.layout_ = std::make_shared<const ActionLayout>(std::move(offsets));

    if (start_.size() != n) throw config_error("start distribution has the wrong length");
    double total = 0.0;
    for (double p : start_) {
      if (!(p >= 0.0)) throw config_error("start distribution has a negative entry");
      total += p;
    }
    if (std::abs(total - 1.0) > kProbabilityTolerance) throw config_error("start distribution does not sum to 1");
    mdp.start_ = start_;
    mdp.horizon_ = horizon_;
    mdp.discount_ = discount_;
    mdp.range_ = range_;
    return mdp;
  }

 private:
  struct ActionSpec {
    double reward = 0.0;
    std::vector<Transition> outcomes;
  };
  struct StateSpec {
    std::string name;
    bool terminal = false;
    std::vector<ActionSpec> actions;
  };

  void check_reward(double r, StateId s, ActionId a) const {
    if (!std::isfinite(r) || r < range_.min || r > range_.max) {
      throw config_error("reward of (" + states_[s].name + ", " + std::to_string(a) + ") lies outside [" +
                         std::to_string(range_.min) + ", " + std::to_string(range_.max) + "]");
    }
  }

  // Sorted by successor, zero-probability outcomes dropped, duplicates with
  // equal reward combined.
  std::vector<Transition> merged(const std::vector<Transition>& in, std::size_t n, StateId s, ActionId a) const {
    std::map<std::pair<StateId, double>, double> acc;
    for (const auto& t : in) {
      if (t.next >= n) throw config_error("transition from " + states_[s].name + " leads to an unknown state");
      if (!(t.prob >= 0.0) || t.prob > 1.0 + kProbabilityTolerance) {
        throw config_error("invalid probability in transition(" + states_[s].name + ", " + std::to_string(a) + ")");
      }
      if (t.prob > 0.0) acc[{t.next, t.reward}] += t.prob;
    }
    std::vector<Transition> out;
    for (const auto& [key, p] : acc) out.push_back({key.first, p, key.second});
    return out;
  }

  std::vector<StateSpec> states_;
  std::vector<double> start_;
  int horizon_ = 1;
  double discount_ = 1.0;
  RewardRange range_;
};

/// Throws config_error unless `pi` is a valid distribution over the legal
/// actions of every state of `mdp`.
inline void check_policy(const TabularMDP& mdp, const StochasticPolicy& pi) {
  if (!pi.same_shape(*mdp.layout())) throw config_error("policy dimensions do not match the MDP");
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    double total = 0.0;
    for (double p : pi.row(s)) {
      if (!(p >= 0.0)) throw config_error("policy has a negative probability at " + mdp.state_name(s));
      total += p;
    }
    if (std::abs(total - 1.0) > kProbabilityTolerance) {
      throw config_error("policy at " + mdp.state_name(s) + " does not sum to 1");
    }
  }
}

inline void check_gate(const TabularMDP& mdp, const GatingFunction& phi) {
  if (phi.size() != mdp.num_states()) throw config_error("gating function dimensions do not match the MDP");
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (!(phi[s] >= 0.0 && phi[s] <= 1.0)) throw config_error("gate value outside [0,1]");
    if (mdp.is_terminal(s) && phi[s] != 0.0) throw config_error("gate must be closed at terminal states");
  }
}

/// Uniform distribution over the legal actions of every state.
inline StochasticPolicy uniform_policy(const TabularMDP& mdp) {
  StochasticPolicy pi(mdp.layout());
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    const double p = 1.0 / static_cast<double>(mdp.num_actions(s));
    for (double& x : pi.row(s)) x = p;
  }
  return pi;
}

}  // namespace advisor
