#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advisor/error.hpp"
#include "advisor/tables.hpp"

namespace advisor {

enum class SkillKind { boltzmann, epsilon_greedy };

/// Parametric stand-in for a human at a given skill level.
struct SkillModel {
  SkillKind kind = SkillKind::boltzmann;
  double parameter = 1.0;  // β for boltzmann, ε for epsilon-greedy
  std::string label;       // "L1".."L5" for presets, otherwise the raw spec
};

inline constexpr std::array<double, 5> kBoltzmannPresets{0.5, 1.0, 2.0, 4.0, 8.0};
inline constexpr std::array<double, 5> kEpsilonPresets{0.5, 0.3, 0.2, 0.1, 0.05};

/// Accepts "L1".."L5" (Boltzmann), "eps:L1".."eps:L5", "beta=<x>" and "eps=<x>".
inline SkillModel parse_skill(std::string_view text) {
  auto preset = [](std::string_view s) -> int {
    if (s.size() == 2 && s[0] == 'L' && s[1] >= '1' && s[1] <= '5') return s[1] - '1';
    return -1;
  };
  auto number = [&](std::string_view s) {
    try {
      std::size_t used = 0;
      const double x = std::stod(std::string(s), &used);
      if (used != s.size() || !std::isfinite(x)) throw config_error("");
      return x;
    } catch (const std::exception&) {
      throw config_error("malformed skill parameter: " + std::string(text));
    }
  };
  if (int i = preset(text); i >= 0) {
    return {SkillKind::boltzmann, kBoltzmannPresets[static_cast<std::size_t>(i)], std::string(text)};
  }
  if (text.starts_with("eps:")) {
    if (int i = preset(text.substr(4)); i >= 0) {
      return {SkillKind::epsilon_greedy, kEpsilonPresets[static_cast<std::size_t>(i)], std::string(text)};
    }
  }
  if (text.starts_with("beta=")) {
    const double b = number(text.substr(5));
    if (b < 0.0) throw config_error("beta must be non-negative");
    return {SkillKind::boltzmann, b, std::string(text)};
  }
  if (text.starts_with("eps=")) {
    const double e = number(text.substr(4));
    if (e < 0.0 || e > 1.0) throw config_error("epsilon must lie in [0,1]");
    return {SkillKind::epsilon_greedy, e, std::string(text)};
  }
  throw config_error("unknown skill: " + std::string(text));
}

/// π(a|s) ∝ exp(β q(s,a)) for one row, computed with max-subtraction.
inline std::vector<double> boltzmann_row(std::span<const double> q, double beta) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw config_error("beta must be a non-negative finite number");
  std::vector<double> p(q.size());
  const double m = row_max(q);
  double total = 0.0;
  for (std::size_t a = 0; a < q.size(); ++a) {
    if (!std::isfinite(q[a])) throw config_error("Q table has a non-finite entry");
    p[a] = std::exp(beta * (q[a] - m));
    total += p[a];
  }
  for (double& x : p) x /= total;
  return p;
}

/// 1−ε on the lowest-index argmax, ε spread uniformly over all legal actions.
inline std::vector<double> epsilon_greedy_row(std::span<const double> q, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw config_error("epsilon must lie in [0,1]");
  std::vector<double> p(q.size(), epsilon / static_cast<double>(q.size()));
  p[argmax(q)] += 1.0 - epsilon;
  return p;
}

inline std::vector<double> skill_row(std::span<const double> q, const SkillModel& skill) {
  return skill.kind == SkillKind::boltzmann ? boltzmann_row(q, skill.parameter) : epsilon_greedy_row(q, skill.parameter);
}

namespace detail {
template <class RowFn>
StochasticPolicy policy_from_rows(const QTable& q_star, RowFn&& fn) {
  StochasticPolicy pi(q_star.layout());
  for (StateId s = 0; s < q_star.num_states(); ++s) {
    const auto p = fn(q_star.row(s));
    std::copy(p.begin(), p.end(), pi.row(s).begin());
  }
  return pi;
}
}  // namespace detail

inline StochasticPolicy make_boltzmann(const QTable& q_star, double beta) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw config_error("beta must be a non-negative finite number");
  return detail::policy_from_rows(q_star, [beta](std::span<const double> q) { return boltzmann_row(q, beta); });
}

inline StochasticPolicy make_epsilon_greedy(const QTable& q_star, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw config_error("epsilon must lie in [0,1]");
  return detail::policy_from_rows(q_star, [epsilon](std::span<const double> q) { return epsilon_greedy_row(q, epsilon); });
}

inline StochasticPolicy make_human_policy(const QTable& q_star, const SkillModel& skill) {
  return skill.kind == SkillKind::boltzmann ? make_boltzmann(q_star, skill.parameter)
                                            : make_epsilon_greedy(q_star, skill.parameter);
}

}  // namespace advisor
