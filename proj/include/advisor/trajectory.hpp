#pragma once

#include <cstddef>
#include <vector>

#include "advisor/tables.hpp"

namespace advisor {

struct Step {
  StateId state = 0;
  ActionId action = 0;
  double reward = 0.0;
  bool intervened = false;
};

/// One episode: the decision steps taken plus the state it ended in.
struct Trajectory {
  std::vector<Step> steps;
  StateId final_state = 0;

  double total_return() const {
    double r = 0.0;
    for (const auto& s : steps) r += s.reward;
    return r;
  }
  std::size_t interventions() const {
    std::size_t n = 0;
    for (const auto& s : steps) n += s.intervened ? 1 : 0;
    return n;
  }
};

}  // namespace advisor
