#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "advisor/concepts.hpp"
#include "advisor/mdp.hpp"

namespace advisor {

/// What a client needs to draw a state: a grid of cell glyphs plus whose
/// turn it is. Boards and gridworlds both fit; other environments use a
/// single row naming the state.
struct RenderState {
  std::string kind;  // "board", "grid" or "node"
  int rows = 1;
  int cols = 1;
  std::vector<std::string> cells;
  std::string to_move;
  bool terminal = false;
};

/// A shipped environment: the tabular MDP plus presentation and feature hooks.
/// State names of the MDP are the canonical, unique state labels.
struct Environment {
  std::string id;
  TabularMDP mdp;
  std::function<std::string(StateId, ActionId)> action_label;
  std::function<RenderState(StateId)> render;
  ConceptExtractor concepts;

  std::optional<StateId> find_state(const std::string& label) const {
    for (StateId s = 0; s < mdp.num_states(); ++s) {
      if (mdp.state_name(s) == label) return s;
    }
    return std::nullopt;
  }

  std::vector<std::string> action_labels(StateId s) const {
    std::vector<std::string> out;
    for (ActionId a = 0; a < mdp.num_actions(s); ++a) out.push_back(action_label(s, a));
    return out;
  }
};

}  // namespace advisor
