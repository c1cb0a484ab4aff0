#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <iostream>
#include <limits>
#include <map>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "advisor/env/environment.hpp"
#include "advisor/error.hpp"
#include "advisor/mdp.hpp"

namespace advisor {

enum class CellKind { empty, wall, hazard, goal };

/// Gridworld description. Text form (JSON):
///
///     {"name": "cliff", "map": ["......", "S....G", "HHHHHH"],
///      "slip": 0.1, "step_reward": -0.01, "goal_reward": 1, "hazard_reward": 0, "horizon": 12}
///
/// Map glyphs: '.' empty, '#' wall, 'H' hazard, 'G' goal, 'S' start (an empty cell).
struct GridworldSpec {
  std::string name = "grid";
  int width = 0;
  int height = 0;
  std::vector<CellKind> cells;  // row-major
  int start = 0;
  double slip = 0.0;
  double step_reward = 0.0;
  double goal_reward = 1.0;
  double hazard_reward = 0.0;
  int horizon = 10;

  CellKind at(int row, int col) const { return cells[static_cast<std::size_t>(row * width + col)]; }

  void validate() const {
    if (width <= 0 || height <= 0 || cells.size() != static_cast<std::size_t>(width * height)) {
      throw config_error("gridworld " + name + ": map dimensions are inconsistent");
    }
    if (std::none_of(cells.begin(), cells.end(), [](CellKind c) { return c == CellKind::goal; })) {
      throw config_error("gridworld " + name + ": needs at least one goal");
    }
    if (start < 0 || start >= width * height || cells[static_cast<std::size_t>(start)] != CellKind::empty) {
      throw config_error("gridworld " + name + ": start must be an empty, non-terminal cell");
    }
    if (!(slip >= 0.0 && slip <= 1.0)) throw config_error("gridworld " + name + ": slip must lie in [0,1]");
    if (horizon < 1) throw config_error("gridworld " + name + ": horizon must be positive");
  }

  static GridworldSpec from_map(const std::vector<std::string>& rows) {
    GridworldSpec spec;
    spec.height = static_cast<int>(rows.size());
    spec.width = rows.empty() ? 0 : static_cast<int>(rows.front().size());
    int starts = 0;
    for (int r = 0; r < spec.height; ++r) {
      if (static_cast<int>(rows[static_cast<std::size_t>(r)].size()) != spec.width) {
        throw config_error("gridworld map rows must have equal length");
      }
      for (int c = 0; c < spec.width; ++c) {
        switch (rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]) {
          case '.': spec.cells.push_back(CellKind::empty); break;
          case '#': spec.cells.push_back(CellKind::wall); break;
          case 'H': spec.cells.push_back(CellKind::hazard); break;
          case 'G': spec.cells.push_back(CellKind::goal); break;
          case 'S':
            spec.cells.push_back(CellKind::empty);
            spec.start = r * spec.width + c;
            ++starts;
            break;
          default: throw config_error("unknown gridworld glyph");
        }
      }
    }
    if (starts != 1) throw config_error("gridworld map needs exactly one start cell 'S'");
    return spec;
  }

  std::vector<std::string> to_map() const {
    std::vector<std::string> rows;
    for (int r = 0; r < height; ++r) {
      std::string row;
      for (int c = 0; c < width; ++c) {
        const int i = r * width + c;
        if (i == start) {
          row += 'S';
          continue;
        }
        static constexpr std::array<char, 4> glyph{'.', '#', 'H', 'G'};
        row += glyph[static_cast<std::size_t>(at(r, c))];
      }
      rows.push_back(std::move(row));
    }
    return rows;
  }

  static GridworldSpec from_json(const nlohmann::json& j) {
    try {
      GridworldSpec spec = from_map(j.at("map").get<std::vector<std::string>>());
      spec.name = j.value("name", std::string("grid"));
      spec.slip = j.value("slip", 0.0);
      spec.step_reward = j.value("step_reward", 0.0);
      spec.goal_reward = j.value("goal_reward", 1.0);
      spec.hazard_reward = j.value("hazard_reward", 0.0);
      spec.horizon = j.value("horizon", 10);
      spec.validate();
      return spec;
    } catch (const nlohmann::json::exception& e) {
      throw config_error(std::string("malformed gridworld spec: ") + e.what());
    }
  }

  nlohmann::json to_json() const {
    return {{"name", name},
            {"map", to_map()},
            {"slip", slip},
            {"step_reward", step_reward},
            {"goal_reward", goal_reward},
            {"hazard_reward", hazard_reward},
            {"horizon", horizon}};
  }
};

/// Shipped gridworlds, addressable as `grid:<name>`.
inline const std::map<std::string, std::string>& shipped_gridworlds() {
  static const std::map<std::string, std::string> specs{
      {"corridor", R"({"name": "corridor", "map": ["S...G"], "slip": 0.0, "horizon": 6})"},
      {"cliff",
       R"({"name": "cliff", "map": ["......", "S....G", "HHHHHH"], "slip": 0.1, "step_reward": -0.01,
           "horizon": 12})"},
      {"open", R"({"name": "open", "map": ["S...", ".#..", "..H.", "...G"], "slip": 0.2, "horizon": 10})"},
  };
  return specs;
}

inline GridworldSpec shipped_gridworld(const std::string& name) {
  const auto& specs = shipped_gridworlds();
  const auto it = specs.find(name);
  if (it == specs.end()) throw config_error("unknown gridworld: " + name);
  return GridworldSpec::from_json(nlohmann::json::parse(it->second));
}

namespace grid {
enum Direction { kUp = 0, kRight = 1, kDown = 2, kLeft = 3 };
inline constexpr std::array<int, 4> kRowStep{-1, 0, 1, 0};
inline constexpr std::array<int, 4> kColStep{0, 1, 0, -1};
inline const std::array<std::string, 4> kActionNames{"up", "right", "down", "left"};
}  // namespace grid

/// Gridworld MDP with states (cell, elapsed steps). Indexing the state by
/// time keeps every value stationary within a stage and lets the outcome
/// reward be paid in one normalized lump when the episode ends, so that
/// returns always lie in [0, 1].
struct GridworldModel {
  GridworldSpec spec;
  TabularMDP mdp;
  std::vector<int> cell_of;  // -1 for the outcome states
  std::vector<int> time_of;
};

namespace detail {

inline int grid_move(const GridworldSpec& spec, int cell, int dir) {
  const int r = cell / spec.width + grid::kRowStep[static_cast<std::size_t>(dir)];
  const int c = cell % spec.width + grid::kColStep[static_cast<std::size_t>(dir)];
  if (r < 0 || r >= spec.height || c < 0 || c >= spec.width) return cell;
  if (spec.at(r, c) == CellKind::wall) return cell;
  return r * spec.width + c;
}

// BFS distance over non-wall cells that are not in `blocked`.
inline std::vector<int> grid_distances(const GridworldSpec& spec, CellKind target, bool pass_hazards) {
  const int n = spec.width * spec.height;
  std::vector<int> dist(static_cast<std::size_t>(n), -1);
  std::queue<int> q;
  for (int i = 0; i < n; ++i) {
    if (spec.cells[static_cast<std::size_t>(i)] == target) {
      dist[static_cast<std::size_t>(i)] = 0;
      q.push(i);
    }
  }
  while (!q.empty()) {
    const int cell = q.front();
    q.pop();
    for (int d = 0; d < 4; ++d) {
      const int next = grid_move(spec, cell, d);
      const auto kind = spec.cells[static_cast<std::size_t>(next)];
      if (next == cell || dist[static_cast<std::size_t>(next)] >= 0) continue;
      if (kind == CellKind::hazard && !pass_hazards) continue;
      dist[static_cast<std::size_t>(next)] = dist[static_cast<std::size_t>(cell)] + 1;
      q.push(next);
    }
  }
  return dist;
}

}  // namespace detail

inline GridworldModel build_gridworld_model(const GridworldSpec& spec) {
  spec.validate();
  const int T = spec.horizon;
  const bool has_hazard = std::any_of(spec.cells.begin(), spec.cells.end(), [](CellKind c) { return c == CellKind::hazard; });

  // Raw return of an episode ending after n steps with outcome value x.
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  auto consider = [&](double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  };
  for (int n = 1; n <= T; ++n) {
    consider(n * spec.step_reward + spec.goal_reward);
    if (has_hazard) consider(n * spec.step_reward + spec.hazard_reward);
  }
  consider(T * spec.step_reward);
  const double span = hi > lo ? hi - lo : 1.0;
  auto payout = [&](int steps, double outcome) { return (steps * spec.step_reward + outcome - lo) / span; };

  GridworldModel model;
  model.spec = spec;
  MdpBuilder b;
  std::map<std::pair<int, int>, StateId> index;
  auto add = [&](std::string name, int cell, int t, bool terminal) {
    const StateId id = b.add_state(std::move(name), terminal);
    model.cell_of.push_back(cell);
    model.time_of.push_back(t);
    return id;
  };
  const StateId goal = add("goal", -1, -1, true);
  const StateId hazard = has_hazard ? add("hazard", -1, -1, true) : goal;
  const StateId timeout = add("timeout", -1, -1, true);

  auto label = [&](int cell, int t) {
    return "r" + std::to_string(cell / spec.width) + "c" + std::to_string(cell % spec.width) + "t" + std::to_string(t);
  };
  std::queue<std::pair<int, int>> frontier;
  auto state_of = [&](int cell, int t) {
    auto [it, inserted] = index.try_emplace({cell, t}, 0);
    if (inserted) {
      it->second = add(label(cell, t), cell, t, false);
      frontier.push({cell, t});
    }
    return it->second;
  };
  const StateId start = state_of(spec.start, 0);

  bool goal_reached = false;
  while (!frontier.empty()) {
    const auto [cell, t] = frontier.front();
    frontier.pop();
    const StateId s = index.at({cell, t});
    for (int dir = 0; dir < 4; ++dir) {
      std::array<std::pair<int, double>, 3> moves{{{dir, 1.0 - spec.slip},
                                                   {(dir + 1) % 4, spec.slip / 2.0},
                                                   {(dir + 3) % 4, spec.slip / 2.0}}};
      std::vector<Transition> outcomes;
      for (const auto& [d, p] : moves) {
        if (p <= 0.0) continue;
        const int next = detail::grid_move(spec, cell, d);
        const auto kind = spec.cells[static_cast<std::size_t>(next)];
        const int steps = t + 1;
        if (kind == CellKind::goal) {
          outcomes.push_back({goal, p, payout(steps, spec.goal_reward)});
          goal_reached = true;
        } else if (kind == CellKind::hazard) {
          outcomes.push_back({hazard, p, payout(steps, spec.hazard_reward)});
        } else if (steps == T) {
          outcomes.push_back({timeout, p, payout(steps, 0.0)});
        } else {
          outcomes.push_back({state_of(next, steps), p, 0.0});
        }
      }
      b.add_action(s, std::move(outcomes));
    }
  }
  if (!goal_reached) std::cerr << "warning: gridworld " << spec.name << ": goal is unreachable from the start\n";

  b.set_start_state(start);
  b.set_horizon(T);
  model.mdp = b.build();
  return model;
}

inline TabularMDP build_gridworld(const GridworldSpec& spec) { return build_gridworld_model(spec).mdp; }

inline Environment make_gridworld_environment(const GridworldSpec& spec) {
  auto model = std::make_shared<const GridworldModel>(build_gridworld_model(spec));
  Environment env;
  env.id = "grid:" + spec.name;
  env.mdp = model->mdp;
  env.action_label = [model](StateId s, ActionId a) {
    return model->cell_of.at(s) < 0 ? std::string("-") : grid::kActionNames.at(a);
  };
  env.render = [model](StateId s) {
    const auto& g = model->spec;
    RenderState r;
    r.kind = "grid";
    r.rows = g.height;
    r.cols = g.width;
    r.cells = g.to_map();
    const int cell = model->cell_of.at(s);
    r.terminal = cell < 0;
    r.to_move = r.terminal ? "" : "player";
    for (auto& row : r.cells) std::replace(row.begin(), row.end(), 'S', '.');
    if (cell >= 0) {
      r.cells[static_cast<std::size_t>(cell / g.width)][static_cast<std::size_t>(cell % g.width)] = 'A';
    }
    return r;
  };

  const int n = spec.width * spec.height;
  auto to_goal = detail::grid_distances(spec, CellKind::goal, false);
  auto to_hazard = detail::grid_distances(spec, CellKind::hazard, true);
  for (auto* dist : {&to_goal, &to_hazard}) {
    for (int& d : *dist) d = d < 0 ? n : d;
  }
  std::vector<int> adjacency(static_cast<std::size_t>(n), 0);
  for (int cell = 0; cell < n; ++cell) {
    for (int d = 0; d < 4; ++d) {
      const int next = detail::grid_move(spec, cell, d);
      if (next != cell && spec.cells[static_cast<std::size_t>(next)] == CellKind::hazard) {
        ++adjacency[static_cast<std::size_t>(cell)];
      }
    }
  }
  // Single-agent: each feature is compared against its value at the start cell.
  env.concepts.features = {{"distance-to-goal", 0.0}, {"distance-to-hazard", 0.0}, {"hazard-adjacency-count", 0.0}};
  env.concepts.extract = [model, to_goal, to_hazard, adjacency](StateId s) {
    const int cell = model->cell_of.at(s);
    const auto origin = static_cast<std::size_t>(model->spec.start);
    const auto here = static_cast<std::size_t>(cell < 0 ? model->spec.start : cell);
    return std::vector<ConceptValue>{
        {static_cast<double>(to_goal[here]), static_cast<double>(to_goal[origin])},
        {static_cast<double>(to_hazard[here]), static_cast<double>(to_hazard[origin])},
        {static_cast<double>(adjacency[here]), static_cast<double>(adjacency[origin])},
    };
  };
  return env;
}

}  // namespace advisor
