#pragma once

#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "advisor/env/board_game.hpp"
#include "advisor/env/environment.hpp"
#include "advisor/env/gridworld.hpp"
#include "advisor/env/trap.hpp"
#include "advisor/error.hpp"

namespace advisor {

/// Resolves `trap`, `grid:<name>`, `grid:<path.json>` and `ttt:<k>x<k>m<m>:<opponent>`.
inline Environment make_environment(std::string_view id) {
  if (id == "trap") return make_trap_environment();
  if (id.starts_with("grid:")) {
    const std::string name(id.substr(5));
    if (name.ends_with(".json")) {
      std::ifstream in(name);
      if (!in) throw config_error("cannot open gridworld spec " + name);
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw config_error("malformed gridworld spec " + name + ": " + e.what());
      }
      auto env = make_gridworld_environment(GridworldSpec::from_json(j));
      env.id = std::string(id);
      return env;
    }
    return make_gridworld_environment(shipped_gridworld(name));
  }
  if (id.starts_with("ttt:")) return make_board_game_environment(BoardGameSpec::parse(id.substr(4)));
  throw config_error("unknown environment: " + std::string(id));
}

inline std::vector<std::string> shipped_environment_ids() {
  std::vector<std::string> ids{"trap"};
  for (const auto& [name, spec] : shipped_gridworlds()) ids.push_back("grid:" + name);
  for (const char* opp : {"L1", "L3", "L5", "optimal", "random"}) ids.push_back(std::string("ttt:3x3m3:") + opp);
  return ids;
}

}  // namespace advisor
