#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "advisor/behavior.hpp"
#include "advisor/env/environment.hpp"
#include "advisor/error.hpp"
#include "advisor/mdp.hpp"
#include "advisor/solve.hpp"

namespace advisor {

/// State and action indices of the expert-trap fixture.
namespace trap {
inline constexpr StateId kStart = 0;
inline constexpr StateId kSharp = 1;   // one of three moves survives
inline constexpr StateId kNarrow = 2;  // must still convert: one of two moves wins
inline constexpr StateId kQuiet = 3;   // forgiving: every move holds 3/4
inline constexpr StateId kWon = 4;
inline constexpr StateId kLost = 5;

inline constexpr ActionId kSharpMove = 0;
inline constexpr ActionId kSafeMove = 1;

inline constexpr double kQuietWinProbability = 0.75;

inline const std::array<std::vector<std::string>, 6> kActionNames{{
    {"SHARP", "SAFE", "BLUNDER-A", "BLUNDER-B"},
    {"PRECISE", "SLIP-A", "SLIP-B"},
    {"FINISH", "FALTER"},
    {"HOLD", "SHUFFLE"},
    {"-"},
    {"-"},
}};
}  // namespace trap

struct TrapInstance {
  TabularMDP mdp;
  StochasticPolicy human;  // Boltzmann(L1) over Q*
};

/// Six-state instance where the expert's move leads into a line that needs
/// two more precise moves, while a quieter move leads to a position any
/// human holds. Q* prefers SHARP; Q^{π_H} prefers SAFE. The construction is
/// checked on every build.
inline TrapInstance build_trap_instance() {
  MdpBuilder b;
  b.add_state("start");
  b.add_state("sharp");
  b.add_state("narrow");
  b.add_state("quiet");
  b.add_state("won", true);
  b.add_state("lost", true);

  b.add_action(trap::kStart, 0.0, {{trap::kSharp, 1.0}});
  b.add_action(trap::kStart, 0.0, {{trap::kQuiet, 1.0}});
  b.add_action(trap::kStart, 0.0, {{trap::kLost, 1.0}});
  b.add_action(trap::kStart, 0.0, {{trap::kLost, 1.0}});

  b.add_action(trap::kSharp, 0.0, {{trap::kNarrow, 1.0}});
  b.add_action(trap::kSharp, 0.0, {{trap::kLost, 1.0}});
  b.add_action(trap::kSharp, 0.0, {{trap::kLost, 1.0}});

  b.add_action(trap::kNarrow, 1.0, {{trap::kWon, 1.0}});
  b.add_action(trap::kNarrow, 0.0, {{trap::kLost, 1.0}});

  const double w = trap::kQuietWinProbability;
  for (int i = 0; i < 2; ++i) {
    b.add_action(trap::kQuiet, {{trap::kWon, w, 1.0}, {trap::kLost, 1.0 - w, 0.0}});
  }

  b.set_start_state(trap::kStart);
  b.set_horizon(3);
  TabularMDP mdp = b.build();

  const auto opt = value_iteration(mdp);
  StochasticPolicy human = make_boltzmann(opt.q, kBoltzmannPresets[0]);
  const auto h = evaluate_policy(mdp, human);
  if (!(opt.q(trap::kStart, trap::kSharpMove) > opt.q(trap::kStart, trap::kSafeMove))) {
    throw domain_error("trap fixture: Q*(start, SHARP) must exceed Q*(start, SAFE)");
  }
  if (!(h.q(trap::kStart, trap::kSafeMove) > h.q(trap::kStart, trap::kSharpMove))) {
    throw domain_error("trap fixture: Q^H(start, SAFE) must exceed Q^H(start, SHARP)");
  }
  return {std::move(mdp), std::move(human)};
}

inline Environment make_trap_environment() {
  Environment env;
  env.id = "trap";
  env.mdp = build_trap_instance().mdp;
  env.action_label = [](StateId s, ActionId a) { return trap::kActionNames.at(s).at(a); };
  env.render = [names = std::vector<std::string>{"start", "sharp", "narrow", "quiet", "won", "lost"}](StateId s) {
    RenderState r;
    r.kind = "node";
    r.cells = {names.at(s)};
    r.to_move = s >= trap::kWon ? "" : "player";
    r.terminal = s >= trap::kWon;
    return r;
  };
  // Immediate losing and winning moves available to the player, against a
  // zero reference.
  env.concepts.features = {{"losing-moves", 0.0}, {"winning-moves", 0.0}};
  env.concepts.extract = [](StateId s) {
    static const std::array<std::pair<int, int>, 6> counts{{{2, 0}, {2, 0}, {1, 1}, {0, 0}, {0, 0}, {0, 0}}};
    return std::vector<ConceptValue>{{static_cast<double>(counts.at(s).first), 0.0},
                                     {static_cast<double>(counts.at(s).second), 0.0}};
  };
  return env;
}

}  // namespace advisor
