#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "advisor/behavior.hpp"
#include "advisor/env/environment.hpp"
#include "advisor/error.hpp"
#include "advisor/mdp.hpp"

namespace advisor {

/// Board as a row-major string over {'.', 'X', 'O'}. The protagonist plays X.
using Board = std::string;

/// Explicit opponent: a distribution over the empty cells of `board`, in
/// cell order. An empty result means the policy is undefined there.
using OpponentFn = std::function<std::vector<double>(const Board& board)>;

/// m-in-a-row on a k×k board. `opponent` names the reply policy: a skill
/// ("L1".."L5", "beta=x", "eps=x", "eps:L1"), "optimal", "random" or
/// "explicit" (then `explicit_opponent` is used).
struct BoardGameSpec {
  int size = 3;
  int win_length = 3;
  std::string opponent = "optimal";
  OpponentFn explicit_opponent;
  bool protagonist_first = true;

  void validate() const {
    if (size < 1 || win_length < 1 || win_length > size) throw config_error("board game needs 1 <= m <= k");
    if (size > 4) throw config_error("board game state space is only enumerable for k <= 4");
    if (opponent == "explicit" && !explicit_opponent) throw config_error("explicit opponent policy is missing");
  }

  std::string id() const {
    return "ttt:" + std::to_string(size) + "x" + std::to_string(size) + "m" + std::to_string(win_length) + ":" + opponent;
  }

  /// Parses the part after "ttt:", e.g. "3x3m3:L1".
  static BoardGameSpec parse(std::string_view text) {
    BoardGameSpec spec;
    const auto colon = text.find(':');
    const std::string shape(text.substr(0, colon));
    int k1 = 0;
    int k2 = 0;
    int m = 0;
    char tail = 0;
    if (std::sscanf(shape.c_str(), "%dx%dm%d%c", &k1, &k2, &m, &tail) != 3 || k1 != k2) {
      throw config_error("malformed board game id: ttt:" + std::string(text));
    }
    spec.size = k1;
    spec.win_length = m;
    if (colon != std::string_view::npos) spec.opponent = std::string(text.substr(colon + 1));
    if (spec.opponent == "explicit") throw config_error("explicit opponents cannot be named by id");
    if (spec.opponent != "optimal" && spec.opponent != "random") parse_skill(spec.opponent);
    spec.validate();
    return spec;
  }
};

/// Rules plus the game-theoretic value of every position, from X's side
/// (1 win, 0.5 draw, 0 loss). Minimax breaks ties by lowest cell index.
class BoardRules {
 public:
  BoardRules(int size, int win_length, bool protagonist_first)
      : k_(size), m_(win_length), first_(protagonist_first ? 'X' : 'O') {
    const int n = k_ * k_;
    lines_through_.resize(static_cast<std::size_t>(n));
    const int dirs[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
    for (int r = 0; r < k_; ++r) {
      for (int c = 0; c < k_; ++c) {
        for (int di = 0; di < 4; ++di) {
          // A single cell is one line, not one per direction.
          if (m_ == 1 && di > 0) break;
          const int* d = dirs[di];
          const int er = r + d[0] * (m_ - 1);
          const int ec = c + d[1] * (m_ - 1);
          if (er < 0 || er >= k_ || ec < 0 || ec >= k_) continue;
          std::vector<int> line;
          for (int i = 0; i < m_; ++i) line.push_back((r + d[0] * i) * k_ + c + d[1] * i);
          for (int cell : line) lines_through_[static_cast<std::size_t>(cell)].push_back(lines_.size());
          lines_.push_back(std::move(line));
        }
      }
    }
  }

  int size() const { return k_; }
  int win_length() const { return m_; }
  int cells() const { return k_ * k_; }
  const std::vector<std::vector<int>>& lines() const { return lines_; }
  Board empty_board() const { return Board(static_cast<std::size_t>(cells()), '.'); }

  char to_move(const Board& b) const {
    const auto x = std::count(b.begin(), b.end(), 'X');
    const auto o = std::count(b.begin(), b.end(), 'O');
    const auto firsts = first_ == 'X' ? x : o;
    const auto seconds = first_ == 'X' ? o : x;
    return firsts == seconds ? first_ : other(first_);
  }

  static char other(char mark) { return mark == 'X' ? 'O' : 'X'; }

  std::vector<int> empty_cells(const Board& b) const {
    std::vector<int> out;
    for (int i = 0; i < cells(); ++i) {
      if (b[static_cast<std::size_t>(i)] == '.') out.push_back(i);
    }
    return out;
  }

  /// Whether the mark just placed at `cell` completes a line.
  bool wins_at(const Board& b, int cell) const {
    const char mark = b[static_cast<std::size_t>(cell)];
    for (std::size_t li : lines_through_[static_cast<std::size_t>(cell)]) {
      const auto& line = lines_[li];
      if (std::all_of(line.begin(), line.end(), [&](int i) { return b[static_cast<std::size_t>(i)] == mark; })) {
        return true;
      }
    }
    return false;
  }

  char winner(const Board& b) const {
    for (const auto& line : lines_) {
      const char mark = b[static_cast<std::size_t>(line.front())];
      if (mark == '.') continue;
      if (std::all_of(line.begin(), line.end(), [&](int i) { return b[static_cast<std::size_t>(i)] == mark; })) {
        return mark;
      }
    }
    return '.';
  }

  bool full(const Board& b) const { return b.find('.') == Board::npos; }
  bool finished(const Board& b) const { return winner(b) != '.' || full(b); }

  /// Outcome value of a finished board for X.
  double outcome(const Board& b) const {
    const char w = winner(b);
    return w == 'X' ? 1.0 : w == 'O' ? 0.0 : 0.5;
  }

  /// Game value for X with both sides optimal.
  double minimax(const Board& b) const {
    if (finished(b)) return outcome(b);
    const auto key = encode(b);
    if (const auto it = memo_.find(key); it != memo_.end()) return it->second;
    const char mover = to_move(b);
    double best = mover == 'X' ? -1.0 : 2.0;
    Board next = b;
    for (int c : empty_cells(b)) {
      next[static_cast<std::size_t>(c)] = mover;
      const double v = minimax(next);
      next[static_cast<std::size_t>(c)] = '.';
      best = mover == 'X' ? std::max(best, v) : std::min(best, v);
    }
    memo_.emplace(key, best);
    return best;
  }

  static std::uint64_t encode(const Board& b) {
    std::uint64_t code = 0;
    for (char c : b) code = code * 3 + (c == '.' ? 0 : c == 'X' ? 1 : 2);
    return code;
  }

  std::string cell_label(int cell) const {
    return std::string(1, static_cast<char>('a' + cell % k_)) + std::to_string(cell / k_ + 1);
  }

 private:
  int k_;
  int m_;
  char first_;
  std::vector<std::vector<int>> lines_;
  std::vector<std::vector<std::size_t>> lines_through_;
  mutable std::unordered_map<std::uint64_t, double> memo_;
};

/// Folded single-agent model. Every legally reachable board where X is to
/// move is a state, as is every reachable finished board; the opponent's
/// reply distribution lives in the transitions.
struct BoardGameModel {
  BoardGameSpec spec;
  std::shared_ptr<const BoardRules> rules;
  TabularMDP mdp;
  std::vector<Board> boards;              // per state
  std::vector<std::vector<int>> actions;  // per state: the cell of each action
};

namespace detail {

inline std::function<std::vector<double>(const Board&, std::span<const double>)> opponent_policy(
    const BoardGameSpec& spec) {
  if (spec.opponent == "explicit") {
    return [fn = spec.explicit_opponent](const Board& b, std::span<const double>) { return fn(b); };
  }
  if (spec.opponent == "optimal") {
    return [](const Board&, std::span<const double> q) { return epsilon_greedy_row(q, 0.0); };
  }
  if (spec.opponent == "random") {
    return [](const Board&, std::span<const double> q) { return boltzmann_row(q, 0.0); };
  }
  const SkillModel skill = parse_skill(spec.opponent);
  return [skill](const Board&, std::span<const double> q) { return skill_row(q, skill); };
}

}  // namespace detail

inline BoardGameModel build_board_game_model(const BoardGameSpec& spec) {
  spec.validate();
  auto rules = std::make_shared<const BoardRules>(spec.size, spec.win_length, spec.protagonist_first);
  const auto& R = *rules;
  const auto policy = detail::opponent_policy(spec);

  BoardGameModel model;
  model.spec = spec;
  model.rules = rules;
  std::unordered_map<std::uint64_t, StateId> index;
  std::deque<Board> frontier;
  MdpBuilder b;
  auto state_of = [&](const Board& board) {
    const auto [it, inserted] = index.try_emplace(BoardRules::encode(board), model.boards.size());
    if (inserted) {
      b.add_state(board, R.finished(board));
      model.boards.push_back(board);
      model.actions.emplace_back();
      if (!R.finished(board)) frontier.push_back(board);
    }
    return it->second;
  };

  // Opponent's reply distribution at a board where O is to move, checked.
  auto replies = [&](const Board& board) {
    const auto cells = R.empty_cells(board);
    std::vector<double> q;
    Board next = board;
    for (int c : cells) {
      next[static_cast<std::size_t>(c)] = 'O';
      q.push_back(1.0 - R.minimax(next));
      next[static_cast<std::size_t>(c)] = '.';
    }
    auto p = policy(board, q);
    double total = 0.0;
    bool valid = p.size() == cells.size();
    for (double x : p) {
      valid = valid && x >= 0.0 && std::isfinite(x);
      total += x;
    }
    if (!valid || std::abs(total - 1.0) > kProbabilityTolerance * static_cast<double>(cells.size() + 1)) {
      throw config_error("opponent policy is undefined at board " + board);
    }
    return std::pair{cells, p};
  };

  std::vector<double> start;
  if (spec.protagonist_first) {
    state_of(R.empty_board());
    start = {1.0};
  } else {
    const Board empty = R.empty_board();
    const auto [cells, p] = replies(empty);
    std::vector<std::pair<StateId, double>> mass;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      Board next = empty;
      next[static_cast<std::size_t>(cells[i])] = 'O';
      mass.emplace_back(state_of(next), p[i]);
    }
    for (const auto& [s, w] : mass) {
      if (start.size() <= s) start.resize(s + 1, 0.0);
      start[s] += w;
    }
  }

  while (!frontier.empty()) {
    const Board board = frontier.front();
    frontier.pop_front();
    const StateId s = index.at(BoardRules::encode(board));
    for (int c : R.empty_cells(board)) {
      Board mine = board;
      mine[static_cast<std::size_t>(c)] = 'X';
      std::vector<Transition> outcomes;
      if (R.wins_at(mine, c) || R.full(mine)) {
        outcomes.push_back({state_of(mine), 1.0, R.outcome(mine)});
      } else {
        const auto [cells, p] = replies(mine);
        for (std::size_t i = 0; i < cells.size(); ++i) {
          Board theirs = mine;
          theirs[static_cast<std::size_t>(cells[i])] = 'O';
          // Every legal position becomes a state, even at zero reply probability.
          const StateId next = state_of(theirs);
          if (p[i] > 0.0) outcomes.push_back({next, p[i], R.finished(theirs) ? R.outcome(theirs) : 0.0});
        }
      }
      model.actions[s].push_back(c);
      b.add_action(s, std::move(outcomes));
    }
  }

  start.resize(model.boards.size(), 0.0);
  b.set_start(start);
  b.set_horizon(R.cells());
  model.mdp = b.build();
  return model;
}

inline TabularMDP build_board_game(const BoardGameSpec& spec) { return build_board_game_model(spec).mdp; }

/// Feature values of a board for X (player) and O (opponent).
inline std::vector<ConceptValue> board_features(const BoardRules& rules, const Board& b) {
  auto count = [&](char mark) { return static_cast<double>(std::count(b.begin(), b.end(), mark)); };
  std::array<double, 2> open{0, 0};
  std::array<double, 2> threats{0, 0};
  for (const auto& line : rules.lines()) {
    int x = 0;
    int o = 0;
    for (int i : line) {
      x += b[static_cast<std::size_t>(i)] == 'X';
      o += b[static_cast<std::size_t>(i)] == 'O';
    }
    const int m = rules.win_length();
    if (o == 0 && x > 0) ++open[0];
    if (x == 0 && o > 0) ++open[1];
    if (o == 0 && x == m - 1) ++threats[0];
    if (x == 0 && o == m - 1) ++threats[1];
  }
  const int k = rules.size();
  std::array<double, 2> center{0, 0};
  for (int r = (k - 1) / 2; r <= k / 2; ++r) {
    for (int c = (k - 1) / 2; c <= k / 2; ++c) {
      const char mark = b[static_cast<std::size_t>(r * k + c)];
      if (mark == 'X') ++center[0];
      if (mark == 'O') ++center[1];
    }
  }
  return {
      {count('X'), count('O')},
      {open[0], open[1]},
      {threats[0], 0.0},  // the player's own winning threats
      {threats[1], 0.0},  // threats the player must answer
      {center[0], center[1]},
  };
}

inline Environment make_board_game_environment(const BoardGameSpec& spec) {
  auto model = std::make_shared<const BoardGameModel>(build_board_game_model(spec));
  Environment env;
  env.id = spec.id();
  env.mdp = model->mdp;
  env.action_label = [model](StateId s, ActionId a) {
    if (model->mdp.is_terminal(s)) return std::string("-");
    return model->rules->cell_label(model->actions.at(s).at(a));
  };
  env.render = [model](StateId s) {
    const auto& board = model->boards.at(s);
    const int k = model->rules->size();
    RenderState r;
    r.kind = "board";
    r.rows = k;
    r.cols = k;
    for (int row = 0; row < k; ++row) r.cells.push_back(board.substr(static_cast<std::size_t>(row * k), static_cast<std::size_t>(k)));
    r.terminal = model->mdp.is_terminal(s);
    r.to_move = r.terminal ? "" : "X";
    return r;
  };
  env.concepts.features = {{"material-on-board", 0.0},
                           {"open-lines", 0.0},
                           {"immediate-threats-for", 0.0},
                           {"immediate-threats-against", 0.0},
                           {"center-control", 0.0}};
  env.concepts.extract = [model](StateId s) { return board_features(*model->rules, model->boards.at(s)); };
  return env;
}

}  // namespace advisor
