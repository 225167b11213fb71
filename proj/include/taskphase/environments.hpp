#pragma once

#include <algorithm>
#include <array>
#include <deque>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "taskphase/error.hpp"
#include "taskphase/mdp.hpp"

namespace taskphase {

// ---------------------------------------------------------------------------
// Two-step counterexample with a discontinuous optimal-policy curve

namespace counterexample {
inline constexpr StateIndex kStart = 0;     // s^0
inline constexpr StateIndex kLeft = 1;      // s^l
inline constexpr StateIndex kTerminal = 2;
inline constexpr ActionIndex kRight = 0;    // a^r at s^0, ends the episode
inline constexpr ActionIndex kGoLeft = 1;   // a^l at s^0, moves to s^l
inline constexpr ActionIndex kFirst = 0;    // a^1 at s^l
inline constexpr ActionIndex kSecond = 1;   // a^2 at s^l
}  // namespace counterexample

struct CounterexampleEnv {
  TabularMdp mdp;
  RewardTable target_reward;  // R^f
  RewardTable dense_reward;   // R^d
  StochasticPolicy demo;
};

/// Episodic, gamma = 1. R^d = [2, 0, 0, 0] on ((s0,ar), (s0,al), (sl,a1), (sl,a2)).
/// R^f is a reconstruction: [0, 0, -1, +1]. With it both the reward-phasing and the
/// temporal-phasing optimal choice at s0 switch exactly at beta = 0.5.
inline CounterexampleEnv build_counterexample() {
  using namespace counterexample;
  const std::size_t n = 3, na = 2;
  std::vector<double> p(n * na * n, 0.0);
  auto set = [&](StateIndex s, ActionIndex a, StateIndex t) { p[(s * na + a) * n + t] = 1.0; };
  set(kStart, kRight, kTerminal);
  set(kStart, kGoLeft, kLeft);
  set(kLeft, kFirst, kTerminal);
  set(kLeft, kSecond, kTerminal);
  set(kTerminal, 0, kTerminal);
  set(kTerminal, 1, kTerminal);

  CounterexampleEnv env{TabularMdp(n, na, std::move(p), 1.0, {kTerminal}, {1.0, 0.0, 0.0}), RewardTable(n, na, 0.0),
                        RewardTable(n, na, 0.0), StochasticPolicy()};
  env.target_reward(kLeft, kFirst) = -1.0;
  env.target_reward(kLeft, kSecond) = 1.0;
  env.dense_reward(kStart, kRight) = 2.0;
  const std::array<ActionIndex, 3> demo_actions{kRight, kFirst, 0};
  env.demo = StochasticPolicy::deterministic(demo_actions, na);
  return env;
}

// ---------------------------------------------------------------------------
// Gridworlds

struct Cell {
  int row = 0;
  int col = 0;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

enum GridAction : ActionIndex { Up = 0, Right = 1, Down = 2, Left = 3 };
inline constexpr std::size_t kGridActions = 4;

struct GridWorldSpec {
  int width = 7;
  int height = 7;
  std::set<Cell> walls;
  std::set<Cell> hazards;              // absorbing, no further reward
  std::optional<Cell> flag_cell;
  std::optional<Cell> base_cell;
  std::optional<Cell> goal_cell;
  std::optional<Cell> start_cell;      // defaults to base (flag grid) or column 0 of the goal row
  double slip_probability = 0.0;       // chance the action is replaced by a uniformly random one
  double goal_reward = 1.0;
  double step_reward = 0.0;
  double gamma = 0.95;
  double demo_noise = 0.1;             // mass spread uniformly over all actions
  std::set<Cell> demo_avoid;           // cells the scripted demonstrator routes around

  bool inside(Cell c) const { return c.row >= 0 && c.row < height && c.col >= 0 && c.col < width; }
  bool open(Cell c) const { return inside(c) && !walls.count(c); }
};

/// Flag grid: go to the flag, bring it back to base. The wall at column 3 leaves
/// two gaps; the demonstrator avoids the nearer one and takes the longer route.
inline GridWorldSpec default_flag_grid_spec() {
  GridWorldSpec spec;
  for (int r = 0; r <= 4; ++r) spec.walls.insert({r, 3});
  spec.base_cell = Cell{1, 0};
  spec.flag_cell = Cell{1, 6};
  spec.demo_avoid.insert({5, 3});
  spec.demo_noise = 0.1;
  return spec;
}

/// Cliff slide: a one-cell corridor between two hazard rows.
inline GridWorldSpec default_cliff_slide_spec() {
  GridWorldSpec spec;
  spec.width = 8;
  spec.height = 3;
  for (int c = 0; c < spec.width; ++c) {
    spec.hazards.insert({0, c});
    spec.hazards.insert({2, c});
  }
  spec.start_cell = Cell{1, 0};
  spec.goal_cell = Cell{1, 7};
  spec.demo_noise = 0.0;
  return spec;
}

struct GridEnvironment {
  TabularMdp mdp;
  RewardTable reward;
  StochasticPolicy demo;
  GridWorldSpec spec;
  std::vector<Cell> cell_of_state;
  std::vector<bool> carries_flag;
  std::vector<StateIndex> success_states;

  bool is_success(StateIndex s) const {
    return std::find(success_states.begin(), success_states.end(), s) != success_states.end();
  }
};

namespace detail {

inline Cell moved(const GridWorldSpec& spec, Cell c, ActionIndex a) {
  static constexpr std::array<int, 4> dr{-1, 0, 1, 0};
  static constexpr std::array<int, 4> dc{0, 1, 0, -1};
  const Cell next{c.row + dr[a], c.col + dc[a]};
  return spec.open(next) ? next : c;
}

/// BFS distance to `target` over open cells not in `blocked`.
inline std::vector<int> grid_distances(const GridWorldSpec& spec, Cell target, const std::set<Cell>& blocked) {
  std::vector<int> dist(static_cast<std::size_t>(spec.width * spec.height), std::numeric_limits<int>::max());
  auto idx = [&](Cell c) { return static_cast<std::size_t>(c.row * spec.width + c.col); };
  std::deque<Cell> queue{target};
  dist[idx(target)] = 0;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    for (ActionIndex a = 0; a < kGridActions; ++a) {
      const Cell n = moved(spec, c, a);
      if (n == c || blocked.count(n) || dist[idx(n)] != std::numeric_limits<int>::max()) continue;
      dist[idx(n)] = dist[idx(c)] + 1;
      queue.push_back(n);
    }
  }
  return dist;
}

/// Greedy step toward `target`, preferring the demonstrator's map and falling back to the true map.
inline ActionIndex route_action(const GridWorldSpec& spec, Cell from, const std::vector<int>& preferred,
                                const std::vector<int>& fallback) {
  auto idx = [&](Cell c) { return static_cast<std::size_t>(c.row * spec.width + c.col); };
  const bool use_preferred = preferred[idx(from)] != std::numeric_limits<int>::max();
  const auto& dist = use_preferred ? preferred : fallback;
  ActionIndex best = Up;
  int best_d = std::numeric_limits<int>::max();
  for (ActionIndex a = 0; a < kGridActions; ++a) {
    const Cell n = moved(spec, from, a);
    if (n == from) continue;
    if (dist[idx(n)] < best_d) { best_d = dist[idx(n)]; best = a; }
  }
  return best;
}

inline void validate_cell(const GridWorldSpec& spec, const std::optional<Cell>& c, const char* what) {
  if (!c) return;
  require(spec.inside(*c), ErrorCode::InvalidSpec, std::string(what) + " lies outside the grid");
  require(!spec.walls.count(*c), ErrorCode::InvalidSpec, std::string(what) + " lies on a wall");
}

inline void validate_grid(const GridWorldSpec& spec) {
  require(spec.width > 0 && spec.height > 0, ErrorCode::InvalidSpec, "grid dimensions must be positive");
  require(spec.slip_probability >= 0.0 && spec.slip_probability < 1.0, ErrorCode::InvalidSpec,
          "slip_probability must lie in [0,1)");
  require(spec.demo_noise >= 0.0 && spec.demo_noise <= 1.0, ErrorCode::InvalidSpec, "demo_noise must lie in [0,1]");
  require(spec.gamma > 0.0 && spec.gamma <= 1.0, ErrorCode::InvalidSpec, "gamma must lie in (0,1]");
  validate_cell(spec, spec.flag_cell, "flag cell");
  validate_cell(spec, spec.base_cell, "base cell");
  validate_cell(spec, spec.goal_cell, "goal cell");
  validate_cell(spec, spec.start_cell, "start cell");
  for (const auto& h : spec.hazards) validate_cell(spec, h, "hazard");
}

struct GridLayout {
  std::vector<Cell> free_cells;
  std::vector<long> free_index;  // grid cell -> free index or -1
};

inline GridLayout layout(const GridWorldSpec& spec) {
  GridLayout out;
  out.free_index.assign(static_cast<std::size_t>(spec.width * spec.height), -1);
  for (int r = 0; r < spec.height; ++r)
    for (int c = 0; c < spec.width; ++c)
      if (!spec.walls.count({r, c})) {
        out.free_index[static_cast<std::size_t>(r * spec.width + c)] = static_cast<long>(out.free_cells.size());
        out.free_cells.push_back({r, c});
      }
  return out;
}

/// Next-cell distribution for (cell, action) including slip.
inline std::vector<std::pair<Cell, double>> cell_successors(const GridWorldSpec& spec, Cell c, ActionIndex a) {
  std::vector<std::pair<Cell, double>> out;
  auto add = [&](Cell n, double p) {
    if (p == 0.0) return;
    for (auto& [cell, q] : out)
      if (cell == n) { q += p; return; }
    out.emplace_back(n, p);
  };
  add(moved(spec, c, a), 1.0 - spec.slip_probability);
  for (ActionIndex b = 0; b < kGridActions; ++b) add(moved(spec, c, b), spec.slip_probability / kGridActions);
  return out;
}

inline StochasticPolicy noisy_policy(const std::vector<ActionIndex>& actions, double noise) {
  ActionTable t(actions.size(), kGridActions);
  for (StateIndex s = 0; s < actions.size(); ++s)
    for (ActionIndex a = 0; a < kGridActions; ++a)
      t(s, a) = (a == actions[s] ? 1.0 - noise : 0.0) + noise / static_cast<double>(kGridActions);
  return StochasticPolicy(std::move(t));
}

}  // namespace detail

/// State = (cell, has_flag), index = has_flag * n_free + row-major free-cell index.
/// Reward goal_reward only on entering the base while carrying the flag; that state is terminal.
inline GridEnvironment build_flag_grid(const GridWorldSpec& spec) {
  detail::validate_grid(spec);
  require(spec.flag_cell && spec.base_cell, ErrorCode::InvalidSpec, "flag grid needs flag and base cells");
  require(*spec.flag_cell != *spec.base_cell, ErrorCode::InvalidSpec, "flag and base must differ");
  const auto lay = detail::layout(spec);
  const std::size_t n_free = lay.free_cells.size();
  const std::size_t n = 2 * n_free;
  auto state_of = [&](Cell c, bool flag) {
    return static_cast<StateIndex>(flag ? n_free : 0) +
           static_cast<StateIndex>(lay.free_index[static_cast<std::size_t>(c.row * spec.width + c.col)]);
  };
  const StateIndex success = state_of(*spec.base_cell, true);

  std::vector<StateIndex> terminal{success};
  for (const auto& h : spec.hazards) {
    terminal.push_back(state_of(h, false));
    terminal.push_back(state_of(h, true));
  }
  std::sort(terminal.begin(), terminal.end());
  terminal.erase(std::unique(terminal.begin(), terminal.end()), terminal.end());
  auto is_terminal = [&](StateIndex s) { return std::binary_search(terminal.begin(), terminal.end(), s); };

  std::vector<double> p(n * kGridActions * n, 0.0);
  RewardTable reward(n, kGridActions, 0.0);
  GridEnvironment env;
  env.cell_of_state.resize(n);
  env.carries_flag.resize(n);
  for (StateIndex s = 0; s < n; ++s) {
    const bool flag = s >= n_free;
    const Cell c = lay.free_cells[s % n_free];
    env.cell_of_state[s] = c;
    env.carries_flag[s] = flag;
    for (ActionIndex a = 0; a < kGridActions; ++a) {
      double* row = p.data() + (s * kGridActions + a) * n;
      if (is_terminal(s)) { row[s] = 1.0; continue; }
      reward(s, a) = spec.step_reward;
      for (const auto& [next, prob] : detail::cell_successors(spec, c, a)) {
        const StateIndex t = state_of(next, flag || next == *spec.flag_cell);
        row[t] += prob;
        if (t == success) reward(s, a) += spec.goal_reward * prob;
      }
    }
  }
  const Cell start = spec.start_cell.value_or(*spec.base_cell);
  std::vector<double> initial(n, 0.0);
  initial[state_of(start, start == *spec.flag_cell)] = 1.0;
  env.mdp = TabularMdp(n, kGridActions, std::move(p), spec.gamma, terminal, std::move(initial));
  env.reward = std::move(reward);
  env.success_states = {success};

  std::set<Cell> avoid = spec.demo_avoid;
  avoid.insert(spec.hazards.begin(), spec.hazards.end());
  const auto to_flag_pref = detail::grid_distances(spec, *spec.flag_cell, avoid);
  const auto to_flag = detail::grid_distances(spec, *spec.flag_cell, spec.hazards);
  const auto to_base_pref = detail::grid_distances(spec, *spec.base_cell, avoid);
  const auto to_base = detail::grid_distances(spec, *spec.base_cell, spec.hazards);
  std::vector<ActionIndex> actions(n, Up);
  for (StateIndex s = 0; s < n; ++s) {
    if (is_terminal(s)) continue;
    actions[s] = env.carries_flag[s] ? detail::route_action(spec, env.cell_of_state[s], to_base_pref, to_base)
                                     : detail::route_action(spec, env.cell_of_state[s], to_flag_pref, to_flag);
  }
  env.demo = detail::noisy_policy(actions, spec.demo_noise);
  env.spec = spec;
  return env;
}

/// Corridor to a goal between absorbing hazards. Entering the goal pays goal_reward and ends the episode.
inline GridEnvironment build_cliff_slide(const GridWorldSpec& spec) {
  detail::validate_grid(spec);
  require(!spec.hazards.empty(), ErrorCode::InvalidSpec, "cliff slide needs hazard cells");
  require(spec.goal_cell.has_value(), ErrorCode::InvalidSpec, "cliff slide needs a goal cell");
  require(!spec.hazards.count(*spec.goal_cell), ErrorCode::InvalidSpec, "goal cannot be a hazard");
  const auto lay = detail::layout(spec);
  const std::size_t n = lay.free_cells.size();
  auto state_of = [&](Cell c) {
    return static_cast<StateIndex>(lay.free_index[static_cast<std::size_t>(c.row * spec.width + c.col)]);
  };
  const StateIndex goal = state_of(*spec.goal_cell);
  std::vector<StateIndex> terminal{goal};
  for (const auto& h : spec.hazards) terminal.push_back(state_of(h));
  std::sort(terminal.begin(), terminal.end());
  auto is_terminal = [&](StateIndex s) { return std::binary_search(terminal.begin(), terminal.end(), s); };

  std::vector<double> p(n * kGridActions * n, 0.0);
  RewardTable reward(n, kGridActions, 0.0);
  GridEnvironment env;
  env.cell_of_state = lay.free_cells;
  env.carries_flag.assign(n, false);
  for (StateIndex s = 0; s < n; ++s) {
    for (ActionIndex a = 0; a < kGridActions; ++a) {
      double* row = p.data() + (s * kGridActions + a) * n;
      if (is_terminal(s)) { row[s] = 1.0; continue; }
      reward(s, a) = spec.step_reward;
      for (const auto& [next, prob] : detail::cell_successors(spec, lay.free_cells[s], a)) {
        const StateIndex t = state_of(next);
        row[t] += prob;
        if (t == goal) reward(s, a) += spec.goal_reward * prob;
      }
    }
  }
  const Cell start = spec.start_cell.value_or(Cell{spec.goal_cell->row, 0});
  require(!spec.hazards.count(start), ErrorCode::InvalidSpec, "start cannot be a hazard");
  std::vector<double> initial(n, 0.0);
  initial[state_of(start)] = 1.0;
  env.mdp = TabularMdp(n, kGridActions, std::move(p), spec.gamma, terminal, std::move(initial));
  env.reward = std::move(reward);
  env.success_states = {goal};

  const auto to_goal = detail::grid_distances(spec, *spec.goal_cell, spec.hazards);
  std::vector<ActionIndex> actions(n, Up);
  for (StateIndex s = 0; s < n; ++s)
    if (!is_terminal(s)) actions[s] = detail::route_action(spec, lay.free_cells[s], to_goal, to_goal);
  env.demo = detail::noisy_policy(actions, spec.demo_noise);
  env.spec = spec;
  return env;
}

}  // namespace taskphase
