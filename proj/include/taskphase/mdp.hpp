#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "taskphase/error.hpp"

namespace taskphase {

using StateIndex = std::size_t;
using ActionIndex = std::size_t;

inline constexpr double kStochasticTol = 1e-12;

/// Dense (state, action) table of reals, row-major by state.
class ActionTable {
 public:
  ActionTable() = default;
  ActionTable(std::size_t n_states, std::size_t n_actions, double fill = 0.0)
      : n_states_(n_states), n_actions_(n_actions), values_(n_states * n_actions, fill) {}

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }

  double& operator()(StateIndex s, ActionIndex a) { return values_[s * n_actions_ + a]; }
  double operator()(StateIndex s, ActionIndex a) const { return values_[s * n_actions_ + a]; }

  std::span<double> row(StateIndex s) { return {values_.data() + s * n_actions_, n_actions_}; }
  std::span<const double> row(StateIndex s) const { return {values_.data() + s * n_actions_, n_actions_}; }

  std::span<const double> flat() const { return values_; }
  std::span<double> flat() { return values_; }

  bool same_shape(const ActionTable& other) const {
    return n_states_ == other.n_states_ && n_actions_ == other.n_actions_;
  }

  friend bool operator==(const ActionTable&, const ActionTable&) = default;

 private:
  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  std::vector<double> values_;
};

/// Task reward R(s, a). Entries must be finite.
class RewardTable : public ActionTable {
 public:
  using ActionTable::ActionTable;
  RewardTable() = default;
  explicit RewardTable(ActionTable table) : ActionTable(std::move(table)) { validate(); }

  void validate() const {
    for (double v : flat()) require(std::isfinite(v), ErrorCode::InvalidArgument, "reward entries must be finite");
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : flat()) m = std::max(m, std::abs(v));
    return m;
  }
};

/// Per-state action distribution.
class StochasticPolicy : public ActionTable {
 public:
  StochasticPolicy() = default;
  explicit StochasticPolicy(ActionTable probs) : ActionTable(std::move(probs)) { validate(); }

  static StochasticPolicy uniform(std::size_t n_states, std::size_t n_actions) {
    return StochasticPolicy(ActionTable(n_states, n_actions, 1.0 / static_cast<double>(n_actions)));
  }

  /// One-hot policy from a per-state action choice.
  static StochasticPolicy deterministic(std::span<const ActionIndex> actions, std::size_t n_actions) {
    ActionTable t(actions.size(), n_actions, 0.0);
    for (std::size_t s = 0; s < actions.size(); ++s) {
      require(actions[s] < n_actions, ErrorCode::InvalidArgument, "action index out of range");
      t(s, actions[s]) = 1.0;
    }
    return StochasticPolicy(std::move(t));
  }

  void validate() const {
    for (std::size_t s = 0; s < n_states(); ++s) {
      double sum = 0.0;
      for (double p : row(s)) {
        require(std::isfinite(p) && p >= 0.0, ErrorCode::InvalidArgument, "policy entries must be non-negative");
        sum += p;
      }
      require(std::abs(sum - 1.0) <= kStochasticTol, ErrorCode::InvalidArgument,
              "policy row " + std::to_string(s) + " does not sum to 1");
    }
  }

  bool strictly_positive() const {
    for (double p : flat())
      if (!(p > 0.0)) return false;
    return true;
  }

  /// Most likely action, lowest index on ties.
  ActionIndex argmax(StateIndex s) const {
    auto r = row(s);
    ActionIndex best = 0;
    for (ActionIndex a = 1; a < r.size(); ++a)
      if (r[a] > r[best]) best = a;
    return best;
  }
};

struct ValueTable {
  std::vector<double> state_values;
  ActionTable action_values;
};

/// Finite environment: dynamics, discount, terminal set and start distribution.
/// Terminal states self-loop and collect no further reward.
class TabularMdp {
 public:
  TabularMdp() = default;

  TabularMdp(std::size_t n_states, std::size_t n_actions, std::vector<double> transition, double gamma,
             std::vector<StateIndex> terminal_states, std::vector<double> initial_distribution)
      : n_states_(n_states),
        n_actions_(n_actions),
        transition_(std::move(transition)),
        gamma_(gamma),
        terminal_mask_(n_states, 0),
        terminal_states_(std::move(terminal_states)),
        initial_(std::move(initial_distribution)) {
    validate();
  }

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  double gamma() const { return gamma_; }
  const std::vector<StateIndex>& terminal_states() const { return terminal_states_; }
  const std::vector<double>& initial_distribution() const { return initial_; }
  bool is_terminal(StateIndex s) const { return terminal_mask_[s] != 0; }

  double p(StateIndex s, ActionIndex a, StateIndex next) const {
    return transition_[(s * n_actions_ + a) * n_states_ + next];
  }
  std::span<const double> next_distribution(StateIndex s, ActionIndex a) const {
    return {transition_.data() + (s * n_actions_ + a) * n_states_, n_states_};
  }
  const std::vector<double>& transition() const { return transition_; }

  bool shape_matches(const ActionTable& table) const {
    return table.n_states() == n_states_ && table.n_actions() == n_actions_;
  }

 private:
  void validate() {
    require(n_states_ > 0 && n_actions_ > 0, ErrorCode::InvalidArgument, "MDP needs at least one state and action");
    require(transition_.size() == n_states_ * n_actions_ * n_states_, ErrorCode::ShapeMismatch,
            "transition table has wrong size");
    require(gamma_ >= 0.0 && gamma_ <= 1.0, ErrorCode::InvalidArgument, "gamma must lie in [0,1]");
    require(initial_.size() == n_states_, ErrorCode::ShapeMismatch, "initial distribution has wrong size");
    for (StateIndex t : terminal_states_) {
      require(t < n_states_, ErrorCode::InvalidArgument, "terminal state out of range");
      terminal_mask_[t] = 1;
    }
    for (StateIndex s = 0; s < n_states_; ++s) {
      for (ActionIndex a = 0; a < n_actions_; ++a) {
        auto row = next_distribution(s, a);
        double sum = 0.0;
        for (double v : row) {
          require(std::isfinite(v) && v >= 0.0, ErrorCode::InvalidArgument, "transition entries must be >= 0");
          sum += v;
        }
        require(std::abs(sum - 1.0) <= kStochasticTol, ErrorCode::InvalidArgument,
                "transition row (" + std::to_string(s) + "," + std::to_string(a) + ") does not sum to 1");
        if (is_terminal(s))
          require(row[s] == 1.0, ErrorCode::InvalidArgument, "terminal states must self-loop with probability 1");
      }
    }
    double init_sum = 0.0;
    for (double v : initial_) {
      require(std::isfinite(v) && v >= 0.0, ErrorCode::InvalidArgument, "initial entries must be >= 0");
      init_sum += v;
    }
    require(std::abs(init_sum - 1.0) <= kStochasticTol, ErrorCode::InvalidArgument,
            "initial distribution does not sum to 1");
  }

  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  std::vector<double> transition_;
  double gamma_ = 0.0;
  std::vector<std::uint8_t> terminal_mask_;
  std::vector<StateIndex> terminal_states_;
  std::vector<double> initial_;
};

enum class Controller { Demonstrator, Learner };

inline std::string_view to_string(Controller c) {
  return c == Controller::Learner ? "learner" : "demonstrator";
}

struct Step {
  StateIndex state = 0;
  ActionIndex action = 0;
  double reward = 0.0;
  Controller controller = Controller::Learner;

  friend bool operator==(const Step&, const Step&) = default;
};

struct Trajectory {
  std::vector<Step> steps;
  std::size_t horizon = 1;
  /// State reached after the last step (terminal, or the state at the horizon cut).
  StateIndex final_state = 0;

  double total_reward() const {
    double r = 0.0;
    for (const auto& st : steps) r += st.reward;
    return r;
  }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

inline void require_shape(const TabularMdp& mdp, const ActionTable& table, const char* what) {
  require(mdp.shape_matches(table), ErrorCode::ShapeMismatch, std::string(what) + " shape does not match the MDP");
}

}  // namespace taskphase
