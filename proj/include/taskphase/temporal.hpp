#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "taskphase/error.hpp"
#include "taskphase/mdp.hpp"
#include "taskphase/protocol.hpp"
#include "taskphase/solvers.hpp"

namespace taskphase {

/// Rollout in which each step is played by the policy `assign_controller` names.
/// Draws are keyed by (rng_seed, episode, t); the protocol's own seed keys the controller coins.
inline Trajectory rollout_mixture(const TabularMdp& mdp, const RewardTable& reward, const StochasticPolicy& rl_policy,
                                  const StochasticPolicy& demo_policy, const ControlProtocol& protocol, double beta,
                                  std::size_t horizon, std::uint64_t rng_seed, std::uint64_t episode = 0) {
  require_beta(beta);
  require_shape(mdp, reward, "reward");
  require_shape(mdp, rl_policy, "rl policy");
  require_shape(mdp, demo_policy, "demo policy");
  ControlProtocol keyed = protocol;
  keyed.rng_seed = hash_key({protocol.rng_seed, rng_seed});
  return rollout(mdp, reward, horizon, rng_seed, episode, [&](StateIndex s, std::size_t t) {
    const Controller c = assign_controller(keyed, beta, t, episode);
    return std::pair{c == Controller::Learner ? rl_policy.row(s) : demo_policy.row(s), c};
  });
}

/// Clipped likelihood ratio rl(a|s) / demo(a|s) for demonstrator-controlled samples.
inline double importance_weight(const StochasticPolicy& rl_policy, const StochasticPolicy& demo_policy, StateIndex s,
                                ActionIndex a, double clip = 10.0) {
  require(clip >= 1.0, ErrorCode::InvalidArgument, "clip must be >= 1");
  require(rl_policy.same_shape(demo_policy), ErrorCode::ShapeMismatch, "policies differ in shape");
  require(s < rl_policy.n_states() && a < rl_policy.n_actions(), ErrorCode::InvalidArgument, "(s,a) out of range");
  const double demo = demo_policy(s, a);
  require(demo > 0.0, ErrorCode::UnsupportedAction, "demonstrator never takes this action; drop the sample");
  const double rl = rl_policy(s, a);
  if (rl == demo) return 1.0;
  return std::min(rl / demo, clip);
}

/// Environment seen by the learner when it controls each step with probability beta:
/// P_b(s,a) = b P(s,a) + (1-b) sum_x demo(x|s) P(s,x), and likewise for the reward.
/// Evaluating an RL policy here equals evaluating the per-step mixture on the original MDP.
inline std::pair<TabularMdp, RewardTable> mixture_induced_mdp(const TabularMdp& mdp, const RewardTable& reward,
                                                              const StochasticPolicy& demo_policy, double beta) {
  require_beta(beta);
  require_shape(mdp, reward, "reward");
  require_shape(mdp, demo_policy, "demo policy");
  const auto n = mdp.n_states();
  const auto na = mdp.n_actions();
  std::vector<double> demo_next(n);
  std::vector<double> transition(n * na * n);
  RewardTable mixed(n, na);
  for (StateIndex s = 0; s < n; ++s) {
    std::fill(demo_next.begin(), demo_next.end(), 0.0);
    double demo_reward = 0.0;
    for (ActionIndex x = 0; x < na; ++x) {
      const double px = demo_policy(s, x);
      if (px == 0.0) continue;
      demo_reward += px * reward(s, x);
      auto row = mdp.next_distribution(s, x);
      for (StateIndex t = 0; t < n; ++t) demo_next[t] += px * row[t];
    }
    for (ActionIndex a = 0; a < na; ++a) {
      auto row = mdp.next_distribution(s, a);
      double* out = transition.data() + (s * na + a) * n;
      if (mdp.is_terminal(s)) {
        std::copy(row.begin(), row.end(), out);
      } else {
        double sum = 0.0;
        for (StateIndex t = 0; t < n; ++t) sum += out[t] = beta * row[t] + (1.0 - beta) * demo_next[t];
        for (StateIndex t = 0; t < n; ++t) out[t] /= sum;
      }
      mixed(s, a) = beta * reward(s, a) + (1.0 - beta) * demo_reward;
    }
  }
  return {TabularMdp(n, na, std::move(transition), mdp.gamma(), mdp.terminal_states(), mdp.initial_distribution()),
          std::move(mixed)};
}

// ---------------------------------------------------------------------------
// Step-size scheduling

enum class ScheduleMode { FixedInterval, Threshold };

struct AlphaScheduler {
  double alpha = 0.1;
  ScheduleMode mode = ScheduleMode::FixedInterval;
  std::size_t episodes_per_phase = 200;  // FixedInterval
  std::size_t window = 50;               // Threshold
  double threshold_value = 0.0;          // Threshold
  double beta_cap = 1.0;

  void validate() const {
    require(alpha > 0.0 && alpha <= 1.0, ErrorCode::InvalidArgument, "alpha must lie in (0,1]");
    require(window >= 1, ErrorCode::InvalidArgument, "window must be >= 1");
  }
};

/// Advance beta by alpha, unconditionally (fixed interval) or when the mean of the
/// last `window` scores reaches the threshold. Sums within 1e-12 of the cap snap to it.
inline double update_beta(const AlphaScheduler& scheduler, double beta, std::span<const double> recent_scores = {}) {
  scheduler.validate();
  require_beta(beta);
  const auto advance = [&] {
    const double next = beta + scheduler.alpha;
    return next >= scheduler.beta_cap - 1e-12 ? scheduler.beta_cap : next;
  };
  if (scheduler.mode == ScheduleMode::FixedInterval) return advance();

  require(recent_scores.size() >= scheduler.window, ErrorCode::InsufficientHistory,
          "threshold schedule needs at least `window` scores");
  const auto tail = recent_scores.last(scheduler.window);
  const double mean = std::accumulate(tail.begin(), tail.end(), 0.0) / static_cast<double>(tail.size());
  return mean >= scheduler.threshold_value ? advance() : beta;
}

}  // namespace taskphase
