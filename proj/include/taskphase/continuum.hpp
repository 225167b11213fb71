#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "taskphase/error.hpp"
#include "taskphase/mdp.hpp"
#include "taskphase/protocol.hpp"
#include "taskphase/random.hpp"

namespace taskphase {

enum class ControlMode { LearnerFull, Temporal };

/// Per-episode random reward: `bonus` is added with probability 1 - beta.
struct RandomRewardRule {
  RewardTable bonus;
  double beta = 0.0;

  friend bool operator==(const RandomRewardRule&, const RandomRewardRule&) = default;
};

/// Reward plus control assignment: the object the curriculum walks over.
struct Task {
  RewardTable reward;
  ControlMode control = ControlMode::LearnerFull;
  ControlProtocol protocol;     // used when control == Temporal
  double temporal_beta = 1.0;   // learner-control probability when control == Temporal
  std::optional<RandomRewardRule> random_reward;
  std::string label;

  /// Reward table for one episode. Resolves the random rule with one coin per episode.
  RewardTable episode_reward(std::uint64_t seed, std::uint64_t episode) const;

  /// Learner-control probability; 1 for full control.
  double learner_share() const { return control == ControlMode::Temporal ? temporal_beta : 1.0; }

  friend bool operator==(const Task&, const Task&) = default;
};

enum class ContinuumMode { Temporal, RewardV1, RewardV2 };

inline std::string_view to_string(ContinuumMode m) {
  switch (m) {
    case ContinuumMode::Temporal: return "temporal";
    case ContinuumMode::RewardV1: return "reward_v1";
    case ContinuumMode::RewardV2: return "reward_v2";
  }
  return "?";
}

inline ContinuumMode continuum_mode_from_string(std::string_view name) {
  if (name == "temporal") return ContinuumMode::Temporal;
  if (name == "reward_v1") return ContinuumMode::RewardV1;
  if (name == "reward_v2") return ContinuumMode::RewardV2;
  fail(ErrorCode::InvalidArgument, "unknown continuum mode " + std::string(name));
}

inline bool is_reward_mode(ContinuumMode m) { return m != ContinuumMode::Temporal; }

struct ContinuumSpec {
  ContinuumMode mode = ContinuumMode::RewardV1;
  Task start_task;
  Task target_task;

  void validate() const {
    require(start_task.reward.same_shape(target_task.reward), ErrorCode::ShapeMismatch,
            "start and target tasks have different dimensions");
  }

  /// R^d recovered from R^s = R^d + R^f.
  RewardTable dense_reward() const {
    RewardTable d = start_task.reward;
    for (std::size_t i = 0; i < d.flat().size(); ++i) d.flat()[i] -= target_task.reward.flat()[i];
    return d;
  }
};

inline RewardTable add_rewards(const RewardTable& a, const RewardTable& b, double scale_b = 1.0) {
  require(a.same_shape(b), ErrorCode::ShapeMismatch, "reward tables differ in shape");
  RewardTable out = a;
  for (std::size_t i = 0; i < out.flat().size(); ++i) out.flat()[i] += scale_b * b.flat()[i];
  return out;
}

inline RewardTable Task::episode_reward(std::uint64_t seed, std::uint64_t episode) const {
  if (!random_reward) return reward;
  const double u = uniform01({seed, episode, static_cast<std::uint64_t>(Stream::RewardCoin)});
  return u > random_reward->beta ? add_rewards(reward, random_reward->bonus) : reward;
}

/// Initial temporal task: the demonstrator always controls (beta = 0).
inline Task make_initial_temporal_task(const StochasticPolicy& demo_policy, const RewardTable& target_reward,
                                       ControlProtocol protocol = {}) {
  demo_policy.validate();
  require(demo_policy.same_shape(target_reward), ErrorCode::ShapeMismatch, "policy and reward differ in shape");
  Task t;
  t.reward = target_reward;
  t.control = ControlMode::Temporal;
  t.protocol = protocol;
  t.temporal_beta = 0.0;
  t.label = "temporal initial";
  return t;
}

/// Initial reward task: full learner control with R^s = R^d + R^f.
inline Task make_initial_reward_task(const RewardTable& dense_reward, const RewardTable& target_reward) {
  Task t;
  t.reward = add_rewards(dense_reward, target_reward);
  t.control = ControlMode::LearnerFull;
  t.label = "reward initial";
  return t;
}

inline Task make_target_task(const RewardTable& target_reward) {
  Task t;
  t.reward = target_reward;
  t.control = ControlMode::LearnerFull;
  t.label = "target";
  return t;
}

/// Convex task continuum with beta measured as progress from start (0) to target (1):
/// Con(b, target, start) = b * target + (1 - b) * start.
inline Task interpolate(const ContinuumSpec& spec, double beta) {
  require_beta(beta);
  spec.validate();
  if (beta == 0.0) return spec.start_task;
  if (beta == 1.0) return spec.target_task;

  Task t;
  t.label = std::string(to_string(spec.mode)) + " beta=" + std::to_string(beta);
  switch (spec.mode) {
    case ContinuumMode::Temporal:
      t.reward = add_rewards(spec.start_task.reward, add_rewards(spec.target_task.reward, spec.start_task.reward, -1.0),
                             beta);
      t.control = ControlMode::Temporal;
      t.protocol = spec.start_task.protocol;
      t.temporal_beta = beta;
      break;
    case ContinuumMode::RewardV1:
      // (1 - b) R^s + b R^f = (1 - b) R^d + R^f
      t.reward = add_rewards(spec.target_task.reward, spec.dense_reward(), 1.0 - beta);
      break;
    case ContinuumMode::RewardV2:
      t.reward = spec.target_task.reward;
      t.random_reward = RandomRewardRule{spec.dense_reward(), beta};
      break;
  }
  return t;
}

}  // namespace taskphase
