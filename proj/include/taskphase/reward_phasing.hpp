#pragma once

#include <cstdint>

#include "taskphase/continuum.hpp"
#include "taskphase/error.hpp"

namespace taskphase {

/// Phased reward for one episode. V1 is the deterministic table (1-b) R^d + R^f;
/// V2 is R^d + R^f with probability 1-b and R^f otherwise, resolved from the seed.
inline RewardTable phased_reward(const ContinuumSpec& spec, double beta, std::uint64_t episode_rng_seed) {
  require(is_reward_mode(spec.mode), ErrorCode::WrongMode, "phased_reward needs a reward continuum");
  return interpolate(spec, beta).episode_reward(episode_rng_seed, 0);
}

/// E[R^b] of the V2 rule, which is the V1 table.
inline RewardTable expected_phased_reward(const ContinuumSpec& spec, double beta) {
  require(is_reward_mode(spec.mode), ErrorCode::WrongMode, "expected_phased_reward needs a reward continuum");
  require_beta(beta);
  return add_rewards(spec.target_task.reward, spec.dense_reward(), 1.0 - beta);
}

/// Learner knobs that the late-phase schedule may override.
struct LearnerHyperparameters {
  double entropy_coef = 0.0;
  double learning_rate = 0.0;
  double alpha = 0.0;

  friend bool operator==(const LearnerHyperparameters&, const LearnerHyperparameters&) = default;
};

struct AnnealSchedule {
  double breakpoint_fraction = 0.75;
  double late_entropy_coef = 0.001;
  double late_learning_rate = 0.00007;
  double late_alpha = 0.001;

  void validate() const {
    require(breakpoint_fraction > 0.0 && breakpoint_fraction <= 1.0, ErrorCode::InvalidArgument,
            "breakpoint_fraction must lie in (0,1]");
    require(late_entropy_coef > 0.0 && late_learning_rate > 0.0 && late_alpha > 0.0, ErrorCode::InvalidArgument,
            "late anneal values must be positive");
  }
};

/// Swaps in the late values once phasing progress reaches the breakpoint.
inline LearnerHyperparameters apply_anneal(const AnnealSchedule& schedule, double beta,
                                           const LearnerHyperparameters& base) {
  schedule.validate();
  if (beta < schedule.breakpoint_fraction) return base;
  return {schedule.late_entropy_coef, schedule.late_learning_rate, schedule.late_alpha};
}

}  // namespace taskphase
