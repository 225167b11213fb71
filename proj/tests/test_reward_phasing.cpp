#include <gtest/gtest.h>

#include <cmath>

#include "taskphase/environments.hpp"
#include "taskphase/random_instances.hpp"
#include "taskphase/reward_phasing.hpp"

using namespace taskphase;
using namespace taskphase::counterexample;

namespace {

ContinuumSpec spec_for(const RewardTable& dense, const RewardTable& target, ContinuumMode mode) {
  ContinuumSpec s;
  s.mode = mode;
  s.start_task = make_initial_reward_task(dense, target);
  s.target_task = make_target_task(target);
  return s;
}

ContinuumSpec counterexample_spec(ContinuumMode mode) {
  const auto env = build_counterexample();
  return spec_for(env.dense_reward, env.target_reward, mode);
}

}  // namespace

TEST(PhasedReward, Endpoints) {
  const auto env = build_counterexample();
  const auto start = add_rewards(env.dense_reward, env.target_reward);
  EXPECT_EQ(phased_reward(counterexample_spec(ContinuumMode::RewardV1), 0.0, 0), start);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    EXPECT_EQ(phased_reward(counterexample_spec(ContinuumMode::RewardV2), 0.0, seed), start);
    EXPECT_EQ(phased_reward(counterexample_spec(ContinuumMode::RewardV1), 1.0, seed), env.target_reward);
    EXPECT_EQ(phased_reward(counterexample_spec(ContinuumMode::RewardV2), 1.0, seed), env.target_reward);
  }
}

TEST(PhasedReward, HalfwayEntry) {
  EXPECT_DOUBLE_EQ(phased_reward(counterexample_spec(ContinuumMode::RewardV1), 0.5, 0)(kStart, kRight), 1.0);
  EXPECT_DOUBLE_EQ(expected_phased_reward(counterexample_spec(ContinuumMode::RewardV2), 0.5)(kStart, kRight), 1.0);
}

TEST(PhasedReward, WrongModeForTemporal) {
  auto spec = counterexample_spec(ContinuumMode::RewardV1);
  spec.mode = ContinuumMode::Temporal;
  try {
    phased_reward(spec, 0.5, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::WrongMode);
  }
}

TEST(PhasedReward, EntriesMoveMonotonicallyWithSignOfDense) {
  KeyedRng rng(8, 0);
  for (int i = 0; i < 20; ++i) {
    const auto dense = random_reward(rng, 4, 3, -2.0, 2.0);
    const auto target = random_reward(rng, 4, 3);
    const auto spec = spec_for(dense, target, ContinuumMode::RewardV1);
    for (int k = 0; k < 10; ++k) {
      const auto a = phased_reward(spec, k / 10.0, 0), b = phased_reward(spec, (k + 1) / 10.0, 0);
      for (std::size_t j = 0; j < a.flat().size(); ++j) {
        if (dense.flat()[j] >= 0) EXPECT_LE(b.flat()[j], a.flat()[j] + 1e-12);
        if (dense.flat()[j] <= 0) EXPECT_GE(b.flat()[j], a.flat()[j] - 1e-12);
      }
    }
  }
}

TEST(PhasedReward, V2MonteCarloMatchesV1Table) {
  KeyedRng rng(19, 0);
  const auto dense = random_reward(rng, 3, 2, 0.0, 3.0);
  const auto target = random_reward(rng, 3, 2);
  const auto v2 = spec_for(dense, target, ContinuumMode::RewardV2);
  const auto v1 = spec_for(dense, target, ContinuumMode::RewardV1);
  const std::size_t n = 100000;
  const double beta = 0.35;
  const auto expected = phased_reward(v1, beta, 0);
  std::vector<double> sum(expected.flat().size()), sum_sq(sum.size());
  for (std::size_t e = 0; e < n; ++e) {
    const auto r = phased_reward(v2, beta, e);
    for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += r.flat()[j], sum_sq[j] += r.flat()[j] * r.flat()[j];
  }
  for (std::size_t j = 0; j < sum.size(); ++j) {
    const double mean = sum[j] / n;
    const double se = std::sqrt(std::max(0.0, sum_sq[j] / n - mean * mean) / n);
    EXPECT_LE(std::abs(mean - expected.flat()[j]), 3.0 * se + 1e-12) << j;
  }
}

TEST(ApplyAnneal, SwapsLateValuesPastBreakpoint) {
  const AnnealSchedule sched;
  const LearnerHyperparameters base{0.01, 0.0003, 0.1};
  const auto late = apply_anneal(sched, 0.80, base);
  EXPECT_DOUBLE_EQ(late.entropy_coef, 0.001);
  EXPECT_DOUBLE_EQ(late.learning_rate, 0.00007);
  EXPECT_DOUBLE_EQ(late.alpha, 0.001);
  EXPECT_EQ(apply_anneal(sched, 0.50, base), base);
  EXPECT_EQ(apply_anneal(sched, 0.75, base), late);
}

TEST(ApplyAnneal, BreakpointAtOne) {
  AnnealSchedule sched;
  sched.breakpoint_fraction = 1.0;
  const LearnerHyperparameters base{0.01, 0.0003, 0.1};
  EXPECT_EQ(apply_anneal(sched, 0.999, base), base);
  EXPECT_NE(apply_anneal(sched, 1.0, base), base);
}

TEST(ApplyAnneal, Idempotent) {
  const AnnealSchedule sched;
  const LearnerHyperparameters base{0.02, 0.001, 0.2};
  for (double beta : {0.0, 0.5, 0.75, 0.9, 1.0}) {
    const auto once = apply_anneal(sched, beta, base);
    EXPECT_EQ(apply_anneal(sched, beta, once), once);
  }
}

TEST(ApplyAnneal, RejectsInvalidSchedule) {
  AnnealSchedule sched;
  sched.breakpoint_fraction = 0.0;
  EXPECT_THROW(apply_anneal(sched, 0.5, {}), Error);
  sched.breakpoint_fraction = 0.5;
  sched.late_alpha = 0.0;
  EXPECT_THROW(apply_anneal(sched, 0.5, {}), Error);
}
