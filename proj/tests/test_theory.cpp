#include <gtest/gtest.h>

#include <cmath>

#include "taskphase/theory.hpp"
#include "test_util.hpp"

using namespace taskphase;
using namespace taskphase::counterexample;

namespace {

PolicyCurve hand_curve(std::vector<double> returns_f) {
  PolicyCurve c;
  c.mode = ContinuumMode::RewardV1;
  c.returns_f = std::move(returns_f);
  for (std::size_t i = 0; i < c.returns_f.size(); ++i)
    c.betas.push_back(static_cast<double>(i) / static_cast<double>(c.returns_f.size() - 1));
  return c;
}

}  // namespace

TEST(BetaGrid, CoversEndpointsExactly) {
  const auto g = beta_grid(0.01);
  ASSERT_EQ(g.size(), 101u);
  EXPECT_EQ(g.front(), 0.0);
  EXPECT_EQ(g.back(), 1.0);
  EXPECT_EQ(g[50], 0.5);
}

TEST(PolicyCurve, CounterexampleHardCurveIsAStep) {
  const auto env = build_counterexample();
  const auto curve = compute_policy_curve(env.mdp, counterexample_spec(env, ContinuumMode::RewardV1), env.demo,
                                          beta_grid(0.01), 0.0);
  std::size_t infinite = 0, at = 0;
  for (std::size_t i = 0; i < curve.betas.size(); ++i) {
    EXPECT_DOUBLE_EQ(curve.returns_f[i], curve.betas[i] <= 0.5 ? 0.0 : 1.0) << curve.betas[i];
    if (is_infinite_kl(curve.max_step_kl[i])) ++infinite, at = i;
    else EXPECT_EQ(curve.max_step_kl[i], 0.0);
  }
  EXPECT_EQ(infinite, 1u);
  EXPECT_DOUBLE_EQ(curve.betas[at], 0.51);
  EXPECT_TRUE(check_monotonicity(curve, 1e-9).holds);
}

TEST(PolicyCurve, EndpointsMatchDirectSolves) {
  KeyedRng rng(5, 0);
  for (int i = 0; i < 10; ++i) {
    const auto mdp = random_mdp(rng, 4, 3, 0.9);
    const auto dense = random_reward(rng, 4, 3, 0.0, 2.0), target = random_reward(rng, 4, 3);
    ContinuumSpec spec;
    spec.start_task = make_initial_reward_task(dense, target);
    spec.target_task = make_target_task(target);
    for (double temp : {0.0, 0.5}) {
      const auto curve = compute_policy_curve(mdp, spec, StochasticPolicy::uniform(4, 3), {0.0, 1.0}, temp);
      const auto solve = [&](const RewardTable& r) {
        return temp > 0 ? soft_value_iteration(mdp, r, temp, kSolveTol).second : value_iteration(mdp, r, kSolveTol).second;
      };
      EXPECT_NEAR(curve.returns_f[0], evaluate_policy(mdp, target, solve(spec.start_task.reward)), 1e-9);
      EXPECT_NEAR(curve.returns_f[1], evaluate_policy(mdp, target, solve(target)), 1e-9);
    }
  }
}

TEST(PolicyCurve, RejectsBadGrids) {
  const auto env = build_counterexample();
  const auto spec = counterexample_spec(env, ContinuumMode::RewardV1);
  EXPECT_THROW(compute_policy_curve(env.mdp, spec, env.demo, {0.0, 0.5}, 0.0), Error);
  EXPECT_THROW(compute_policy_curve(env.mdp, spec, env.demo, {0.0, 0.6, 0.4, 1.0}, 0.0), Error);
  EXPECT_THROW(compute_policy_curve(env.mdp, spec, env.demo, {0.0, 1.0}, -1.0), Error);
}

TEST(PolicyCurve, TemporalCurveMatchesEnumeration) {
  KeyedRng rng(6, 0);
  for (int i = 0; i < 15; ++i) {
    const std::size_t n = 2 + rng.index(5), na = 2 + rng.index(2);
    const auto mdp = random_mdp(rng, n, na, 0.9);
    const auto target = random_reward(rng, n, na);
    const auto demo = random_positive_policy(rng, n, na);
    ContinuumSpec spec;
    spec.mode = ContinuumMode::Temporal;
    spec.start_task = make_initial_temporal_task(demo, target);
    spec.target_task = make_target_task(target);
    const auto grid = beta_grid(0.25);
    const auto curve = compute_policy_curve(mdp, spec, demo, grid, 0.0);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      double best = -1e300;
      fixtures::for_each_deterministic_policy(mdp, [&](const StochasticPolicy& rl) {
        best = std::max(best, evaluate_mixture(mdp, target, rl, demo, grid[k]));
      });
      EXPECT_NEAR(curve.returns_f[k], best, 1e-9) << i << " beta " << grid[k];
    }
  }
}

TEST(Monotonicity, NegativeControl) {
  const auto rep = check_monotonicity(hand_curve({0.0, 1.0, 0.5}), 1e-9);
  EXPECT_FALSE(rep.holds);
  EXPECT_DOUBLE_EQ(rep.worst_violation, 0.5);
  EXPECT_DOUBLE_EQ(rep.beta_from, 0.5);
  EXPECT_DOUBLE_EQ(rep.beta_to, 1.0);
  EXPECT_TRUE(check_monotonicity(hand_curve({0.0, 1.0, 1.0 - 1e-12}), 1e-9).holds);
}

TEST(Monotonicity, TemporalCurveIsWrongKind) {
  auto c = hand_curve({0.0, 1.0});
  c.mode = ContinuumMode::Temporal;
  try {
    check_monotonicity(c, 1e-9);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::WrongCurveKind);
  }
}

TEST(Monotonicity, RandomSweepHasNoViolations) {
  const auto rep = monotonicity_sweep(20, 77);
  EXPECT_EQ(rep.instances, 20u);
  EXPECT_EQ(rep.violations, 0u);
  EXPECT_TRUE(rep.holds);
}

TEST(Continuity, SoftCurveKlShrinksWithStep) {
  const auto env = build_counterexample();
  const auto rep = check_continuity(env.mdp, counterexample_spec(env, ContinuumMode::RewardV1), env.demo, 1.0);
  ASSERT_EQ(rep.max_kl.size(), 3u);
  EXPECT_TRUE(rep.holds);
  EXPECT_LE(rep.max_kl[2], 0.1);
  // KL is quadratic in a small policy change, so halving the step quarters it.
  for (std::size_t i = 1; i < 3; ++i) EXPECT_NEAR(rep.max_kl[i] / rep.max_kl[i - 1], 0.25, 0.05);
}

TEST(Continuity, HardCurveFails) {
  const auto env = build_counterexample();
  const auto rep = check_continuity(env.mdp, counterexample_spec(env, ContinuumMode::RewardV1), env.demo, 0.0);
  EXPECT_FALSE(rep.holds);
}

TEST(Counterexample, VerifyReportsBothSwitchPoints) {
  const auto rep = verify_counterexample();
  EXPECT_TRUE(rep.holds);
  EXPECT_EQ(rep.reward_below.action, kRight);
  EXPECT_EQ(rep.reward_above.action, kGoLeft);
  EXPECT_EQ(rep.temporal_below.action, kRight);
  EXPECT_EQ(rep.temporal_above.action, kGoLeft);
  EXPECT_NEAR(rep.reward_below.margin, 0.02, 1e-9);
  EXPECT_NEAR(rep.reward_above.margin, 0.02, 1e-9);
  EXPECT_FALSE(verify_counterexample(0.3, 0.4).holds);
}

TEST(Convergence, SoftCounterexampleConverges) {
  const auto env = build_counterexample();
  const auto rep = check_convergence(env.mdp, counterexample_spec(env, ContinuumMode::RewardV1), env.demo, 0.5, 0.05, 1.0);
  EXPECT_TRUE(rep.reached_optimal);
  EXPECT_EQ(rep.iteration_bound, 21u);
  EXPECT_LE(rep.iterations, 21u);
  EXPECT_LE(std::abs(rep.final_gap), 0.02);
}

TEST(Convergence, DegenerateContinuumNeedsOneStep) {
  const auto env = build_counterexample();
  ContinuumSpec spec;
  spec.start_task = make_initial_reward_task(RewardTable(3, 2), env.target_reward);
  spec.target_task = make_target_task(env.target_reward);
  const auto rep = check_convergence(env.mdp, spec, env.demo, 1e6, 1.0, 0.0);
  EXPECT_TRUE(rep.reached_optimal);
  EXPECT_LE(rep.iterations, 2u);
  EXPECT_NEAR(rep.final_gap, 0.0, 1e-6);
}

TEST(Convergence, IterationBoundFormula) {
  EXPECT_EQ(iteration_bound(1.0), 2u);
  EXPECT_EQ(iteration_bound(0.5), 3u);
  EXPECT_EQ(iteration_bound(0.1), 11u);
  EXPECT_EQ(iteration_bound(0.05), 21u);
  EXPECT_EQ(iteration_bound(0.3), 5u);
}

TEST(Convergence, LargestConvergingAlphaOnSoftInstance) {
  const auto env = build_counterexample();
  const auto a = largest_converging_alpha(env.mdp, counterexample_spec(env, ContinuumMode::RewardV1), env.demo, 0.5, 1.0);
  ASSERT_TRUE(a.has_value());
  EXPECT_GE(*a, 0.05);
}

TEST(V2Equivalence, CounterexampleAndRandomInstance) {
  const auto env = build_counterexample();
  const auto rep = check_v2_equivalence(env.mdp, env.dense_reward, env.target_reward, beta_grid(0.05), 100000, 1);
  EXPECT_TRUE(rep.holds);
  EXPECT_EQ(rep.entries_outside, 0u);
  EXPECT_TRUE(rep.curves_agree);

  KeyedRng rng(2, 0);
  const auto mdp = random_mdp(rng, 5, 3, 0.9);
  const auto r = check_v2_equivalence(mdp, random_reward(rng, 5, 3, 0.0, 2.0), random_reward(rng, 5, 3), beta_grid(0.1),
                                      20000, 3);
  EXPECT_TRUE(r.curves_agree);
}
