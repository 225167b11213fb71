#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "taskphase/continuum.hpp"
#include "taskphase/environments.hpp"
#include "taskphase/error.hpp"
#include "taskphase/random_instances.hpp"
#include "taskphase/reward_phasing.hpp"
#include "taskphase/rl_eps.hpp"
#include "taskphase/solvers.hpp"
#include "taskphase/temporal.hpp"

namespace taskphase {

inline constexpr double kSolveTol = 1e-12;

/// Exact optimal policy as a function of beta.
struct PolicyCurve {
  ContinuumMode mode = ContinuumMode::RewardV1;
  double temperature = 0.0;
  std::vector<double> betas;
  std::vector<StochasticPolicy> policies;
  std::vector<double> returns_f;
  std::vector<double> returns_d;
  std::vector<double> max_step_kl;  // [0] is 0; [i] = E_{d_i} KL(pi_{i-1} || pi_i)
};

/// Grid 0, h, 2h, ..., 1 built from integer multiples so that 0.5 lands exactly.
inline std::vector<double> beta_grid(double step) {
  require(step > 0.0 && step <= 1.0, ErrorCode::InvalidArgument, "grid step must lie in (0,1]");
  const auto n = static_cast<std::size_t>(std::llround(1.0 / step));
  std::vector<double> grid;
  for (std::size_t i = 0; i <= n; ++i) grid.push_back(static_cast<double>(i) / static_cast<double>(n));
  return grid;
}

/// The problem solved at beta: reward continua solve the MDP on E[R^beta];
/// the temporal continuum solves the learner's best response on the mixture-induced MDP.
struct PhaseProblem {
  TabularMdp mdp;
  RewardTable reward;
};

inline PhaseProblem phase_problem(const TabularMdp& mdp, const ContinuumSpec& spec, const StochasticPolicy& demo,
                                  double beta) {
  if (is_reward_mode(spec.mode)) return {mdp, expected_phased_reward(spec, beta)};
  auto [induced, reward] = mixture_induced_mdp(mdp, interpolate(spec, beta).reward, demo, beta);
  return {std::move(induced), std::move(reward)};
}

inline StochasticPolicy solve_phase(const PhaseProblem& problem, double temperature) {
  return temperature > 0.0 ? soft_value_iteration(problem.mdp, problem.reward, temperature, kSolveTol).second
                           : value_iteration(problem.mdp, problem.reward, kSolveTol).second;
}

inline PolicyCurve compute_policy_curve(const TabularMdp& mdp, const ContinuumSpec& spec,
                                        const StochasticPolicy& demo, const std::vector<double>& grid,
                                        double temperature) {
  spec.validate();
  require(temperature >= 0.0, ErrorCode::InvalidArgument, "temperature must be >= 0");
  require(grid.size() >= 2 && grid.front() == 0.0 && grid.back() == 1.0, ErrorCode::InvalidArgument,
          "grid must include both endpoints");
  for (std::size_t i = 1; i < grid.size(); ++i)
    require(grid[i] > grid[i - 1], ErrorCode::InvalidArgument, "grid must be strictly increasing");

  const RewardTable dense = spec.dense_reward();
  PolicyCurve curve;
  curve.mode = spec.mode;
  curve.temperature = temperature;
  for (double beta : grid) {
    const PhaseProblem problem = phase_problem(mdp, spec, demo, beta);
    StochasticPolicy policy = solve_phase(problem, temperature);
    if (is_reward_mode(spec.mode)) {
      curve.returns_f.push_back(evaluate_policy(mdp, spec.target_task.reward, policy));
      curve.returns_d.push_back(evaluate_policy(mdp, dense, policy));
    } else {
      curve.returns_f.push_back(evaluate_mixture(mdp, spec.target_task.reward, policy, demo, beta));
      curve.returns_d.push_back(evaluate_mixture(mdp, dense, policy, demo, beta));
    }
    curve.max_step_kl.push_back(
        curve.policies.empty() ? 0.0
                               : expected_kl(curve.policies.back(), policy, discounted_occupancy(problem.mdp, policy)));
    curve.betas.push_back(beta);
    curve.policies.push_back(std::move(policy));
  }
  return curve;
}

struct MonotonicityReport {
  bool holds = true;
  double worst_violation = 0.0;
  double beta_from = 0.0;
  double beta_to = 0.0;
};

/// Checks that the target-task return of pi*_beta never drops along the curve.
inline MonotonicityReport check_monotonicity(const PolicyCurve& curve, double tol) {
  require(is_reward_mode(curve.mode), ErrorCode::WrongCurveKind,
          "the monotonicity guarantee covers reward-phasing curves only");
  MonotonicityReport report;
  for (std::size_t i = 1; i < curve.returns_f.size(); ++i) {
    const double drop = curve.returns_f[i - 1] - curve.returns_f[i];
    if (drop > tol && drop > report.worst_violation) {
      report.holds = false;
      report.worst_violation = drop;
      report.beta_from = curve.betas[i - 1];
      report.beta_to = curve.betas[i];
    }
  }
  return report;
}

struct ConvergenceReport {
  bool reached_optimal = false;
  std::size_t iterations = 0;
  std::size_t iteration_bound = 0;
  double final_gap = 0.0;
  double final_return = 0.0;
  double optimal_return = 0.0;
  PhasingRun run;
};

/// Target-task objective: soft return when temperature > 0, plain return otherwise.
inline double target_objective(const TabularMdp& mdp, const RewardTable& target, const StochasticPolicy& policy,
                               double temperature) {
  return learner_objective(mdp, target, policy, temperature);
}

inline double optimal_target_objective(const TabularMdp& mdp, const RewardTable& target, double temperature) {
  if (temperature > 0.0) {
    const auto values = soft_value_iteration(mdp, target, temperature, kSolveTol).first;
    return detail::initial_value(mdp, values.state_values);
  }
  return detail::initial_value(mdp, value_iteration(mdp, target, kSolveTol).first.state_values);
}

inline std::size_t iteration_bound(double alpha) {
  return static_cast<std::size_t>(std::ceil(1.0 / alpha - 1e-9)) + 1;
}

/// Runs the curriculum with an RL_eps learner and a fixed-interval schedule and
/// compares the final policy with a direct solve of the target task.
inline ConvergenceReport check_convergence(const TabularMdp& mdp, const ContinuumSpec& spec,
                                           const StochasticPolicy& demo, double epsilon, double alpha,
                                           double temperature, double tolerance = 0.02,
                                           std::size_t max_inner_iters = 2000) {
  require(alpha > 0.0, ErrorCode::InvalidArgument, "alpha must be positive");
  AlphaScheduler scheduler;
  scheduler.alpha = alpha;
  scheduler.mode = ScheduleMode::FixedInterval;
  RlEpsConfig config;
  config.epsilon = epsilon;
  config.entropy_coef = temperature;
  config.max_inner_iters = max_inner_iters;

  ConvergenceReport report;
  report.run = run_task_phasing(mdp, spec, demo, StochasticPolicy::uniform(mdp.n_states(), mdp.n_actions()),
                                scheduler, config);
  report.iterations = report.run.iterations;
  report.iteration_bound = iteration_bound(alpha);
  report.optimal_return = optimal_target_objective(mdp, spec.target_task.reward, temperature);
  report.final_return = target_objective(mdp, spec.target_task.reward, report.run.final_policy(), temperature);
  report.final_gap = report.optimal_return - report.final_return;
  report.reached_optimal = report.run.complete && report.final_gap <= tolerance &&
                           report.iterations <= report.iteration_bound;
  return report;
}

/// Largest alpha on the ladder whose run converges; nullopt when none does.
inline std::optional<double> largest_converging_alpha(const TabularMdp& mdp, const ContinuumSpec& spec,
                                                      const StochasticPolicy& demo, double epsilon,
                                                      double temperature,
                                                      std::vector<double> ladder = {0.5, 0.2, 0.1, 0.05, 0.02},
                                                      double tolerance = 0.02) {
  std::sort(ladder.begin(), ladder.end(), std::greater<>());
  for (double alpha : ladder)
    if (check_convergence(mdp, spec, demo, epsilon, alpha, temperature, tolerance).reached_optimal) return alpha;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Checks on the two-step counterexample

inline ContinuumSpec counterexample_spec(const CounterexampleEnv& env, ContinuumMode mode) {
  ContinuumSpec spec;
  spec.mode = mode;
  spec.target_task = make_target_task(env.target_reward);
  spec.start_task = mode == ContinuumMode::Temporal ? make_initial_temporal_task(env.demo, env.target_reward)
                                                    : make_initial_reward_task(env.dense_reward, env.target_reward);
  return spec;
}

struct SwitchPoint {
  double beta = 0.0;
  ActionIndex action = 0;
  double margin = 0.0;  // Q(chosen) - Q(other) at s^0
};

struct CounterexampleReport {
  SwitchPoint reward_below, reward_above, temporal_below, temporal_above;
  bool holds = false;
};

inline CounterexampleReport verify_counterexample(double beta_below = 0.49, double beta_above = 0.51,
                                                  double min_margin = 1e-9) {
  using namespace counterexample;
  const auto env = build_counterexample();
  auto solve_at = [&](ContinuumMode mode, double beta) {
    const auto problem = phase_problem(env.mdp, counterexample_spec(env, mode), env.demo, beta);
    auto [values, policy] = value_iteration(problem.mdp, problem.reward, kSolveTol);
    const ActionIndex chosen = policy.argmax(kStart);
    const ActionIndex other = chosen == kRight ? kGoLeft : kRight;
    return SwitchPoint{beta, chosen, values.action_values(kStart, chosen) - values.action_values(kStart, other)};
  };
  CounterexampleReport r;
  r.reward_below = solve_at(ContinuumMode::RewardV1, beta_below);
  r.reward_above = solve_at(ContinuumMode::RewardV1, beta_above);
  r.temporal_below = solve_at(ContinuumMode::Temporal, beta_below);
  r.temporal_above = solve_at(ContinuumMode::Temporal, beta_above);
  auto ok = [&](const SwitchPoint& p, ActionIndex expected) { return p.action == expected && p.margin > min_margin; };
  r.holds = ok(r.reward_below, kRight) && ok(r.reward_above, kGoLeft) && ok(r.temporal_below, kRight) &&
            ok(r.temporal_above, kGoLeft);
  return r;
}

struct ContinuityReport {
  double temperature = 1.0;
  std::vector<double> steps;
  std::vector<double> max_kl;
  bool holds = false;
};

/// Max consecutive-policy KL along the soft curve for each grid step; holds when
/// every value is finite and the sequence strictly shrinks as the grid refines.
inline ContinuityReport check_continuity(const TabularMdp& mdp, const ContinuumSpec& spec,
                                         const StochasticPolicy& demo, double temperature,
                                         std::vector<double> steps = {0.04, 0.02, 0.01}) {
  ContinuityReport r;
  r.temperature = temperature;
  std::sort(steps.begin(), steps.end(), std::greater<>());
  r.steps = steps;
  r.holds = true;
  for (double h : steps) {
    const auto curve = compute_policy_curve(mdp, spec, demo, beta_grid(h), temperature);
    const double m = *std::max_element(curve.max_step_kl.begin(), curve.max_step_kl.end());
    if (!std::isfinite(m) || (!r.max_kl.empty() && !(m < r.max_kl.back()))) r.holds = false;
    r.max_kl.push_back(m);
  }
  return r;
}

struct V2EquivalenceReport {
  std::size_t draws = 0;
  std::size_t entries_checked = 0;
  std::size_t entries_outside = 0;
  double worst_z = 0.0;
  bool curves_agree = false;
  bool holds = false;
};

/// Monte-Carlo mean of the per-episode V2 reward against the V1 table (3 standard
/// errors per entry), plus pointwise agreement of the exact optimal-policy curves.
inline V2EquivalenceReport check_v2_equivalence(const TabularMdp& mdp, const RewardTable& dense,
                                                const RewardTable& target, const std::vector<double>& grid,
                                                std::size_t draws, std::uint64_t seed,
                                                std::vector<double> mc_betas = {0.25, 0.5, 0.75}) {
  ContinuumSpec v1;
  v1.mode = ContinuumMode::RewardV1;
  v1.start_task = make_initial_reward_task(dense, target);
  v1.target_task = make_target_task(target);
  ContinuumSpec v2 = v1;
  v2.mode = ContinuumMode::RewardV2;

  V2EquivalenceReport r;
  r.draws = draws;
  for (double beta : mc_betas) {
    const RewardTable expected = phased_reward(v1, beta, 0);
    const std::size_t n = expected.flat().size();
    std::vector<double> sum(n, 0.0), sum_sq(n, 0.0);
    for (std::size_t k = 0; k < draws; ++k) {
      const RewardTable draw = phased_reward(v2, beta, hash_key({seed, k}));
      for (std::size_t i = 0; i < n; ++i) {
        sum[i] += draw.flat()[i];
        sum_sq[i] += draw.flat()[i] * draw.flat()[i];
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double dn = static_cast<double>(draws);
      const double mean = sum[i] / dn;
      const double var = std::max(0.0, sum_sq[i] / dn - mean * mean);
      const double se = std::sqrt(var / dn);
      const double diff = std::abs(mean - expected.flat()[i]);
      ++r.entries_checked;
      if (se > 0.0) r.worst_z = std::max(r.worst_z, diff / se);
      if (diff > 3.0 * se + 1e-12) ++r.entries_outside;
    }
  }

  const StochasticPolicy dummy = StochasticPolicy::uniform(mdp.n_states(), mdp.n_actions());
  const auto c1 = compute_policy_curve(mdp, v1, dummy, grid, 0.0);
  const auto c2 = compute_policy_curve(mdp, v2, dummy, grid, 0.0);
  r.curves_agree = true;
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (StateIndex s = 0; s < mdp.n_states(); ++s)
      if (c1.policies[i].argmax(s) != c2.policies[i].argmax(s)) r.curves_agree = false;
  r.holds = r.entries_outside == 0 && r.curves_agree;
  return r;
}

// ---------------------------------------------------------------------------
// Randomised certificate for the monotonicity guarantee

struct MonotonicitySweepReport {
  std::size_t instances = 0;
  std::size_t violations = 0;
  double worst_violation = 0.0;
  bool holds = false;
};

inline MonotonicitySweepReport monotonicity_sweep(std::size_t instances, std::uint64_t seed, double grid_step = 0.02,
                                                  double tol = 1e-9, std::size_t max_states = 6,
                                                  std::size_t max_actions = 3, double gamma = 0.9) {
  MonotonicitySweepReport r;
  r.instances = instances;
  const auto grid = beta_grid(grid_step);
  for (std::size_t i = 0; i < instances; ++i) {
    KeyedRng rng(seed, i);
    const std::size_t n = 2 + rng.index(max_states - 1);
    const std::size_t na = 2 + rng.index(max_actions - 1);
    const auto mdp = random_mdp(rng, n, na, gamma);
    const auto dense = random_reward(rng, n, na, 0.0, 2.0);
    const auto target = random_reward(rng, n, na, -1.0, 1.0);
    ContinuumSpec spec;
    spec.mode = ContinuumMode::RewardV1;
    spec.start_task = make_initial_reward_task(dense, target);
    spec.target_task = make_target_task(target);
    const auto curve = compute_policy_curve(mdp, spec, StochasticPolicy::uniform(n, na), grid, 0.0);
    const auto rep = check_monotonicity(curve, tol);
    if (!rep.holds) ++r.violations;
    r.worst_violation = std::max(r.worst_violation, rep.worst_violation);
  }
  r.holds = r.violations == 0;
  return r;
}

}  // namespace taskphase
