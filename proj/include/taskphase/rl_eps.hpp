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
#include "taskphase/error.hpp"
#include "taskphase/mdp.hpp"
#include "taskphase/reward_phasing.hpp"
#include "taskphase/solvers.hpp"
#include "taskphase/temporal.hpp"

namespace taskphase {

/// KL-budgeted learner. entropy_coef = 0 gives the plain return objective.
struct RlEpsConfig {
  double epsilon = 0.05;       // nats
  double entropy_coef = 0.0;   // MaxEnt temperature
  double inner_tol = 1e-6;
  std::size_t max_inner_iters = 500;
  std::size_t bisection_steps = 60;

  void validate() const {
    require(epsilon >= 0.0 && std::isfinite(epsilon), ErrorCode::InvalidArgument, "epsilon must be finite and >= 0");
    require(entropy_coef >= 0.0, ErrorCode::InvalidArgument, "entropy_coef must be >= 0");
    require(inner_tol > 0.0, ErrorCode::InvalidArgument, "inner_tol must be positive");
    require(max_inner_iters >= 1, ErrorCode::InvalidArgument, "max_inner_iters must be >= 1");
  }
};

/// Objective the learner maximises: return, plus entropy when entropy_coef > 0.
inline double learner_objective(const TabularMdp& mdp, const RewardTable& reward, const StochasticPolicy& policy,
                                double entropy_coef) {
  return entropy_coef > 0.0 ? evaluate_soft(mdp, reward, policy, entropy_coef) : evaluate_policy(mdp, reward, policy);
}

namespace detail {

/// pi_next(a|s) proportional to pi(a|s) exp(step * (Q(s,a) - tau log pi(a|s))).
/// Zero-probability actions stay at zero; positive ones stay positive; terminal rows are untouched.
inline StochasticPolicy exponentiated_step(const TabularMdp& mdp, const StochasticPolicy& policy,
                                           const ActionTable& direction, double step) {
  ActionTable next = policy;
  std::vector<double> logits(mdp.n_actions());
  for (StateIndex s = 0; s < mdp.n_states(); ++s) {
    if (mdp.is_terminal(s)) continue;
    for (ActionIndex a = 0; a < mdp.n_actions(); ++a)
      logits[a] = policy(s, a) > 0.0 ? std::log(policy(s, a)) + step * direction(s, a)
                                     : -std::numeric_limits<double>::infinity();
    const double lse = log_sum_exp(logits);
    double sum = 0.0;
    // exp() can underflow to 0 for an action whose weight is mathematically positive;
    // keep such entries at the smallest normal double so KL to them stays finite.
    for (ActionIndex a = 0; a < mdp.n_actions(); ++a) {
      next(s, a) = std::exp(logits[a] - lse);
      if (policy(s, a) > 0.0 && next(s, a) < std::numeric_limits<double>::min())
        next(s, a) = std::numeric_limits<double>::min();
      sum += next(s, a);
    }
    for (ActionIndex a = 0; a < mdp.n_actions(); ++a) next(s, a) /= sum;
  }
  return StochasticPolicy(std::move(next));
}

/// Iterated exponentiated-advantage ascent inside the KL ball around `reference`.
/// Each step size is the largest one (found by bisection) whose result keeps
/// E_{s ~ d_new}[KL(reference(s) || new(s))] <= epsilon and does not lower the
/// objective. Stops at the unconstrained optimum, when the ball boundary blocks
/// every step, or at the iteration cap. `reference` may contain zeros.
inline StochasticPolicy improve_within_kl(const TabularMdp& mdp, const RewardTable& reward,
                                          const StochasticPolicy& reference, const RlEpsConfig& config) {
  config.validate();
  require_shape(mdp, reward, "reward");
  require_shape(mdp, reference, "start policy");
  if (config.epsilon == 0.0) return reference;

  const double tau = config.entropy_coef;
  const double max_step = tau > 0.0 ? 1.0 / tau : 1e8;

  StochasticPolicy current = reference;
  double objective = learner_objective(mdp, reward, current, tau);

  for (std::size_t it = 0; it < config.max_inner_iters; ++it) {
    const ValueTable values = tau > 0.0 ? soft_policy_values(mdp, reward, current, tau)
                                        : policy_values(mdp, reward, current);
    ActionTable direction = values.action_values;
    if (tau > 0.0)
      for (StateIndex s = 0; s < mdp.n_states(); ++s)
        for (ActionIndex a = 0; a < mdp.n_actions(); ++a)
          if (current(s, a) > 0.0) direction(s, a) -= tau * std::log(current(s, a));

    double candidate_objective = objective;
    auto feasible = [&](double step, StochasticPolicy& out) {
      out = exponentiated_step(mdp, current, direction, step);
      const double kl = expected_kl(reference, out, discounted_occupancy(mdp, out));
      if (!(kl <= config.epsilon)) return false;
      candidate_objective = learner_objective(mdp, reward, out, tau);
      return candidate_objective >= objective - 1e-12 * (1.0 + std::abs(objective));
    };

    StochasticPolicy next;
    double accepted_objective = objective;
    if (feasible(max_step, next)) {
      accepted_objective = candidate_objective;
    } else {
      double lo = 0.0;
      double hi = max_step;
      StochasticPolicy probe;
      next = current;
      for (std::size_t b = 0; b < config.bisection_steps; ++b) {
        const double mid = 0.5 * (lo + hi);
        if (feasible(mid, probe)) {
          lo = mid;
          next = probe;
          accepted_objective = candidate_objective;
        } else {
          hi = mid;
        }
      }
      if (lo == 0.0) break;
    }

    double change = 0.0;
    for (std::size_t i = 0; i < next.flat().size(); ++i)
      change = std::max(change, std::abs(next.flat()[i] - current.flat()[i]));
    const double gain = accepted_objective - objective;
    current = std::move(next);
    objective = accepted_objective;
    if (change <= 1e-13 || gain <= 1e-15 * (1.0 + std::abs(objective))) break;
  }
  return current;
}

}  // namespace detail

/// Best policy (approximately) within expected KL epsilon of `start_policy`, the
/// expectation taken under the returned policy's own state occupancy.
inline StochasticPolicy kl_constrained_improve(const TabularMdp& mdp, const RewardTable& reward,
                                               const StochasticPolicy& start_policy, const RlEpsConfig& config) {
  require(start_policy.strictly_positive(), ErrorCode::DegeneratePolicy,
          "start policy must give every action positive probability");
  return detail::improve_within_kl(mdp, reward, start_policy, config);
}

// ---------------------------------------------------------------------------
// Curriculum driver

struct PhasingRun {
  std::vector<double> betas;
  std::vector<StochasticPolicy> policies;
  std::vector<double> returns_f;       // learner alone on the target task
  std::vector<double> returns_phase;   // on the task of that phase
  std::vector<double> kl_steps;        // expected KL from the previous phase's policy
  std::vector<std::size_t> episodes_consumed;  // cumulative
  std::size_t iterations = 0;
  bool complete = false;
  std::string stall_reason;

  const StochasticPolicy& final_policy() const { return policies.back(); }
};

struct PhasingOptions {
  std::uint64_t seed = 0;
  std::size_t horizon = 100;        // rollouts for threshold scheduling
  std::size_t max_episodes = 100'000;  // threshold scheduling gives up after this many rollouts
};

/// Runs the task-phasing curriculum: train on the start task, then repeatedly
/// advance beta and re-train on the interpolated task until the target task
/// has been trained on. Temporal continua train the learner on the
/// mixture-induced environment; reward continua on the phased reward.
/// A threshold schedule that exhausts its episode budget returns the partial
/// run with complete = false.
inline PhasingRun run_task_phasing(const TabularMdp& mdp, const ContinuumSpec& spec,
                                   const StochasticPolicy& demo_policy, const StochasticPolicy& initial_policy,
                                   const AlphaScheduler& scheduler, const RlEpsConfig& config,
                                   const std::optional<AnnealSchedule>& anneal = std::nullopt,
                                   const PhasingOptions& options = {}) {
  spec.validate();
  scheduler.validate();
  config.validate();
  if (anneal) anneal->validate();
  require_shape(mdp, spec.target_task.reward, "target reward");
  require_shape(mdp, demo_policy, "demo policy");
  require(initial_policy.strictly_positive(), ErrorCode::DegeneratePolicy,
          "initial policy must give every action positive probability");
  if (scheduler.mode == ScheduleMode::Threshold)
    require(options.max_episodes >= 1, ErrorCode::InvalidArgument, "threshold scheduling needs an episode budget");

  const RewardTable& target_reward = spec.target_task.reward;
  const LearnerHyperparameters base{config.entropy_coef, config.epsilon, scheduler.alpha};
  auto hyper_at = [&](double beta) { return anneal ? apply_anneal(*anneal, beta, base) : base; };

  PhasingRun run;
  std::size_t episodes = 0;
  StochasticPolicy policy = initial_policy;

  auto train = [&](double beta) {
    const auto hyper = hyper_at(beta);
    RlEpsConfig cfg = config;
    cfg.entropy_coef = hyper.entropy_coef;
    cfg.epsilon = hyper.learning_rate;
    const std::uint64_t phase_seed = hash_key({options.seed, run.betas.size()});

    StochasticPolicy next;
    double phase_return = 0.0;
    std::vector<double> weights;
    if (spec.mode == ContinuumMode::Temporal) {
      const Task task = interpolate(spec, beta);
      auto [induced, induced_reward] = mixture_induced_mdp(mdp, task.reward, demo_policy, beta);
      next = detail::improve_within_kl(induced, induced_reward, policy, cfg);
      phase_return = evaluate_policy(induced, induced_reward, next);
      weights = discounted_occupancy(induced, next);
    } else {
      const RewardTable reward = phased_reward(spec, beta, phase_seed);
      next = detail::improve_within_kl(mdp, reward, policy, cfg);
      phase_return = evaluate_policy(mdp, expected_phased_reward(spec, beta), next);
      weights = discounted_occupancy(mdp, next);
    }
    if (scheduler.mode == ScheduleMode::FixedInterval) episodes += scheduler.episodes_per_phase;

    run.kl_steps.push_back(expected_kl(policy, next, weights));
    run.betas.push_back(beta);
    run.returns_f.push_back(evaluate_policy(mdp, target_reward, next));
    run.returns_phase.push_back(phase_return);
    run.episodes_consumed.push_back(episodes);
    run.policies.push_back(next);
    policy = std::move(next);
  };

  double beta = 0.0;
  train(beta);
  while (beta < 1.0) {
    AlphaScheduler step = scheduler;
    step.alpha = hyper_at(beta).alpha;
    if (scheduler.mode == ScheduleMode::FixedInterval) {
      beta = update_beta(step, beta);
    } else {
      if (episodes + scheduler.window > options.max_episodes) {
        run.stall_reason = "episode budget exhausted at beta=" + std::to_string(beta);
        break;
      }
      // score the current learner on the phase task, target reward only
      std::vector<double> scores;
      scores.reserve(scheduler.window);
      for (std::size_t e = 0; e < scheduler.window; ++e) {
        const auto traj = rollout_mixture(mdp, target_reward, policy, demo_policy, spec.start_task.protocol,
                                          spec.mode == ContinuumMode::Temporal ? beta : 1.0, options.horizon,
                                          options.seed, episodes + e);
        scores.push_back(traj.total_reward());
      }
      episodes += scheduler.window;
      beta = update_beta(step, beta, scores);
    }
    train(beta);
  }
  run.iterations = run.betas.size();
  run.complete = run.betas.back() == 1.0 && run.stall_reason.empty();
  return run;
}

}  // namespace taskphase
