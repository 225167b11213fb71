#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "taskphase/error.hpp"
#include "taskphase/mdp.hpp"
#include "taskphase/random.hpp"

namespace taskphase {

struct SolverOptions {
  std::size_t max_iterations = 1'000'000;
};

/// Distinguished value returned when a divergence is undefined (absolute continuity fails).
inline constexpr double kInfiniteKl = std::numeric_limits<double>::infinity();

inline bool is_infinite_kl(double v) { return std::isinf(v) && v > 0; }

// ---------------------------------------------------------------------------
// Termination checks for undiscounted problems

/// True iff every policy reaches a terminal state with probability one.
/// Computes the largest set of non-terminal states that some action can keep
/// the process inside forever; the MDP is episodic iff that set is empty.
inline bool all_policies_terminate(const TabularMdp& mdp) {
  const auto n = mdp.n_states();
  std::vector<std::uint8_t> trapped(n, 0);
  for (StateIndex s = 0; s < n; ++s) trapped[s] = mdp.is_terminal(s) ? 0 : 1;
  bool changed = true;
  while (changed) {
    changed = false;
    for (StateIndex s = 0; s < n; ++s) {
      if (!trapped[s]) continue;
      bool can_stay = false;
      for (ActionIndex a = 0; a < mdp.n_actions() && !can_stay; ++a) {
        bool inside = true;
        auto row = mdp.next_distribution(s, a);
        for (StateIndex t = 0; t < n; ++t)
          if (row[t] > 0.0 && !trapped[t]) { inside = false; break; }
        can_stay = inside;
      }
      if (!can_stay) { trapped[s] = 0; changed = true; }
    }
  }
  return std::none_of(trapped.begin(), trapped.end(), [](auto v) { return v != 0; });
}

/// True iff the given policy terminates almost surely from every state.
inline bool policy_terminates(const TabularMdp& mdp, const StochasticPolicy& policy) {
  const auto n = mdp.n_states();
  std::vector<std::uint8_t> reaches(n, 0);
  for (StateIndex s = 0; s < n; ++s) reaches[s] = mdp.is_terminal(s) ? 1 : 0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (StateIndex s = 0; s < n; ++s) {
      if (reaches[s]) continue;
      for (ActionIndex a = 0; a < mdp.n_actions() && !reaches[s]; ++a) {
        if (policy(s, a) <= 0.0) continue;
        auto row = mdp.next_distribution(s, a);
        for (StateIndex t = 0; t < n; ++t)
          if (row[t] > 0.0 && reaches[t]) { reaches[s] = 1; changed = true; break; }
      }
    }
  }
  return std::all_of(reaches.begin(), reaches.end(), [](auto v) { return v != 0; });
}

namespace detail {

inline void require_solvable(const TabularMdp& mdp) {
  if (mdp.gamma() < 1.0) return;
  require(all_policies_terminate(mdp), ErrorCode::NonConvergent,
          "gamma = 1 requires every policy to terminate almost surely");
}

inline void require_solvable(const TabularMdp& mdp, const StochasticPolicy& policy) {
  if (mdp.gamma() < 1.0) return;
  require(policy_terminates(mdp, policy), ErrorCode::NonConvergent,
          "gamma = 1 and the policy does not terminate almost surely");
}

inline double expected_next_value(const TabularMdp& mdp, StateIndex s, ActionIndex a,
                                  const std::vector<double>& values) {
  auto row = mdp.next_distribution(s, a);
  double acc = 0.0;
  for (StateIndex t = 0; t < row.size(); ++t)
    if (row[t] != 0.0) acc += row[t] * values[t];
  return acc;
}

inline ActionTable q_from_values(const TabularMdp& mdp, const RewardTable& reward,
                                 const std::vector<double>& values) {
  ActionTable q(mdp.n_states(), mdp.n_actions(), 0.0);
  for (StateIndex s = 0; s < mdp.n_states(); ++s) {
    if (mdp.is_terminal(s)) continue;
    for (ActionIndex a = 0; a < mdp.n_actions(); ++a)
      q(s, a) = reward(s, a) + mdp.gamma() * expected_next_value(mdp, s, a, values);
  }
  return q;
}

/// Solves v = r_pi + gamma P_pi v over the non-terminal states; terminal values are zero.
/// `state_reward` already holds the policy-averaged reward per state.
inline std::vector<double> solve_policy_values(const TabularMdp& mdp, const StochasticPolicy& policy,
                                               const std::vector<double>& state_reward) {
  const auto n = mdp.n_states();
  std::vector<long> index(n, -1);
  std::vector<StateIndex> live;
  for (StateIndex s = 0; s < n; ++s)
    if (!mdp.is_terminal(s)) { index[s] = static_cast<long>(live.size()); live.push_back(s); }

  std::vector<double> values(n, 0.0);
  if (live.empty()) return values;

  const auto m = static_cast<Eigen::Index>(live.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(m, m);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const StateIndex s = live[static_cast<std::size_t>(i)];
    b(i) = state_reward[s];
    for (ActionIndex act = 0; act < mdp.n_actions(); ++act) {
      const double pa = policy(s, act);
      if (pa == 0.0) continue;
      auto row = mdp.next_distribution(s, act);
      for (StateIndex t = 0; t < n; ++t)
        if (row[t] != 0.0 && index[t] >= 0) a(i, index[t]) -= mdp.gamma() * pa * row[t];
    }
  }
  Eigen::VectorXd x = a.partialPivLu().solve(b);
  for (Eigen::Index i = 0; i < m; ++i) values[live[static_cast<std::size_t>(i)]] = x(i);
  return values;
}

inline double initial_value(const TabularMdp& mdp, const std::vector<double>& values) {
  double j = 0.0;
  for (StateIndex s = 0; s < mdp.n_states(); ++s) j += mdp.initial_distribution()[s] * values[s];
  return j;
}

inline double log_sum_exp(std::span<const double> x) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : x) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - m);
  return m + std::log(acc);
}

inline bool close_to_max(double q, double best) {
  return q >= best - 1e-12 * (1.0 + std::abs(best));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Policy evaluation

/// Exact state and action values of a policy (linear solve).
inline ValueTable policy_values(const TabularMdp& mdp, const RewardTable& reward, const StochasticPolicy& policy) {
  require_shape(mdp, reward, "reward");
  require_shape(mdp, policy, "policy");
  detail::require_solvable(mdp, policy);
  std::vector<double> r(mdp.n_states(), 0.0);
  for (StateIndex s = 0; s < mdp.n_states(); ++s) {
    if (mdp.is_terminal(s)) continue;
    for (ActionIndex a = 0; a < mdp.n_actions(); ++a)
      if (policy(s, a) != 0.0) r[s] += policy(s, a) * reward(s, a);
  }
  ValueTable out;
  out.state_values = detail::solve_policy_values(mdp, policy, r);
  out.action_values = detail::q_from_values(mdp, reward, out.state_values);
  return out;
}

/// J = E[sum_t gamma^t R(s_t, a_t)] from the initial distribution.
inline double evaluate_policy(const TabularMdp& mdp, const RewardTable& reward, const StochasticPolicy& policy) {
  return detail::initial_value(mdp, policy_values(mdp, reward, policy).state_values);
}

/// Values of the entropy-augmented objective sum_t gamma^t (R + temperature * H(pi(.|s_t))).
/// Action values exclude the entropy of the current step.
inline ValueTable soft_policy_values(const TabularMdp& mdp, const RewardTable& reward,
                                     const StochasticPolicy& policy, double temperature) {
  require_shape(mdp, reward, "reward");
  require_shape(mdp, policy, "policy");
  require(temperature >= 0.0, ErrorCode::InvalidArgument, "temperature must be >= 0");
  detail::require_solvable(mdp, policy);
  std::vector<double> r(mdp.n_states(), 0.0);
  for (StateIndex s = 0; s < mdp.n_states(); ++s) {
    if (mdp.is_terminal(s)) continue;
    for (ActionIndex a = 0; a < mdp.n_actions(); ++a) {
      const double p = policy(s, a);
      if (p == 0.0) continue;
      r[s] += p * (reward(s, a) - temperature * std::log(p));
    }
  }
  ValueTable out;
  out.state_values = detail::solve_policy_values(mdp, policy, r);
  out.action_values = detail::q_from_values(mdp, reward, out.state_values);
  return out;
}

inline double evaluate_soft(const TabularMdp& mdp, const RewardTable& reward, const StochasticPolicy& policy,
                            double temperature) {
  return detail::initial_value(mdp, soft_policy_values(mdp, reward, policy, temperature).state_values);
}

/// Per-step mixture beta * rl + (1 - beta) * demo.
inline StochasticPolicy mixture_policy(const StochasticPolicy& rl_policy, const StochasticPolicy& demo_policy,
                                       double beta) {
  require(beta >= 0.0 && beta <= 1.0, ErrorCode::BetaOutOfRange, "beta must lie in [0,1]");
  require(rl_policy.same_shape(demo_policy), ErrorCode::ShapeMismatch, "policies differ in shape");
  ActionTable mix(rl_policy.n_states(), rl_policy.n_actions());
  for (StateIndex s = 0; s < mix.n_states(); ++s) {
    double sum = 0.0;
    for (ActionIndex a = 0; a < mix.n_actions(); ++a) {
      mix(s, a) = beta * rl_policy(s, a) + (1.0 - beta) * demo_policy(s, a);
      sum += mix(s, a);
    }
    for (ActionIndex a = 0; a < mix.n_actions(); ++a) mix(s, a) /= sum;
  }
  return StochasticPolicy(std::move(mix));
}

/// Expected return when each step is controlled by the learner with probability beta.
inline double evaluate_mixture(const TabularMdp& mdp, const RewardTable& reward, const StochasticPolicy& rl_policy,
                               const StochasticPolicy& demo_policy, double beta) {
  return evaluate_policy(mdp, reward, mixture_policy(rl_policy, demo_policy, beta));
}

// ---------------------------------------------------------------------------
// Optimal control

/// Hard-optimal values and a deterministic greedy policy (lowest action index wins ties).
/// Value iteration runs to `tol`, then policy iteration with exact evaluation
/// removes the remaining error so the returned values are those of the returned policy.
inline std::pair<ValueTable, StochasticPolicy> value_iteration(const TabularMdp& mdp, const RewardTable& reward,
                                                               double tol, const SolverOptions& options = {}) {
  require(tol > 0.0, ErrorCode::InvalidArgument, "tol must be positive");
  require_shape(mdp, reward, "reward");
  detail::require_solvable(mdp);

  const auto n = mdp.n_states();
  const auto na = mdp.n_actions();
  std::vector<double> v(n, 0.0);
  bool converged = false;
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    double residual = 0.0;
    std::vector<double> next(n, 0.0);
    for (StateIndex s = 0; s < n; ++s) {
      if (mdp.is_terminal(s)) continue;
      double best = -std::numeric_limits<double>::infinity();
      for (ActionIndex a = 0; a < na; ++a)
        best = std::max(best, reward(s, a) + mdp.gamma() * detail::expected_next_value(mdp, s, a, v));
      next[s] = best;
      residual = std::max(residual, std::abs(best - v[s]));
    }
    v = std::move(next);
    if (residual <= tol) { converged = true; break; }
  }
  require(converged, ErrorCode::NonConvergent, "value iteration hit its iteration cap");

  auto greedy = [&](const ActionTable& q, const std::vector<ActionIndex>* current) {
    std::vector<ActionIndex> choice(n, 0);
    for (StateIndex s = 0; s < n; ++s) {
      if (mdp.is_terminal(s)) continue;
      double best = q(s, 0);
      for (ActionIndex a = 1; a < na; ++a) best = std::max(best, q(s, a));
      if (current) {
        // keep the incumbent unless something is strictly better
        const ActionIndex inc = (*current)[s];
        if (detail::close_to_max(q(s, inc), best)) { choice[s] = inc; continue; }
      }
      for (ActionIndex a = 0; a < na; ++a)
        if (detail::close_to_max(q(s, a), best)) { choice[s] = a; break; }
    }
    return choice;
  };

  auto actions = greedy(detail::q_from_values(mdp, reward, v), nullptr);
  ValueTable table;
  for (int round = 0; round < 10'000; ++round) {
    table = policy_values(mdp, reward, StochasticPolicy::deterministic(actions, na));
    auto next = greedy(table.action_values, &actions);
    if (next == actions) break;
    actions = std::move(next);
  }
  auto final_actions = greedy(table.action_values, nullptr);
  if (final_actions != actions) {
    actions = std::move(final_actions);
    table = policy_values(mdp, reward, StochasticPolicy::deterministic(actions, na));
  }
  return {std::move(table), StochasticPolicy::deterministic(actions, na)};
}

/// Soft-optimal (maximum-entropy) values and the Boltzmann policy
/// probs(s, a) proportional to exp(Q(s, a) / temperature).
inline std::pair<ValueTable, StochasticPolicy> soft_value_iteration(const TabularMdp& mdp, const RewardTable& reward,
                                                                    double temperature, double tol,
                                                                    const SolverOptions& options = {},
                                                                    const std::vector<double>* warm_start = nullptr) {
  require(temperature > 0.0, ErrorCode::InvalidArgument, "temperature must be positive");
  require(tol > 0.0, ErrorCode::InvalidArgument, "tol must be positive");
  require_shape(mdp, reward, "reward");
  detail::require_solvable(mdp);

  const auto n = mdp.n_states();
  const auto na = mdp.n_actions();
  std::vector<double> v = warm_start && warm_start->size() == n ? *warm_start : std::vector<double>(n, 0.0);
  for (StateIndex s = 0; s < n; ++s)
    if (mdp.is_terminal(s)) v[s] = 0.0;
  std::vector<double> scaled(na);
  bool converged = false;
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    double residual = 0.0;
    std::vector<double> next(n, 0.0);
    for (StateIndex s = 0; s < n; ++s) {
      if (mdp.is_terminal(s)) continue;
      for (ActionIndex a = 0; a < na; ++a)
        scaled[a] = (reward(s, a) + mdp.gamma() * detail::expected_next_value(mdp, s, a, v)) / temperature;
      next[s] = temperature * detail::log_sum_exp(scaled);
      residual = std::max(residual, std::abs(next[s] - v[s]));
    }
    v = std::move(next);
    if (residual <= tol) { converged = true; break; }
  }
  require(converged, ErrorCode::NonConvergent, "soft value iteration hit its iteration cap");

  ValueTable table;
  table.action_values = detail::q_from_values(mdp, reward, v);
  ActionTable probs(n, na);
  for (StateIndex s = 0; s < n; ++s) {
    auto q = table.action_values.row(s);
    for (ActionIndex a = 0; a < na; ++a) scaled[a] = q[a] / temperature;
    const double lse = detail::log_sum_exp(scaled);
    double sum = 0.0;
    for (ActionIndex a = 0; a < na; ++a) sum += probs(s, a) = std::exp(scaled[a] - lse);
    for (ActionIndex a = 0; a < na; ++a) probs(s, a) /= sum;
  }
  table.state_values = std::move(v);
  return {std::move(table), StochasticPolicy(std::move(probs))};
}

// ---------------------------------------------------------------------------
// Occupancy and divergences

namespace detail {

/// Unnormalised sum_t gamma^t Pr(s_t = s), terminal states counted on arrival only.
inline std::vector<double> discounted_visits(const TabularMdp& mdp, const StochasticPolicy& policy) {
  require_shape(mdp, policy, "policy");
  detail::require_solvable(mdp, policy);
  const auto n = static_cast<Eigen::Index>(mdp.n_states());
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd b(n);
  for (StateIndex s = 0; s < mdp.n_states(); ++s) {
    b(static_cast<Eigen::Index>(s)) = mdp.initial_distribution()[s];
    if (mdp.is_terminal(s)) continue;
    for (ActionIndex act = 0; act < mdp.n_actions(); ++act) {
      const double pa = policy(s, act);
      if (pa == 0.0) continue;
      auto row = mdp.next_distribution(s, act);
      for (StateIndex t = 0; t < mdp.n_states(); ++t)
        if (row[t] != 0.0)
          a(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s)) -= mdp.gamma() * pa * row[t];
    }
  }
  Eigen::VectorXd u = a.partialPivLu().solve(b);
  std::vector<double> out(mdp.n_states());
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = std::max(0.0, u(i));
  return out;
}

}  // namespace detail

/// Normalised discounted state-visitation distribution. A visit to a terminal
/// state counts once, on arrival; the self-loop afterwards is not counted.
inline std::vector<double> discounted_occupancy(const TabularMdp& mdp, const StochasticPolicy& policy) {
  auto out = detail::discounted_visits(mdp, policy);
  double total = 0.0;
  for (double x : out) total += x;
  for (double& x : out) x /= total;
  return out;
}

/// KL(p || q) in nats for one state; kInfiniteKl when q misses mass of p.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return kInfiniteKl;
    acc += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(acc, 0.0);
}

/// sum_s weights[s] * KL(reference(s) || other(s)).
inline double expected_kl(const StochasticPolicy& reference, const StochasticPolicy& other,
                          std::span<const double> weights) {
  require(reference.same_shape(other), ErrorCode::ShapeMismatch, "policies differ in shape");
  require(weights.size() == reference.n_states(), ErrorCode::ShapeMismatch, "weights have wrong length");
  double acc = 0.0;
  for (StateIndex s = 0; s < reference.n_states(); ++s) {
    if (weights[s] == 0.0) continue;
    const double kl = kl_divergence(reference.row(s), other.row(s));
    if (is_infinite_kl(kl)) return kInfiniteKl;
    acc += weights[s] * kl;
  }
  return acc;
}

/// Total-variation distance between two action distributions.
inline double total_variation(std::span<const double> p, std::span<const double> q) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
  return 0.5 * acc;
}

// ---------------------------------------------------------------------------
// Sampling

/// Generic rollout. `choose(state, t)` returns the action distribution and the
/// controller for step t. Draws are keyed by (seed, episode, stream, t).
template <typename Chooser>
Trajectory rollout(const TabularMdp& mdp, const RewardTable& reward, std::size_t horizon, std::uint64_t seed,
                   std::uint64_t episode, Chooser&& choose) {
  require(horizon >= 1, ErrorCode::InvalidArgument, "horizon must be >= 1");
  Trajectory traj;
  traj.horizon = horizon;
  traj.steps.reserve(horizon);
  StateIndex s = sample_categorical(mdp.initial_distribution(),
                                    uniform01({seed, episode, static_cast<std::uint64_t>(Stream::Initial)}));
  for (std::size_t t = 0; t < horizon && !mdp.is_terminal(s); ++t) {
    const auto [probs, controller] = choose(s, t);
    const ActionIndex a =
        sample_categorical(probs, uniform01({seed, episode, static_cast<std::uint64_t>(Stream::Action), t}));
    traj.steps.push_back(Step{s, a, reward(s, a), controller});
    s = sample_categorical(mdp.next_distribution(s, a),
                           uniform01({seed, episode, static_cast<std::uint64_t>(Stream::Transition), t}));
  }
  traj.final_state = s;
  return traj;
}

inline Trajectory sample_trajectory(const TabularMdp& mdp, const RewardTable& reward, const StochasticPolicy& policy,
                                    std::size_t horizon, std::uint64_t rng_seed, std::uint64_t episode = 0) {
  require_shape(mdp, reward, "reward");
  require_shape(mdp, policy, "policy");
  return rollout(mdp, reward, horizon, rng_seed, episode, [&](StateIndex s, std::size_t) {
    return std::pair{policy.row(s), Controller::Learner};
  });
}

}  // namespace taskphase
