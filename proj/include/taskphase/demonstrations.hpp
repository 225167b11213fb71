#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "taskphase/error.hpp"
#include "taskphase/mdp.hpp"
#include "taskphase/solvers.hpp"

namespace taskphase {

struct DemoDataset {
  std::vector<Trajectory> trajectories;
  std::string source_label;

  std::size_t total_steps() const {
    std::size_t n = 0;
    for (const auto& t : trajectories) n += t.steps.size();
    return n;
  }

  void validate(std::size_t n_states, std::size_t n_actions) const {
    require(!trajectories.empty() && total_steps() > 0, ErrorCode::EmptyDataset, "demonstration set is empty");
    for (const auto& t : trajectories)
      for (const auto& st : t.steps)
        require(st.state < n_states && st.action < n_actions, ErrorCode::InvalidArgument,
                "demonstration step outside the environment");
  }
};

/// Samples `n_episodes` demonstrator trajectories; episode i is keyed by (rng_seed, i).
inline DemoDataset collect_demos(const TabularMdp& mdp, const RewardTable& reward, const StochasticPolicy& demo_policy,
                                 std::size_t n_episodes, std::size_t horizon, std::uint64_t rng_seed,
                                 std::string label = "demonstrator") {
  require(n_episodes >= 1, ErrorCode::InvalidArgument, "n_episodes must be >= 1");
  DemoDataset data;
  data.source_label = std::move(label);
  data.trajectories.reserve(n_episodes);
  for (std::size_t i = 0; i < n_episodes; ++i) {
    auto traj = sample_trajectory(mdp, reward, demo_policy, horizon, rng_seed, i);
    for (auto& st : traj.steps) st.controller = Controller::Demonstrator;
    data.trajectories.push_back(std::move(traj));
  }
  return data;
}

/// Laplace-smoothed counting estimate of the demonstrator policy.
inline StochasticPolicy behavior_clone(const DemoDataset& data, std::size_t n_states, std::size_t n_actions,
                                       double smoothing = 1e-3) {
  require(smoothing > 0.0, ErrorCode::InvalidArgument, "smoothing must be positive");
  data.validate(n_states, n_actions);
  ActionTable counts(n_states, n_actions, 0.0);
  for (const auto& t : data.trajectories)
    for (const auto& st : t.steps) counts(st.state, st.action) += 1.0;
  ActionTable probs(n_states, n_actions);
  for (StateIndex s = 0; s < n_states; ++s) {
    double total = 0.0;
    for (double c : counts.row(s)) total += c;
    const double denom = total + smoothing * static_cast<double>(n_actions);
    for (ActionIndex a = 0; a < n_actions; ++a) probs(s, a) = (counts(s, a) + smoothing) / denom;
  }
  return StochasticPolicy(std::move(probs));
}

/// Average discounted state-action visit counts of the dataset.
inline ActionTable empirical_visitation(const DemoDataset& data, std::size_t n_states, std::size_t n_actions,
                                        double gamma) {
  data.validate(n_states, n_actions);
  ActionTable visits(n_states, n_actions, 0.0);
  for (const auto& t : data.trajectories) {
    double discount = 1.0;
    for (const auto& st : t.steps) {
      visits(st.state, st.action) += discount;
      discount *= gamma;
    }
  }
  for (double& v : visits.flat()) v /= static_cast<double>(data.trajectories.size());
  return visits;
}

/// Expected discounted state-action visit counts of `policy` from the initial distribution.
inline ActionTable model_visitation(const TabularMdp& mdp, const StochasticPolicy& policy) {
  const auto u = detail::discounted_visits(mdp, policy);
  ActionTable visits(mdp.n_states(), mdp.n_actions(), 0.0);
  for (StateIndex s = 0; s < mdp.n_states(); ++s) {
    if (mdp.is_terminal(s)) continue;
    for (ActionIndex a = 0; a < mdp.n_actions(); ++a) visits(s, a) = u[s] * policy(s, a);
  }
  return visits;
}

struct IrlResult {
  RewardTable reward;
  /// Max-norm of (empirical - model) visitation at `reward`.
  double residual = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  bool converged = false;
};

struct IrlOptions {
  double temperature = 1.0;
  double learning_rate = 0.5;
  std::size_t max_iters = 5000;
  double tol = 1e-4;
  double inner_tol = 1e-10;
};

/// Tabular maximum-entropy IRL: one reward parameter per (state, action), plain
/// gradient ascent on the discounted causal-entropy likelihood. The gradient is
/// the gap between empirical and soft-optimal visitation. When the cap is hit,
/// the best iterate is returned with converged = false.
inline IrlResult maxent_irl(const TabularMdp& mdp, const DemoDataset& data, const IrlOptions& options = {}) {
  require(options.temperature > 0.0, ErrorCode::InvalidArgument, "temperature must be positive");
  require(options.learning_rate > 0.0, ErrorCode::InvalidArgument, "learning_rate must be positive");
  require(options.tol > 0.0, ErrorCode::InvalidArgument, "tol must be positive");
  const auto n = mdp.n_states();
  const auto na = mdp.n_actions();
  const ActionTable target = empirical_visitation(data, n, na, mdp.gamma());

  RewardTable theta(n, na, 0.0);
  IrlResult best;
  best.reward = theta;
  std::vector<double> warm;
  for (std::size_t it = 0; it < options.max_iters; ++it) {
    auto [values, policy] = soft_value_iteration(mdp, theta, options.temperature, options.inner_tol, {}, &warm);
    warm = values.state_values;
    const ActionTable model = model_visitation(mdp, policy);
    double residual = 0.0;
    for (std::size_t i = 0; i < target.flat().size(); ++i)
      residual = std::max(residual, std::abs(target.flat()[i] - model.flat()[i]));
    if (residual < best.residual) {
      best.reward = theta;
      best.residual = residual;
      best.iterations = it;
    }
    if (residual <= options.tol) {
      best.converged = true;
      return best;
    }
    for (std::size_t i = 0; i < theta.flat().size(); ++i)
      theta.flat()[i] += options.learning_rate * (target.flat()[i] - model.flat()[i]);
  }
  best.iterations = options.max_iters;
  return best;
}

/// Scales a reward so its largest absolute entry equals `target_scale`.
inline RewardTable rescale_reward(const RewardTable& reward, double target_scale) {
  require(target_scale > 0.0, ErrorCode::InvalidArgument, "target_scale must be positive");
  const double m = reward.max_abs();
  require(m > 0.0, ErrorCode::ZeroReward, "cannot rescale an all-zero reward");
  if (m == target_scale) return reward;
  RewardTable out = reward;
  for (double& v : out.flat()) v = v / m * target_scale;
  return out;
}

}  // namespace taskphase
