#pragma once

#include <cstdint>
#include <vector>

#include "taskphase/mdp.hpp"
#include "taskphase/random.hpp"

namespace taskphase {

/// Random dense MDP: each transition row is a normalised vector of uniforms,
/// with roughly a third of the entries zeroed. Starts uniformly at random.
inline TabularMdp random_mdp(KeyedRng& rng, std::size_t n_states, std::size_t n_actions, double gamma) {
  std::vector<double> p(n_states * n_actions * n_states, 0.0);
  for (std::size_t row = 0; row < n_states * n_actions; ++row) {
    double* out = p.data() + row * n_states;
    double sum = 0.0;
    for (std::size_t t = 0; t < n_states; ++t) {
      const double u = rng.uniform();
      out[t] = rng.uniform() < 0.33 ? 0.0 : u;
      sum += out[t];
    }
    if (sum == 0.0) {
      out[rng.index(n_states)] = 1.0;
      sum = 1.0;
    }
    for (std::size_t t = 0; t < n_states; ++t) out[t] /= sum;
  }
  std::vector<double> init(n_states);
  double total = 0.0;
  for (auto& v : init) total += v = 0.1 + rng.uniform();
  for (auto& v : init) v /= total;
  return TabularMdp(n_states, n_actions, std::move(p), gamma, {}, std::move(init));
}

inline RewardTable random_reward(KeyedRng& rng, std::size_t n_states, std::size_t n_actions, double lo = -1.0,
                                 double hi = 1.0) {
  RewardTable r(n_states, n_actions);
  for (double& v : r.flat()) v = rng.uniform(lo, hi);
  return r;
}

/// Strictly positive random policy with entries bounded away from zero.
inline StochasticPolicy random_positive_policy(KeyedRng& rng, std::size_t n_states, std::size_t n_actions) {
  ActionTable t(n_states, n_actions);
  for (StateIndex s = 0; s < n_states; ++s) {
    double sum = 0.0;
    for (ActionIndex a = 0; a < n_actions; ++a) sum += t(s, a) = 0.05 + rng.uniform();
    for (ActionIndex a = 0; a < n_actions; ++a) t(s, a) /= sum;
  }
  return StochasticPolicy(std::move(t));
}

}  // namespace taskphase
