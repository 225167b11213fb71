#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "taskphase/error.hpp"
#include "taskphase/mdp.hpp"
#include "taskphase/random.hpp"

namespace taskphase {

enum class ProtocolVariant {
  RandomStep,   // V1: independent Bernoulli(beta) per step
  RandomBlock,  // V2: one Bernoulli(beta) per aligned block of m steps
  FixedSteps,   // V3: deterministic, evenly spaced demonstrator steps
};

inline std::string_view to_string(ProtocolVariant v) {
  switch (v) {
    case ProtocolVariant::RandomStep: return "V1";
    case ProtocolVariant::RandomBlock: return "V2";
    case ProtocolVariant::FixedSteps: return "V3";
  }
  return "?";
}

inline ProtocolVariant protocol_variant_from_string(std::string_view name) {
  if (name == "V1") return ProtocolVariant::RandomStep;
  if (name == "V2") return ProtocolVariant::RandomBlock;
  if (name == "V3") return ProtocolVariant::FixedSteps;
  fail(ErrorCode::InvalidArgument, "unknown protocol variant " + std::string(name));
}

/// Decides, step by step, whether the learner or the demonstrator acts.
struct ControlProtocol {
  ProtocolVariant variant = ProtocolVariant::RandomStep;
  std::size_t block_length = 1;    // m, RandomBlock only
  std::size_t episode_length = 1;  // T, FixedSteps only
  std::uint64_t rng_seed = 0;
  /// FixedSteps: use the printed "(t mod beta*T) = 0" rule instead of the
  /// even-spacing rule. Kept for comparison; its learner share does not track beta.
  bool literal_fixed_steps = false;

  void validate() const {
    require(block_length >= 1, ErrorCode::InvalidArgument, "block length m must be >= 1");
    require(episode_length >= 1, ErrorCode::InvalidArgument, "episode length T must be >= 1");
  }

  friend bool operator==(const ControlProtocol&, const ControlProtocol&) = default;
};

inline void require_beta(double beta) {
  require(beta >= 0.0 && beta <= 1.0, ErrorCode::BetaOutOfRange, "beta must lie in [0,1], got " + std::to_string(beta));
}

/// Demonstrator period for the even-spacing FixedSteps rule.
inline std::size_t fixed_steps_period(double beta) {
  const double p = std::round(1.0 / (1.0 - beta));
  return p < 1.0 ? 1 : static_cast<std::size_t>(p);
}

/// Who controls step t of `episode`. Deterministic in (rng_seed, episode, t).
inline Controller assign_controller(const ControlProtocol& protocol, double beta, std::size_t t,
                                    std::uint64_t episode = 0) {
  require_beta(beta);
  protocol.validate();
  const auto coin = [&](std::size_t step) {
    return uniform01({protocol.rng_seed, episode, static_cast<std::uint64_t>(Stream::Controller), step}) < beta
               ? Controller::Learner
               : Controller::Demonstrator;
  };
  switch (protocol.variant) {
    case ProtocolVariant::RandomStep:
      return coin(t);
    case ProtocolVariant::RandomBlock:
      return coin(t - t % protocol.block_length);
    case ProtocolVariant::FixedSteps: {
      if (protocol.literal_fixed_steps) {
        const auto k = static_cast<std::size_t>(std::round(beta * static_cast<double>(protocol.episode_length)));
        if (k == 0) return Controller::Demonstrator;
        return t % k == 0 ? Controller::Demonstrator : Controller::Learner;
      }
      if (beta >= 1.0) return Controller::Learner;
      return t % fixed_steps_period(beta) == 0 ? Controller::Demonstrator : Controller::Learner;
    }
  }
  return Controller::Demonstrator;
}

}  // namespace taskphase
