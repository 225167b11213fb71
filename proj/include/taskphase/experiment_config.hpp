#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "taskphase/continuum.hpp"
#include "taskphase/environments.hpp"
#include "taskphase/error.hpp"
#include "taskphase/protocol.hpp"
#include "taskphase/reward_phasing.hpp"
#include "taskphase/rl_eps.hpp"
#include "taskphase/temporal.hpp"

namespace taskphase {

inline constexpr const char* kToolkitVersion = "0.3.0";
inline constexpr int kSchemaVersion = 1;

struct EnvironmentConfig {
  std::string name = "counterexample";  // counterexample | flag_grid | cliff_slide
  GridWorldSpec grid;                     // ignored for the counterexample
};

struct DemoConfig {
  std::string source = "scripted";  // scripted | behavior_clone
  std::size_t episodes = 100;
  std::size_t horizon = 100;
};

struct DenseRewardConfig {
  std::string source = "builtin";  // builtin (counterexample only) | irl
  double scale = 1.0;              // irl: rescale max |R^d| to this
  IrlOptions irl;
};

struct SchedulerConfig {
  AlphaScheduler scheduler;
  std::size_t max_episodes = 100'000;
  std::size_t horizon = 100;
};

struct TheoryConfig {
  double temperature = 1.0;
  double tolerance = 0.02;
  std::size_t sweep_instances = 50;
  double sweep_grid_step = 0.02;
  double monotonicity_tol = 1e-9;
  std::size_t v2_draws = 100'000;
  std::vector<double> continuity_steps{0.04, 0.02, 0.01};
};

struct ExperimentConfig {
  EnvironmentConfig environment;
  ContinuumMode mode = ContinuumMode::RewardV1;
  ControlProtocol protocol;
  SchedulerConfig scheduler;
  RlEpsConfig learner;
  std::optional<AnnealSchedule> anneal;
  DemoConfig demonstrations;
  DenseRewardConfig dense_reward;
  TheoryConfig theory;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "results";
  std::vector<double> grid;  // empty: evenly spaced with theory.sweep_grid_step
};

namespace detail {

using nlohmann::json;

/// Reads fields out of a JSON object, remembering which keys were consumed so
/// that leftovers can be reported as unknown. Errors accumulate instead of throwing.
class FieldReader {
 public:
  FieldReader(const json& object, std::string path, std::vector<std::string>& errors)
      : obj_(object), path_(std::move(path)), errors_(errors) {
    if (!obj_.is_object()) error(path_, "must be an object");
  }

  ~FieldReader() {
    if (!obj_.is_object()) return;
    for (const auto& [key, value] : obj_.items())
      if (!seen_.count(key)) errors_.push_back(join(key) + ": unknown key");
  }

  FieldReader(const FieldReader&) = delete;
  FieldReader& operator=(const FieldReader&) = delete;

  const json* find(const std::string& key) {
    seen_.insert(key);
    if (!obj_.is_object()) return nullptr;
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void error(const std::string& field, const std::string& message) { errors_.push_back(field + ": " + message); }

  template <class T>
  void read(const std::string& key, T& out) {
    const json* v = find(key);
    if (!v) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw std::invalid_argument("expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_integer() || (std::is_unsigned_v<T> && v->get<long long>() < 0))
          throw std::invalid_argument("expected a non-negative integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v->is_number()) throw std::invalid_argument("expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) throw std::invalid_argument("expected a string");
      }
      out = v->get<T>();
    } catch (const std::exception& e) {
      error(join(key), e.what());
    }
  }

  void check(bool ok, const std::string& key, const std::string& message) {
    if (!ok) error(join(key), message);
  }

  std::vector<std::string>& errors() { return errors_; }

 private:
  const json& obj_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

inline std::optional<Cell> read_cell(const json& v, const std::string& field, std::vector<std::string>& errors) {
  if (v.is_null()) return std::nullopt;
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
    errors.push_back(field + ": expected [row, col]");
    return std::nullopt;
  }
  return Cell{v[0].get<int>(), v[1].get<int>()};
}

inline void read_cell_field(FieldReader& r, const std::string& key, std::optional<Cell>& out) {
  if (const json* v = r.find(key)) out = read_cell(*v, r.join(key), r.errors());
}

inline void read_cell_set(FieldReader& r, const std::string& key, std::set<Cell>& out) {
  const json* v = r.find(key);
  if (!v) return;
  if (!v->is_array()) {
    r.error(r.join(key), "expected a list of [row, col]");
    return;
  }
  out.clear();
  for (const auto& c : *v)
    if (auto cell = read_cell(c, r.join(key), r.errors())) out.insert(*cell);
}

inline json cell_json(const std::optional<Cell>& c) { return c ? json::array({c->row, c->col}) : json(nullptr); }

inline json cell_set_json(const std::set<Cell>& cells) {
  json out = json::array();
  for (const auto& c : cells) out.push_back({c.row, c.col});
  return out;
}

inline void parse_environment(const json& j, EnvironmentConfig& env, std::vector<std::string>& errors) {
  FieldReader r(j, "environment", errors);
  r.read("name", env.name);
  if (env.name == "flag_grid") {
    env.grid = default_flag_grid_spec();
  } else if (env.name == "cliff_slide") {
    env.grid = default_cliff_slide_spec();
  } else if (env.name != "counterexample") {
    r.error("environment.name", "unknown environment '" + env.name + "'");
  }
  const json* params = r.find("params");
  if (!params) return;
  FieldReader p(*params, "environment.params", errors);
  GridWorldSpec& g = env.grid;
  p.read("width", g.width);
  p.read("height", g.height);
  read_cell_set(p, "walls", g.walls);
  read_cell_set(p, "hazards", g.hazards);
  read_cell_field(p, "flag_cell", g.flag_cell);
  read_cell_field(p, "base_cell", g.base_cell);
  read_cell_field(p, "goal_cell", g.goal_cell);
  read_cell_field(p, "start_cell", g.start_cell);
  p.read("slip_probability", g.slip_probability);
  p.read("goal_reward", g.goal_reward);
  p.read("step_reward", g.step_reward);
  p.read("gamma", g.gamma);
  p.read("demo_noise", g.demo_noise);
  read_cell_set(p, "demo_avoid", g.demo_avoid);
  if (env.name == "counterexample" && !params->empty())
    p.error("environment.params", "the counterexample takes no parameters");
  p.check(g.width > 0 && g.height > 0, "width", "width and height must be positive");
  p.check(g.slip_probability >= 0.0 && g.slip_probability < 1.0, "slip_probability", "must lie in [0,1)");
  p.check(g.gamma > 0.0 && g.gamma <= 1.0, "gamma", "must lie in (0,1]");
  p.check(g.demo_noise >= 0.0 && g.demo_noise <= 1.0, "demo_noise", "must lie in [0,1]");
}

inline json environment_json(const EnvironmentConfig& env) {
  json j{{"name", env.name}};
  if (env.name == "counterexample") {
    j["params"] = json::object();
    return j;
  }
  const GridWorldSpec& g = env.grid;
  j["params"] = {{"width", g.width},
                 {"height", g.height},
                 {"walls", cell_set_json(g.walls)},
                 {"hazards", cell_set_json(g.hazards)},
                 {"flag_cell", cell_json(g.flag_cell)},
                 {"base_cell", cell_json(g.base_cell)},
                 {"goal_cell", cell_json(g.goal_cell)},
                 {"start_cell", cell_json(g.start_cell)},
                 {"slip_probability", g.slip_probability},
                 {"goal_reward", g.goal_reward},
                 {"step_reward", g.step_reward},
                 {"gamma", g.gamma},
                 {"demo_noise", g.demo_noise},
                 {"demo_avoid", cell_set_json(g.demo_avoid)}};
  return j;
}

inline std::string schedule_mode_name(ScheduleMode m) {
  return m == ScheduleMode::FixedInterval ? "fixed_interval" : "threshold";
}

}  // namespace detail

/// Parses and validates a config document. Every problem found is collected
/// and reported together in one ConfigInvalid error.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& doc) {
  using detail::FieldReader;
  using nlohmann::json;
  std::vector<std::string> errors;
  ExperimentConfig cfg;
  {
    FieldReader root(doc, "", errors);
    if (const json* env = root.find("environment")) detail::parse_environment(*env, cfg.environment, errors);

    std::string mode = std::string(to_string(cfg.mode));
    root.read("mode", mode);
    try {
      cfg.mode = continuum_mode_from_string(mode);
    } catch (const Error&) {
      root.error("mode", "expected temporal, reward_v1 or reward_v2");
    }

    if (const json* p = root.find("protocol")) {
      FieldReader r(*p, "protocol", errors);
      std::string variant = std::string(to_string(cfg.protocol.variant));
      r.read("variant", variant);
      try {
        cfg.protocol.variant = protocol_variant_from_string(variant);
      } catch (const Error&) {
        r.error("protocol.variant", "expected V1, V2 or V3");
      }
      r.read("block_length", cfg.protocol.block_length);
      r.read("episode_length", cfg.protocol.episode_length);
      r.read("rng_seed", cfg.protocol.rng_seed);
      r.read("literal_fixed_steps", cfg.protocol.literal_fixed_steps);
      r.check(cfg.protocol.block_length >= 1, "block_length", "must be >= 1");
      r.check(cfg.protocol.episode_length >= 1, "episode_length", "must be >= 1");
    }

    if (const json* s = root.find("scheduler")) {
      FieldReader r(*s, "scheduler", errors);
      AlphaScheduler& a = cfg.scheduler.scheduler;
      r.read("alpha", a.alpha);
      std::string m = detail::schedule_mode_name(a.mode);
      r.read("mode", m);
      if (m == "fixed_interval") a.mode = ScheduleMode::FixedInterval;
      else if (m == "threshold") a.mode = ScheduleMode::Threshold;
      else r.error("scheduler.mode", "expected fixed_interval or threshold");
      r.read("episodes_per_phase", a.episodes_per_phase);
      r.read("window", a.window);
      r.read("threshold", a.threshold_value);
      r.read("beta_cap", a.beta_cap);
      r.read("max_episodes", cfg.scheduler.max_episodes);
      r.read("horizon", cfg.scheduler.horizon);
      r.check(a.alpha > 0.0 && a.alpha <= 1.0, "alpha", "must lie in (0,1]");
      r.check(a.window >= 1, "window", "must be >= 1");
      r.check(a.beta_cap > 0.0 && a.beta_cap <= 1.0, "beta_cap", "must lie in (0,1]");
      r.check(cfg.scheduler.max_episodes >= 1, "max_episodes", "must be >= 1");
      r.check(cfg.scheduler.horizon >= 1, "horizon", "must be >= 1");
    }

    if (const json* l = root.find("learner")) {
      FieldReader r(*l, "learner", errors);
      r.read("epsilon", cfg.learner.epsilon);
      r.read("entropy_coef", cfg.learner.entropy_coef);
      r.read("inner_tol", cfg.learner.inner_tol);
      r.read("max_inner_iters", cfg.learner.max_inner_iters);
      r.read("bisection_steps", cfg.learner.bisection_steps);
      r.check(cfg.learner.epsilon >= 0.0, "epsilon", "must be >= 0");
      r.check(cfg.learner.entropy_coef >= 0.0, "entropy_coef", "must be >= 0");
      r.check(cfg.learner.inner_tol > 0.0, "inner_tol", "must be > 0");
      r.check(cfg.learner.max_inner_iters >= 1, "max_inner_iters", "must be >= 1");
    }

    if (const json* a = root.find("anneal"); a && !a->is_null()) {
      FieldReader r(*a, "anneal", errors);
      AnnealSchedule s;
      r.read("breakpoint_fraction", s.breakpoint_fraction);
      r.read("late_entropy_coef", s.late_entropy_coef);
      r.read("late_learning_rate", s.late_learning_rate);
      r.read("late_alpha", s.late_alpha);
      r.check(s.breakpoint_fraction > 0.0 && s.breakpoint_fraction <= 1.0, "breakpoint_fraction",
              "must lie in (0,1]");
      r.check(s.late_entropy_coef > 0.0, "late_entropy_coef", "must be > 0");
      r.check(s.late_learning_rate > 0.0, "late_learning_rate", "must be > 0");
      r.check(s.late_alpha > 0.0 && s.late_alpha <= 1.0, "late_alpha", "must lie in (0,1]");
      cfg.anneal = s;
    }

    if (const json* d = root.find("demonstrations")) {
      FieldReader r(*d, "demonstrations", errors);
      r.read("source", cfg.demonstrations.source);
      r.read("episodes", cfg.demonstrations.episodes);
      r.read("horizon", cfg.demonstrations.horizon);
      r.check(cfg.demonstrations.source == "scripted" || cfg.demonstrations.source == "behavior_clone", "source",
              "expected scripted or behavior_clone");
      r.check(cfg.demonstrations.episodes >= 1, "episodes", "must be >= 1");
      r.check(cfg.demonstrations.horizon >= 1, "horizon", "must be >= 1");
    }

    if (cfg.environment.name != "counterexample") cfg.dense_reward.source = "irl";
    if (const json* d = root.find("dense_reward")) {
      FieldReader r(*d, "dense_reward", errors);
      r.read("source", cfg.dense_reward.source);
      r.read("scale", cfg.dense_reward.scale);
      r.read("temperature", cfg.dense_reward.irl.temperature);
      r.read("learning_rate", cfg.dense_reward.irl.learning_rate);
      r.read("max_iters", cfg.dense_reward.irl.max_iters);
      r.read("tol", cfg.dense_reward.irl.tol);
      r.check(cfg.dense_reward.source == "builtin" || cfg.dense_reward.source == "irl", "source",
              "expected builtin or irl");
      r.check(cfg.dense_reward.scale > 0.0, "scale", "must be > 0");
      r.check(cfg.dense_reward.irl.temperature > 0.0, "temperature", "must be > 0");
      r.check(cfg.dense_reward.irl.learning_rate > 0.0, "learning_rate", "must be > 0");
      r.check(cfg.dense_reward.irl.tol > 0.0, "tol", "must be > 0");
    }
    if (cfg.dense_reward.source == "builtin" && cfg.environment.name != "counterexample")
      errors.push_back("dense_reward.source: only the counterexample has a built-in dense reward");

    if (const json* t = root.find("theory")) {
      FieldReader r(*t, "theory", errors);
      TheoryConfig& th = cfg.theory;
      r.read("temperature", th.temperature);
      r.read("tolerance", th.tolerance);
      r.read("sweep_instances", th.sweep_instances);
      r.read("sweep_grid_step", th.sweep_grid_step);
      r.read("monotonicity_tol", th.monotonicity_tol);
      r.read("v2_draws", th.v2_draws);
      r.read("continuity_steps", th.continuity_steps);
      r.check(th.temperature >= 0.0, "temperature", "must be >= 0");
      r.check(th.tolerance > 0.0, "tolerance", "must be > 0");
      r.check(th.sweep_grid_step > 0.0 && th.sweep_grid_step <= 1.0, "sweep_grid_step", "must lie in (0,1]");
      r.check(th.monotonicity_tol >= 0.0, "monotonicity_tol", "must be >= 0");
      r.check(th.v2_draws >= 2, "v2_draws", "must be >= 2");
      bool steps_ok = !th.continuity_steps.empty();
      for (double h : th.continuity_steps) steps_ok = steps_ok && h > 0.0 && h <= 1.0;
      r.check(steps_ok, "continuity_steps", "must be a non-empty list of steps in (0,1]");
    }

    root.read("seeds", cfg.seeds);
    root.check(!cfg.seeds.empty(), "seeds", "must be a non-empty list of integers");
    root.read("output_dir", cfg.output_dir);
    root.check(!cfg.output_dir.empty(), "output_dir", "must not be empty");
    root.read("grid", cfg.grid);
    if (!cfg.grid.empty()) {
      bool ok = cfg.grid.size() >= 2 && cfg.grid.front() == 0.0 && cfg.grid.back() == 1.0;
      for (std::size_t i = 1; ok && i < cfg.grid.size(); ++i) ok = cfg.grid[i] > cfg.grid[i - 1];
      root.check(ok, "grid", "must be strictly increasing from 0 to 1");
    }
  }
  if (!errors.empty()) {
    std::string message = "invalid config:";
    for (const auto& e : errors) message += "\n  " + e;
    fail(ErrorCode::ConfigInvalid, message);
  }
  return cfg;
}

/// Canonical form with every default filled in; parse(to_json(c)) == c.
inline nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg) {
  using nlohmann::json;
  const auto& a = cfg.scheduler.scheduler;
  json j;
  j["environment"] = detail::environment_json(cfg.environment);
  j["mode"] = std::string(to_string(cfg.mode));
  j["protocol"] = {{"variant", std::string(to_string(cfg.protocol.variant))},
                   {"block_length", cfg.protocol.block_length},
                   {"episode_length", cfg.protocol.episode_length},
                   {"rng_seed", cfg.protocol.rng_seed},
                   {"literal_fixed_steps", cfg.protocol.literal_fixed_steps}};
  j["scheduler"] = {{"alpha", a.alpha},
                    {"mode", detail::schedule_mode_name(a.mode)},
                    {"episodes_per_phase", a.episodes_per_phase},
                    {"window", a.window},
                    {"threshold", a.threshold_value},
                    {"beta_cap", a.beta_cap},
                    {"max_episodes", cfg.scheduler.max_episodes},
                    {"horizon", cfg.scheduler.horizon}};
  j["learner"] = {{"epsilon", cfg.learner.epsilon},
                  {"entropy_coef", cfg.learner.entropy_coef},
                  {"inner_tol", cfg.learner.inner_tol},
                  {"max_inner_iters", cfg.learner.max_inner_iters},
                  {"bisection_steps", cfg.learner.bisection_steps}};
  if (cfg.anneal)
    j["anneal"] = {{"breakpoint_fraction", cfg.anneal->breakpoint_fraction},
                   {"late_entropy_coef", cfg.anneal->late_entropy_coef},
                   {"late_learning_rate", cfg.anneal->late_learning_rate},
                   {"late_alpha", cfg.anneal->late_alpha}};
  else
    j["anneal"] = nullptr;
  j["demonstrations"] = {{"source", cfg.demonstrations.source},
                         {"episodes", cfg.demonstrations.episodes},
                         {"horizon", cfg.demonstrations.horizon}};
  j["dense_reward"] = {{"source", cfg.dense_reward.source},
                       {"scale", cfg.dense_reward.scale},
                       {"temperature", cfg.dense_reward.irl.temperature},
                       {"learning_rate", cfg.dense_reward.irl.learning_rate},
                       {"max_iters", cfg.dense_reward.irl.max_iters},
                       {"tol", cfg.dense_reward.irl.tol}};
  j["theory"] = {{"temperature", cfg.theory.temperature},
                 {"tolerance", cfg.theory.tolerance},
                 {"sweep_instances", cfg.theory.sweep_instances},
                 {"sweep_grid_step", cfg.theory.sweep_grid_step},
                 {"monotonicity_tol", cfg.theory.monotonicity_tol},
                 {"v2_draws", cfg.theory.v2_draws},
                 {"continuity_steps", cfg.theory.continuity_steps}};
  j["seeds"] = cfg.seeds;
  j["output_dir"] = cfg.output_dir;
  j["grid"] = cfg.grid;
  return j;
}

}  // namespace taskphase
