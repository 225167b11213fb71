#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "taskphase/demonstrations.hpp"
#include "taskphase/experiment_config.hpp"
#include "taskphase/io.hpp"
#include "taskphase/plot.hpp"
#include "taskphase/theory.hpp"

namespace taskphase {

/// Everything a run needs, materialised from a config.
struct ExperimentSetup {
  TabularMdp mdp;
  RewardTable target_reward;
  StochasticPolicy scripted_demo;
  StochasticPolicy demo;  // scripted or cloned
  ContinuumSpec spec;
  std::optional<DemoDataset> demos;
  std::optional<IrlResult> irl;
};

struct BuiltEnvironment {
  TabularMdp mdp;
  RewardTable target_reward;
  StochasticPolicy demo;
  std::optional<RewardTable> builtin_dense;
};

inline BuiltEnvironment build_environment(const EnvironmentConfig& env) {
  if (env.name == "counterexample") {
    auto e = build_counterexample();
    return {e.mdp, e.target_reward, e.demo, e.dense_reward};
  }
  auto g = env.name == "flag_grid" ? build_flag_grid(env.grid) : build_cliff_slide(env.grid);
  return {g.mdp, g.reward, g.demo, std::nullopt};
}

/// Builds environment, demonstrator, dense reward and continuum. Demonstrations
/// and IRL use `data_seed` so every run of a config shares them.
inline ExperimentSetup build_setup(const ExperimentConfig& cfg, std::uint64_t data_seed) {
  auto env = build_environment(cfg.environment);
  ExperimentSetup s{env.mdp, env.target_reward, env.demo, env.demo, {}, std::nullopt, std::nullopt};

  const bool need_demos = cfg.demonstrations.source == "behavior_clone" ||
                          (is_reward_mode(cfg.mode) && cfg.dense_reward.source == "irl");
  if (need_demos)
    s.demos = collect_demos(s.mdp, s.target_reward, s.scripted_demo, cfg.demonstrations.episodes,
                            cfg.demonstrations.horizon, data_seed, cfg.environment.name + " scripted");
  if (cfg.demonstrations.source == "behavior_clone")
    s.demo = behavior_clone(*s.demos, s.mdp.n_states(), s.mdp.n_actions());

  s.spec.mode = cfg.mode;
  s.spec.target_task = make_target_task(s.target_reward);
  if (cfg.mode == ContinuumMode::Temporal) {
    s.spec.start_task = make_initial_temporal_task(s.demo, s.target_reward, cfg.protocol);
  } else {
    RewardTable dense;
    if (cfg.dense_reward.source == "builtin") {
      dense = *env.builtin_dense;
    } else {
      s.irl = maxent_irl(s.mdp, *s.demos, cfg.dense_reward.irl);
      dense = rescale_reward(s.irl->reward, cfg.dense_reward.scale);
    }
    s.spec.start_task = make_initial_reward_task(dense, s.target_reward);
  }
  s.spec.start_task.protocol = cfg.protocol;
  s.spec.target_task.protocol = cfg.protocol;
  return s;
}

inline PhasingRun run_single(const ExperimentConfig& cfg, const ExperimentSetup& setup, std::uint64_t seed) {
  PhasingOptions options;
  options.seed = seed;
  options.horizon = cfg.scheduler.horizon;
  options.max_episodes = cfg.scheduler.max_episodes;
  return run_task_phasing(setup.mdp, setup.spec, setup.demo,
                          StochasticPolicy::uniform(setup.mdp.n_states(), setup.mdp.n_actions()),
                          cfg.scheduler.scheduler, cfg.learner, cfg.anneal, options);
}

/// Runs f(i) for i in [0, n) on up to `jobs` threads. Results are placed by
/// index, so the outcome does not depend on scheduling. The first exception
/// (lowest index) is rethrown after all workers finish.
template <class T>
std::vector<T> parallel_map(std::size_t n, std::size_t jobs, const std::function<T(std::size_t)>& f) {
  std::vector<std::optional<T>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i] = f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t count = std::max<std::size_t>(1, std::min(jobs, n));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<T> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// ---------------------------------------------------------------------------
// Output helpers

/// Shortest decimal text that reads back to the same double; stable across runs.
inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  for (int precision = 6; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline constexpr const char* kCurveCsvHeader = "seed,phase_index,beta,return_f,return_phase,kl_step,episodes_consumed";

inline void write_curve_rows(std::ostream& out, std::uint64_t seed, const PhasingRun& run,
                             const std::string& prefix = "") {
  for (std::size_t i = 0; i < run.betas.size(); ++i)
    out << prefix << seed << ',' << i << ',' << format_double(run.betas[i]) << ',' << format_double(run.returns_f[i])
        << ',' << format_double(run.returns_phase[i]) << ',' << format_double(run.kl_steps[i]) << ','
        << run.episodes_consumed[i] << '\n';
}

/// JSON cannot hold infinities; they are written as the string "inf".
inline nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

inline nlohmann::json run_summary(std::uint64_t seed, const PhasingRun& run) {
  return {{"seed", seed},
          {"phases", run.iterations},
          {"final_beta", run.betas.back()},
          {"final_return_f", run.returns_f.back()},
          {"episodes_consumed", run.episodes_consumed.back()},
          {"complete", run.complete},
          {"stall_reason", run.stall_reason}};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::InvalidArgument, "cannot write " + path.string());
  out << text;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

/// Mean and population standard deviation of return_f per phase index, over
/// the runs that reached that phase.
inline CurveBand learning_curve_band(const std::vector<PhasingRun>& runs, std::string label) {
  CurveBand band;
  band.label = std::move(label);
  std::size_t longest = 0;
  for (const auto& r : runs) longest = std::max(longest, r.returns_f.size());
  for (std::size_t i = 0; i < longest; ++i) {
    double sum = 0.0, sum_sq = 0.0;
    std::size_t n = 0;
    for (const auto& r : runs)
      if (i < r.returns_f.size()) {
        sum += r.returns_f[i];
        sum_sq += r.returns_f[i] * r.returns_f[i];
        ++n;
      }
    const double mean = sum / static_cast<double>(n);
    band.x.push_back(static_cast<double>(i));
    band.mean.push_back(mean);
    band.sd.push_back(std::sqrt(std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean)));
  }
  return band;
}

// ---------------------------------------------------------------------------
// Commands

struct RunOutcome {
  nlohmann::json manifest;
  std::vector<PhasingRun> runs;
  bool all_complete = true;
};

inline RunOutcome cmd_run(const ExperimentConfig& cfg, std::size_t jobs = 1) {
  namespace fs = std::filesystem;
  const auto start = std::chrono::steady_clock::now();
  const fs::path out_dir(cfg.output_dir);
  fs::create_directories(out_dir);

  const ExperimentSetup setup = build_setup(cfg, cfg.seeds.front());
  RunOutcome outcome;
  outcome.runs = parallel_map<PhasingRun>(cfg.seeds.size(), jobs,
                                          [&](std::size_t i) { return run_single(cfg, setup, cfg.seeds[i]); });

  std::ostringstream csv;
  csv << kCurveCsvHeader << '\n';
  nlohmann::json summaries = nlohmann::json::array();
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    write_curve_rows(csv, cfg.seeds[i], outcome.runs[i]);
    summaries.push_back(run_summary(cfg.seeds[i], outcome.runs[i]));
    outcome.all_complete = outcome.all_complete && outcome.runs[i].complete;
  }
  write_text(out_dir / "learning_curve.csv", csv.str());
  write_text(out_dir / "learning_curve.svg",
             render_band_plot({learning_curve_band(outcome.runs, cfg.environment.name + " " +
                                                                     std::string(to_string(cfg.mode)))},
                              "Target-task return per phase (mean +- 1 sd over seeds)", "phase", "return_f"));

  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(out_dir / "timing.json", {{"wall_time_seconds", seconds}});

  auto& m = outcome.manifest;
  m["schema_version"] = kSchemaVersion;
  m["toolkit_version"] = kToolkitVersion;
  m["command"] = "run";
  m["config"] = experiment_config_to_json(cfg);
  m["csv_columns"] = kCurveCsvHeader;
  m["runs"] = summaries;
  m["all_complete"] = outcome.all_complete;
  if (setup.irl) m["irl"] = {{"residual", setup.irl->residual}, {"converged", setup.irl->converged}};
  m["files"] = {"learning_curve.csv", "learning_curve.svg", "timing.json", "manifest.json"};
  write_json(out_dir / "manifest.json", m);
  return outcome;
}

struct VerifyOutcome {
  bool holds = false;
  nlohmann::json report;
};

inline const std::vector<std::string>& verify_check_names() {
  static const std::vector<std::string> names{"monotonicity", "continuity", "convergence", "counterexample",
                                              "v2_equivalence"};
  return names;
}

inline std::vector<double> theory_grid(const ExperimentConfig& cfg) {
  return cfg.grid.empty() ? beta_grid(cfg.theory.sweep_grid_step) : cfg.grid;
}

inline nlohmann::json curve_json(const PolicyCurve& c) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < c.betas.size(); ++i)
    rows.push_back({{"beta", c.betas[i]},
                    {"return_f", c.returns_f[i]},
                    {"return_d", c.returns_d[i]},
                    {"max_step_kl", json_number(c.max_step_kl[i])}});
  return rows;
}

/// Beta values whose step KL is infinite: places where the optimal policy jumps.
inline std::vector<double> discontinuities(const PolicyCurve& c) {
  std::vector<double> out;
  for (std::size_t i = 0; i < c.betas.size(); ++i)
    if (is_infinite_kl(c.max_step_kl[i])) out.push_back(c.betas[i]);
  return out;
}

inline VerifyOutcome cmd_verify(const ExperimentConfig& cfg, const std::string& check) {
  namespace fs = std::filesystem;
  require(std::find(verify_check_names().begin(), verify_check_names().end(), check) != verify_check_names().end(),
          ErrorCode::ConfigInvalid, "unknown check '" + check + "'");
  VerifyOutcome out;
  auto& r = out.report;
  r["schema_version"] = kSchemaVersion;
  r["toolkit_version"] = kToolkitVersion;
  r["check"] = check;
  r["config"] = experiment_config_to_json(cfg);
  const std::uint64_t seed = cfg.seeds.front();

  if (check == "counterexample") {
    const auto c = verify_counterexample();
    auto point = [](const SwitchPoint& p) {
      return nlohmann::json{{"beta", p.beta}, {"action", p.action == counterexample::kRight ? "a_r" : "a_l"},
                            {"margin", p.margin}};
    };
    r["reward_v1"] = {point(c.reward_below), point(c.reward_above)};
    r["temporal"] = {point(c.temporal_below), point(c.temporal_above)};
    out.holds = c.holds;
  } else {
    const ExperimentSetup setup = build_setup(cfg, seed);
    if (check == "monotonicity") {
      require(is_reward_mode(cfg.mode), ErrorCode::WrongCurveKind,
              "monotonicity is only defined for reward-phasing continua");
      const auto curve = compute_policy_curve(setup.mdp, setup.spec, setup.demo, theory_grid(cfg), 0.0);
      const auto m = check_monotonicity(curve, cfg.theory.monotonicity_tol);
      r["environment_curve"] = {{"holds", m.holds}, {"worst_violation", m.worst_violation},
                                {"beta_from", m.beta_from}, {"beta_to", m.beta_to}, {"curve", curve_json(curve)}};
      bool holds = m.holds;
      if (cfg.theory.sweep_instances > 0) {
        const auto s = monotonicity_sweep(cfg.theory.sweep_instances, seed, cfg.theory.sweep_grid_step,
                                          cfg.theory.monotonicity_tol);
        r["random_sweep"] = {{"instances", s.instances}, {"violations", s.violations},
                             {"worst_violation", s.worst_violation}};
        holds = holds && s.holds;
      }
      out.holds = holds;
    } else if (check == "continuity") {
      const auto c = check_continuity(setup.mdp, setup.spec, setup.demo, cfg.theory.temperature,
                                      cfg.theory.continuity_steps);
      nlohmann::json kls = nlohmann::json::array();
      for (double v : c.max_kl) kls.push_back(json_number(v));
      r["temperature"] = c.temperature;
      r["steps"] = c.steps;
      r["max_step_kl"] = kls;
      out.holds = c.holds;
    } else if (check == "convergence") {
      const auto c = check_convergence(setup.mdp, setup.spec, setup.demo, cfg.learner.epsilon,
                                       cfg.scheduler.scheduler.alpha, cfg.theory.temperature, cfg.theory.tolerance,
                                       cfg.learner.max_inner_iters);
      const auto curve =
          compute_policy_curve(setup.mdp, setup.spec, setup.demo, theory_grid(cfg), cfg.theory.temperature);
      const auto jumps = discontinuities(curve);
      r["reached_optimal"] = c.reached_optimal;
      r["iterations"] = c.iterations;
      r["iteration_bound"] = c.iteration_bound;
      r["final_gap"] = c.final_gap;
      r["final_return"] = c.final_return;
      r["optimal_return"] = c.optimal_return;
      r["curve_discontinuities"] = jumps;
      r["explanation"] =
          jumps.empty() ? "the exact optimal-policy curve is continuous on the grid"
                        : "the exact optimal-policy curve jumps (infinite KL step) at the listed betas; a KL-bounded "
                          "learner cannot follow the curve across a jump in one phase";
      out.holds = c.reached_optimal;
    } else {
      require(is_reward_mode(cfg.mode), ErrorCode::WrongCurveKind,
              "v2_equivalence compares reward-phasing continua");
      const auto v = check_v2_equivalence(setup.mdp, setup.spec.dense_reward(), setup.target_reward,
                                          theory_grid(cfg), cfg.theory.v2_draws, seed);
      r["draws"] = v.draws;
      r["entries_checked"] = v.entries_checked;
      r["entries_outside_3se"] = v.entries_outside;
      r["worst_z"] = v.worst_z;
      r["curves_agree"] = v.curves_agree;
      out.holds = v.holds;
    }
  }
  r["holds"] = out.holds;
  fs::create_directories(cfg.output_dir);
  write_json(fs::path(cfg.output_dir) / ("verify_" + check + ".json"), r);
  return out;
}

/// Replaces the value at a dotted path ("learner.epsilon") of the canonical
/// config. Only existing leaves may be set.
inline nlohmann::json set_config_field(nlohmann::json doc, const std::string& dotted, const nlohmann::json& value) {
  nlohmann::json* node = &doc;
  std::string key;
  std::istringstream parts(dotted);
  std::vector<std::string> path;
  while (std::getline(parts, key, '.')) path.push_back(key);
  require(!path.empty(), ErrorCode::UnknownParameter, "empty parameter name");
  for (std::size_t i = 0; i < path.size(); ++i) {
    require(node->is_object() && node->contains(path[i]), ErrorCode::UnknownParameter,
            "'" + dotted + "' does not name a config field");
    node = &(*node)[path[i]];
  }
  require(!node->is_object() || node->empty(), ErrorCode::UnknownParameter,
          "'" + dotted + "' names a section, not a field");
  *node = value;
  return doc;
}

/// Sweep values arrive as text; numbers, booleans and JSON literals are parsed,
/// anything else is taken as a string.
inline nlohmann::json parse_sweep_value(const std::string& text) {
  const auto parsed = nlohmann::json::parse(text, nullptr, false);
  if (!parsed.is_discarded()) return parsed;
  return text;
}

inline std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(csv);
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

inline nlohmann::json cmd_sweep(const ExperimentConfig& cfg, const std::string& parameter,
                                const std::vector<std::string>& values, std::size_t jobs = 1) {
  namespace fs = std::filesystem;
  require(!values.empty(), ErrorCode::UnknownParameter, "sweep needs at least one value");
  const auto start = std::chrono::steady_clock::now();
  const auto base = experiment_config_to_json(cfg);

  std::vector<ExperimentConfig> cells;
  for (const auto& v : values) cells.push_back(parse_experiment_config(set_config_field(base, parameter, parse_sweep_value(v))));
  std::vector<ExperimentSetup> setups;
  for (const auto& c : cells) setups.push_back(build_setup(c, c.seeds.front()));

  const std::size_t n_seeds = cfg.seeds.size();
  auto runs = parallel_map<PhasingRun>(cells.size() * n_seeds, jobs, [&](std::size_t k) {
    const std::size_t v = k / n_seeds;
    return run_single(cells[v], setups[v], cells[v].seeds[k % n_seeds]);
  });

  const fs::path out_dir(cfg.output_dir);
  fs::create_directories(out_dir);
  std::ostringstream csv;
  csv << "param_value," << kCurveCsvHeader << '\n';
  nlohmann::json summaries = nlohmann::json::array();
  std::vector<CurveBand> bands;
  for (std::size_t v = 0; v < cells.size(); ++v) {
    std::vector<PhasingRun> group(runs.begin() + static_cast<std::ptrdiff_t>(v * n_seeds),
                                  runs.begin() + static_cast<std::ptrdiff_t>((v + 1) * n_seeds));
    nlohmann::json per_seed = nlohmann::json::array();
    for (std::size_t s = 0; s < n_seeds; ++s) {
      write_curve_rows(csv, cells[v].seeds[s], group[s], values[v] + ",");
      per_seed.push_back(run_summary(cells[v].seeds[s], group[s]));
    }
    summaries.push_back({{"value", values[v]}, {"runs", per_seed}});
    bands.push_back(learning_curve_band(group, parameter + "=" + values[v]));
  }
  write_text(out_dir / "sweep.csv", csv.str());
  write_text(out_dir / "sweep.svg",
             render_band_plot(bands, "Sweep over " + parameter + " (mean +- 1 sd over seeds)", "phase", "return_f"));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(out_dir / "sweep_timing.json", {{"wall_time_seconds", seconds}});

  nlohmann::json m;
  m["schema_version"] = kSchemaVersion;
  m["toolkit_version"] = kToolkitVersion;
  m["command"] = "sweep";
  m["parameter"] = parameter;
  m["values"] = values;
  m["config"] = base;
  m["csv_columns"] = std::string("param_value,") + kCurveCsvHeader;
  m["cells"] = summaries;
  m["files"] = {"sweep.csv", "sweep.svg", "sweep_timing.json", "sweep_manifest.json"};
  write_json(out_dir / "sweep_manifest.json", m);
  return m;
}

/// Writes scripted-demonstrator trajectories as JSON lines, one file per seed.
inline nlohmann::json cmd_demo_collect(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  const auto env = build_environment(cfg.environment);
  const fs::path out_dir(cfg.output_dir);
  fs::create_directories(out_dir);
  nlohmann::json files = nlohmann::json::array();
  nlohmann::json sets = nlohmann::json::array();
  for (std::uint64_t seed : cfg.seeds) {
    const auto data = collect_demos(env.mdp, env.target_reward, env.demo, cfg.demonstrations.episodes,
                                    cfg.demonstrations.horizon, seed, cfg.environment.name + " scripted");
    const std::string name = "demos_seed" + std::to_string(seed) + ".jsonl";
    std::ostringstream text;
    io::write_json_lines(text, data.trajectories);
    write_text(out_dir / name, text.str());
    double total = 0.0;
    for (const auto& t : data.trajectories) total += t.total_reward();
    sets.push_back({{"seed", seed},
                    {"file", name},
                    {"episodes", data.trajectories.size()},
                    {"steps", data.total_steps()},
                    {"mean_return", total / static_cast<double>(data.trajectories.size())}});
    files.push_back(name);
  }
  files.push_back("demos_manifest.json");
  nlohmann::json m;
  m["schema_version"] = kSchemaVersion;
  m["toolkit_version"] = kToolkitVersion;
  m["command"] = "demo-collect";
  m["config"] = experiment_config_to_json(cfg);
  m["source_label"] = cfg.environment.name + " scripted";
  m["datasets"] = sets;
  m["files"] = files;
  write_json(out_dir / "demos_manifest.json", m);
  return m;
}

}  // namespace taskphase
