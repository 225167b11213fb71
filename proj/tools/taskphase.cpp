// taskphase: command-line front end for phasing experiments and theory checks.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "taskphase/experiment.hpp"

namespace {

enum ExitCode { kOk = 0, kCheckFailed = 1, kConfigInvalid = 2, kRuntimeError = 3 };

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::size_t jobs = 1;
};

taskphase::ExperimentConfig load_config(const std::string& path, const Overrides& o) {
  std::ifstream in(path);
  taskphase::require(static_cast<bool>(in), taskphase::ErrorCode::ConfigInvalid, "cannot open config " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    taskphase::fail(taskphase::ErrorCode::ConfigInvalid, std::string("config is not valid JSON: ") + e.what());
  }
  auto cfg = taskphase::parse_experiment_config(doc);
  if (o.seed) cfg.seeds = {*o.seed};
  if (o.out) cfg.output_dir = *o.out;
  return cfg;
}

bool is_config_error(taskphase::ErrorCode c) {
  using taskphase::ErrorCode;
  return c == ErrorCode::ConfigInvalid || c == ErrorCode::UnknownParameter || c == ErrorCode::WrongCurveKind;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task-phasing curriculum experiments on tabular MDPs"};
  app.require_subcommand(1);
  Overrides overrides;
  std::string config_path, check, param, values;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "experiment config (JSON)")->required();
    sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { overrides.seed = s; },
                                            "run this seed only");
    sub->add_option_function<std::string>("--out", [&](const std::string& s) { overrides.out = s; },
                                          "output directory");
    sub->add_option("--jobs", overrides.jobs, "worker threads")->check(CLI::PositiveNumber);
  };
  auto* run = app.add_subcommand("run", "run the phasing curriculum for every seed");
  add_common(run);
  auto* verify = app.add_subcommand("verify", "run one theory check");
  add_common(verify);
  verify->add_option("--check", check, "monotonicity | continuity | convergence | counterexample | v2_equivalence")
      ->required()
      ->check(CLI::IsMember(taskphase::verify_check_names()));
  auto* sweep = app.add_subcommand("sweep", "run the curriculum over a list of values for one config field");
  add_common(sweep);
  sweep->add_option("--param", param, "dotted config field, e.g. learner.epsilon")->required();
  sweep->add_option("--values", values, "comma-separated values")->required();
  auto* demo = app.add_subcommand("demo-collect", "write scripted demonstrations as JSON lines");
  add_common(demo);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigInvalid;
  }

  try {
    const auto cfg = load_config(config_path, overrides);
    if (run->parsed()) {
      const auto outcome = taskphase::cmd_run(cfg, overrides.jobs);
      for (const auto& s : outcome.manifest["runs"])
        std::printf("seed %s: %zu phases, final beta %s, final return_f %s%s\n", s["seed"].dump().c_str(),
                    s["phases"].get<std::size_t>(), taskphase::format_double(s["final_beta"]).c_str(),
                    taskphase::format_double(s["final_return_f"]).c_str(),
                    s["complete"].get<bool>() ? "" : (" (incomplete: " + s["stall_reason"].get<std::string>() + ")").c_str());
      std::printf("wrote %s\n", (std::filesystem::path(cfg.output_dir) / "manifest.json").c_str());
      return kOk;
    }
    if (verify->parsed()) {
      const auto outcome = taskphase::cmd_verify(cfg, check);
      std::printf("%s: %s\n", check.c_str(), outcome.holds ? "holds" : "fails");
      std::printf("report: %s\n", (std::filesystem::path(cfg.output_dir) / ("verify_" + check + ".json")).c_str());
      return outcome.holds ? kOk : kCheckFailed;
    }
    if (sweep->parsed()) {
      taskphase::cmd_sweep(cfg, param, taskphase::split_csv(values), overrides.jobs);
      std::printf("wrote %s\n", (std::filesystem::path(cfg.output_dir) / "sweep_manifest.json").c_str());
      return kOk;
    }
    const auto m = taskphase::cmd_demo_collect(cfg);
    std::printf("wrote %zu demonstration file(s) to %s\n", m["datasets"].size(), cfg.output_dir.c_str());
    return kOk;
  } catch (const taskphase::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return is_config_error(e.code()) ? kConfigInvalid : kRuntimeError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeError;
  }
}
