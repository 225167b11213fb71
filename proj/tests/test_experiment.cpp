#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "taskphase/experiment.hpp"

using namespace taskphase;
namespace fs = std::filesystem;

namespace {

nlohmann::json config_doc(const std::string& out) {
  auto j = nlohmann::json::parse(R"({
    "environment": {"name": "counterexample"},
    "mode": "reward_v1",
    "scheduler": {"alpha": 0.25, "mode": "fixed_interval"},
    "learner": {"epsilon": 0.5, "entropy_coef": 1.0},
    "seeds": [1, 2]
  })");
  j["output_dir"] = out;
  return j;
}

std::string config_error(const nlohmann::json& doc) {
  try {
    parse_experiment_config(doc);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigInvalid);
    return e.what();
  }
  ADD_FAILURE() << "config accepted";
  return {};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("taskphase_test_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(ExperimentConfig, DefaultsAndCanonicalRoundTrip) {
  const auto cfg = parse_experiment_config(config_doc("x"));
  EXPECT_EQ(cfg.environment.name, "counterexample");
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{1, 2}));
  EXPECT_DOUBLE_EQ(cfg.learner.epsilon, 0.5);
  const auto canon = experiment_config_to_json(cfg);
  EXPECT_EQ(experiment_config_to_json(parse_experiment_config(canon)), canon);
}

TEST(ExperimentConfig, AlphaZeroNamesTheField) {
  auto doc = config_doc("x");
  doc["scheduler"]["alpha"] = 0.0;
  EXPECT_NE(config_error(doc).find("scheduler.alpha"), std::string::npos);
}

TEST(ExperimentConfig, AllErrorsAreReportedTogether) {
  auto doc = config_doc("x");
  doc["scheduler"]["alpha"] = 2.0;
  doc["learner"]["epsilon"] = -1.0;
  doc["mode"] = "sideways";
  doc["bogus"] = 1;
  const auto msg = config_error(doc);
  for (const char* field : {"scheduler.alpha", "learner.epsilon", "mode", "bogus"})
    EXPECT_NE(msg.find(field), std::string::npos) << field << " missing from: " << msg;
}

TEST(ExperimentConfig, UnknownKeysAndBadTypes) {
  auto doc = config_doc("x");
  doc["learner"]["epsilonn"] = 0.1;
  EXPECT_NE(config_error(doc).find("learner.epsilonn"), std::string::npos);
  doc = config_doc("x");
  doc["seeds"] = "one";
  EXPECT_NE(config_error(doc).find("seeds"), std::string::npos);
  doc = config_doc("x");
  doc["environment"]["name"] = "moon_lander";
  EXPECT_NE(config_error(doc).find("environment.name"), std::string::npos);
  doc = config_doc("x");
  doc["seeds"] = nlohmann::json::array();
  EXPECT_NE(config_error(doc).find("seeds"), std::string::npos);
}

TEST(SetConfigField, DottedPaths) {
  const auto base = experiment_config_to_json(parse_experiment_config(config_doc("x")));
  const auto changed = set_config_field(base, "learner.epsilon", 0.1);
  EXPECT_EQ(changed["learner"]["epsilon"], 0.1);
  auto code = [&](const std::string& path) {
    try {
      set_config_field(base, path, 1);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  EXPECT_EQ(code("learner.nope"), ErrorCode::UnknownParameter);
  EXPECT_EQ(code("learner"), ErrorCode::UnknownParameter);
  EXPECT_EQ(code(""), ErrorCode::UnknownParameter);
  EXPECT_EQ(parse_sweep_value("0.5"), 0.5);
  EXPECT_EQ(parse_sweep_value("V2"), "V2");
  EXPECT_EQ(split_csv("0.1,,0.2"), (std::vector<std::string>{"0.1", "0.2"}));
}

TEST(CmdRun, WritesManifestedFilesDeterministically) {
  const auto dir = scratch("run");
  const auto cfg = parse_experiment_config(config_doc(dir.string()));
  const auto first = cmd_run(cfg, 2);
  EXPECT_TRUE(first.all_complete);
  const auto csv = slurp(dir / "learning_curve.csv");
  const auto manifest = slurp(dir / "manifest.json");
  cmd_run(cfg, 1);
  EXPECT_EQ(slurp(dir / "learning_curve.csv"), csv);
  EXPECT_EQ(slurp(dir / "manifest.json"), manifest);

  std::set<std::string> listed, present;
  for (const auto& f : first.manifest["files"]) listed.insert(f.get<std::string>());
  for (const auto& e : fs::directory_iterator(dir)) present.insert(e.path().filename().string());
  EXPECT_EQ(listed, present);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kCurveCsvHeader);
  EXPECT_EQ(first.manifest["runs"].size(), 2u);
  fs::remove_all(dir);
}

TEST(CmdVerify, CounterexampleAndWrongCurveKind) {
  const auto dir = scratch("verify");
  auto cfg = parse_experiment_config(config_doc(dir.string()));
  const auto out = cmd_verify(cfg, "counterexample");
  EXPECT_TRUE(out.holds);
  EXPECT_TRUE(fs::exists(dir / "verify_counterexample.json"));
  auto doc = config_doc(dir.string());
  doc["mode"] = "temporal";
  cfg = parse_experiment_config(doc);
  try {
    cmd_verify(cfg, "monotonicity");
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::WrongCurveKind);
  }
  fs::remove_all(dir);
}

TEST(CmdSweep, ErrorsAndOutputs) {
  const auto dir = scratch("sweep");
  const auto cfg = parse_experiment_config(config_doc(dir.string()));
  auto code = [&](const std::string& param, const std::vector<std::string>& values) {
    try {
      cmd_sweep(cfg, param, values);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  EXPECT_EQ(code("learner.nope", {"1"}), ErrorCode::UnknownParameter);
  EXPECT_EQ(code("learner.epsilon", {}), ErrorCode::UnknownParameter);
  EXPECT_EQ(code("learner.epsilon", {"-1"}), ErrorCode::ConfigInvalid);

  const auto m = cmd_sweep(cfg, "scheduler.alpha", {"0.5", "0.25"});
  EXPECT_EQ(m["cells"].size(), 2u);
  std::set<std::string> listed, present;
  for (const auto& f : m["files"]) listed.insert(f.get<std::string>());
  for (const auto& e : fs::directory_iterator(dir)) present.insert(e.path().filename().string());
  EXPECT_EQ(listed, present);
  const auto csv = slurp(dir / "sweep.csv");
  EXPECT_EQ(csv.rfind("param_value,", 0), 0u);
  fs::remove_all(dir);
}

TEST(CmdDemoCollect, WritesOneFilePerSeed) {
  const auto dir = scratch("demos");
  auto doc = config_doc(dir.string());
  doc["environment"]["name"] = "cliff_slide";
  doc["mode"] = "temporal";
  doc["demonstrations"] = {{"episodes", 4}, {"horizon", 30}};
  const auto m = cmd_demo_collect(parse_experiment_config(doc));
  EXPECT_EQ(m["datasets"].size(), 2u);
  std::ifstream in(dir / "demos_seed1.jsonl");
  const auto back = io::read_json_lines(in, 30);
  EXPECT_EQ(back.size(), 4u);
  EXPECT_DOUBLE_EQ(m["datasets"][0]["mean_return"].get<double>(), 1.0);
  fs::remove_all(dir);
}
