#pragma once

#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "taskphase/error.hpp"
#include "taskphase/mdp.hpp"

namespace taskphase::io {

using nlohmann::json;

// nlohmann/json prints doubles with the shortest representation that reads
// back to the same bits, so every round trip below is lossless.

inline json table_to_json(const ActionTable& t) {
  json rows = json::array();
  for (StateIndex s = 0; s < t.n_states(); ++s) rows.push_back(std::vector<double>(t.row(s).begin(), t.row(s).end()));
  return rows;
}

inline ActionTable table_from_json(const json& rows, const char* what) {
  require(rows.is_array() && !rows.empty(), ErrorCode::InvalidArgument, std::string(what) + " must be a non-empty array");
  const auto n_actions = rows.at(0).size();
  ActionTable t(rows.size(), n_actions);
  for (std::size_t s = 0; s < rows.size(); ++s) {
    require(rows[s].is_array() && rows[s].size() == n_actions, ErrorCode::ShapeMismatch,
            std::string(what) + " rows must share one length");
    for (std::size_t a = 0; a < n_actions; ++a) t(s, a) = rows[s][a].get<double>();
  }
  return t;
}

inline json mdp_to_json(const TabularMdp& mdp) {
  json transition = json::array();
  for (StateIndex s = 0; s < mdp.n_states(); ++s) {
    json per_action = json::array();
    for (ActionIndex a = 0; a < mdp.n_actions(); ++a) {
      auto row = mdp.next_distribution(s, a);
      per_action.push_back(std::vector<double>(row.begin(), row.end()));
    }
    transition.push_back(std::move(per_action));
  }
  return json{{"n_states", mdp.n_states()},
              {"n_actions", mdp.n_actions()},
              {"gamma", mdp.gamma()},
              {"transition", std::move(transition)},
              {"terminal", mdp.terminal_states()},
              {"initial", mdp.initial_distribution()}};
}

inline TabularMdp mdp_from_json(const json& j) {
  const auto n = j.at("n_states").get<std::size_t>();
  const auto na = j.at("n_actions").get<std::size_t>();
  const auto& tr = j.at("transition");
  require(tr.size() == n, ErrorCode::ShapeMismatch, "transition must have n_states entries");
  std::vector<double> flat;
  flat.reserve(n * na * n);
  for (const auto& per_action : tr) {
    require(per_action.size() == na, ErrorCode::ShapeMismatch, "transition must have n_actions rows per state");
    for (const auto& row : per_action) {
      require(row.size() == n, ErrorCode::ShapeMismatch, "transition rows must have n_states entries");
      for (const auto& v : row) flat.push_back(v.get<double>());
    }
  }
  return TabularMdp(n, na, std::move(flat), j.at("gamma").get<double>(),
                    j.at("terminal").get<std::vector<StateIndex>>(), j.at("initial").get<std::vector<double>>());
}

inline json reward_to_json(const RewardTable& r) { return json{{"reward", table_to_json(r)}}; }
inline RewardTable reward_from_json(const json& j) { return RewardTable(table_from_json(j.at("reward"), "reward")); }

inline json policy_to_json(const StochasticPolicy& p) { return json{{"policy", table_to_json(p)}}; }
inline StochasticPolicy policy_from_json(const json& j) {
  return StochasticPolicy(table_from_json(j.at("policy"), "policy"));
}

/// One trajectory as [[state, action, reward, controller_tag], ...].
inline json trajectory_to_json(const Trajectory& traj) {
  json steps = json::array();
  for (const auto& st : traj.steps)
    steps.push_back(json::array({st.state, st.action, st.reward, std::string(to_string(st.controller))}));
  return steps;
}

inline Trajectory trajectory_from_json(const json& steps, std::size_t horizon) {
  Trajectory traj;
  traj.horizon = horizon;
  for (const auto& st : steps) {
    require(st.is_array() && st.size() == 4, ErrorCode::InvalidArgument, "trajectory steps have four fields");
    const auto tag = st[3].get<std::string>();
    require(tag == "learner" || tag == "demonstrator", ErrorCode::InvalidArgument, "unknown controller tag " + tag);
    traj.steps.push_back(Step{st[0].get<StateIndex>(), st[1].get<ActionIndex>(), st[2].get<double>(),
                              tag == "learner" ? Controller::Learner : Controller::Demonstrator});
  }
  if (traj.horizon < traj.steps.size()) traj.horizon = traj.steps.size();
  return traj;
}

inline void write_json_lines(std::ostream& out, const std::vector<Trajectory>& trajectories) {
  for (const auto& t : trajectories) out << trajectory_to_json(t).dump() << '\n';
}

inline std::vector<Trajectory> read_json_lines(std::istream& in, std::size_t horizon) {
  std::vector<Trajectory> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(trajectory_from_json(json::parse(line), horizon));
  }
  return out;
}

}  // namespace taskphase::io
