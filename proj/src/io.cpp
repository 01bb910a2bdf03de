#include "gumbelcf/io.hpp"

#include <fstream>

namespace gumbelcf {

using nlohmann::json;

json to_json(const Trajectory& traj) {
  json steps = json::array();
  for (const auto& step : traj.steps) {
    json s = {{"s", step.state}, {"o", step.obs}, {"a", step.action}, {"r", step.reward}};
    if (step.behavior_probs) {
      const auto probs = step.behavior_probs->probs();
      s["bprobs"] = std::vector<double>(probs.begin(), probs.end());
    }
    steps.push_back(std::move(s));
  }
  return {{"id", traj.id},
          {"steps", std::move(steps)},
          {"final", {{"s", traj.final_state}, {"o", traj.final_obs}}},
          {"terminal", terminal_name(traj.terminal)}};
}

Trajectory trajectory_from_json(const json& j) {
  try {
    Trajectory traj;
    traj.id = j.at("id").get<std::string>();
    for (const auto& s : j.at("steps")) {
      Step step;
      step.state = s.at("s").get<StateId>();
      step.obs = s.contains("o") ? s.at("o").get<StateId>() : step.state;
      step.action = s.at("a").get<ActionId>();
      step.reward = s.at("r").get<double>();
      if (s.contains("bprobs") && !s.at("bprobs").is_null())
        step.behavior_probs = CategoricalParams(s.at("bprobs").get<std::vector<double>>());
      traj.steps.push_back(std::move(step));
    }
    const auto& fin = j.at("final");
    traj.final_state = fin.at("s").get<StateId>();
    traj.final_obs = fin.contains("o") ? fin.at("o").get<StateId>() : traj.final_state;
    traj.terminal = terminal_from_name(j.at("terminal").get<std::string>());
    return traj;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed trajectory: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("invalid trajectory: ") + e.what());
  }
}

json to_json(const FiniteMDP& mdp) {
  json transition = json::array();
  json reward = json::array();
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    json t_row = json::array();
    json r_row = json::array();
    for (ActionId a = 0; a < mdp.n_actions(); ++a) {
      json entries = json::array();
      for (const auto& [next, p] : mdp.row(s, a)) entries.push_back({next, p});
      t_row.push_back(std::move(entries));
      r_row.push_back(mdp.reward(s, a));
    }
    transition.push_back(std::move(t_row));
    reward.push_back(std::move(r_row));
  }
  json entry = json::array();
  for (StateId s = 0; s < mdp.n_states(); ++s) entry.push_back(mdp.entry_reward(s));
  json out = {{"schema_version", kSchemaVersion},
              {"n_states", mdp.n_states()},
              {"n_actions", mdp.n_actions()},
              {"transition_format", "sparse"},
              {"transition", std::move(transition)},
              {"reward", std::move(reward)},
              {"entry_reward", std::move(entry)},
              {"absorbing", mdp.absorbing_states()},
              {"death_state", nullptr},
              {"discharge_state", nullptr},
              {"initial", nullptr}};
  if (mdp.death_state()) out["death_state"] = *mdp.death_state();
  if (mdp.discharge_state()) out["discharge_state"] = *mdp.discharge_state();
  if (mdp.initial()) {
    const auto probs = mdp.initial()->probs();
    out["initial"] = std::vector<double>(probs.begin(), probs.end());
  }
  return out;
}

FiniteMDP mdp_from_json(const json& j) {
  try {
    FiniteMDP mdp(j.at("n_states").get<std::size_t>(), j.at("n_actions").get<std::size_t>());
    const bool sparse = j.value("transition_format", std::string("sparse")) == "sparse";
    const auto& transition = j.at("transition");
    for (StateId s = 0; s < mdp.n_states(); ++s) {
      for (ActionId a = 0; a < mdp.n_actions(); ++a) {
        const auto& cell = transition.at(s).at(a);
        SparseRow row;
        if (sparse) {
          for (const auto& e : cell) row.emplace_back(e.at(0).get<StateId>(), e.at(1).get<double>());
        } else {
          for (StateId next = 0; next < cell.size(); ++next)
            if (double p = cell.at(next).get<double>(); p != 0.0) row.emplace_back(next, p);
        }
        mdp.set_row(s, a, std::move(row));
        mdp.set_reward(s, a, j.at("reward").at(s).at(a).get<double>());
      }
    }
    if (j.contains("entry_reward"))
      for (StateId s = 0; s < mdp.n_states(); ++s)
        mdp.set_entry_reward(s, j["entry_reward"].at(s).get<double>());
    for (const auto& s : j.at("absorbing")) mdp.make_absorbing(s.get<StateId>());
    if (j.contains("death_state") && !j["death_state"].is_null())
      mdp.set_death_state(j["death_state"].get<StateId>());
    if (j.contains("discharge_state") && !j["discharge_state"].is_null())
      mdp.set_discharge_state(j["discharge_state"].get<StateId>());
    if (j.contains("initial") && !j["initial"].is_null())
      mdp.set_initial(CategoricalParams(j["initial"].get<std::vector<double>>()));
    mdp.validate();
    return mdp;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed mdp: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("invalid mdp: ") + e.what());
  } catch (const std::out_of_range& e) {
    throw DataError(std::string("invalid mdp: ") + e.what());
  }
}

json to_json(const PolicyTable& policy) {
  json probs = json::array();
  for (StateId s = 0; s < policy.n_states(); ++s) {
    const auto row = policy.row(s).probs();
    probs.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return {{"schema_version", kSchemaVersion},
          {"n_states", policy.n_states()},
          {"n_actions", policy.n_actions()},
          {"kind", policy.kind() == PolicyKind::Deterministic ? "deterministic" : "stochastic"},
          {"probs", std::move(probs)}};
}

PolicyTable policy_from_json(const json& j) {
  try {
    std::vector<CategoricalParams> rows;
    for (const auto& row : j.at("probs")) rows.emplace_back(row.get<std::vector<double>>());
    return PolicyTable(std::move(rows));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed policy: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("invalid policy: ") + e.what());
  }
}

std::string to_jsonl(std::span<const Trajectory> trajectories) {
  std::string out;
  for (const auto& traj : trajectories) {
    out += to_json(traj).dump();
    out += '\n';
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_jsonl(const std::filesystem::path& path, std::span<const Trajectory> trajectories) {
  write_text(path, to_jsonl(trajectories));
}

std::vector<Trajectory> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<Trajectory> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(trajectory_from_json(j));
  }
  return out;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

}  // namespace gumbelcf
