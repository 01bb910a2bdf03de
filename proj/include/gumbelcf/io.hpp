#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gumbelcf/mdp.hpp"

namespace gumbelcf {

inline constexpr int kSchemaVersion = 1;

/// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const nlohmann::json& j);

nlohmann::json to_json(const FiniteMDP& mdp);
FiniteMDP mdp_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PolicyTable& policy);
PolicyTable policy_from_json(const nlohmann::json& j);

/// One episode per line.
std::string to_jsonl(std::span<const Trajectory> trajectories);
void write_jsonl(const std::filesystem::path& path, std::span<const Trajectory> trajectories);
std::vector<Trajectory> read_jsonl(const std::filesystem::path& path);

nlohmann::json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace gumbelcf
