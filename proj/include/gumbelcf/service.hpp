#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "gumbelcf/mdp.hpp"
#include "gumbelcf/ope.hpp"
#include "gumbelcf/pipeline.hpp"

namespace gumbelcf {

/// Startup failure of the explorer service (missing artifacts, busy port).
class ServiceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// JSON endpoints over one artifacts directory. Handlers are plain functions of
/// the request so they can be exercised without a socket.
class ExplorerService {
 public:
  struct Response {
    int status = 200;
    nlohmann::json body;
  };

  static constexpr std::size_t kMaxSamples = 50;

  /// Needs experiment.json and trajectories.jsonl. The learned model and the
  /// decomposition are recomputed when their files are absent.
  static ExplorerService load(const std::filesystem::path& dir);

  Response summary() const;
  Response decomposition() const;
  /// All trajectory ids, or those of one decomposition cell ("died_discharged").
  Response trajectories(const std::optional<std::string>& cell) const;
  Response trajectory(const std::string& id) const;
  /// Body: {trajectory_id, policy: "target"|"behavior", action_overrides:
  /// [{t, action_id}], n_samples, seed}.
  Response counterfactual(const nlohmann::json& request) const;

  const ExperimentConfig& config() const { return config_; }

 private:
  ExplorerService() = default;

  ExperimentConfig config_;
  std::vector<Trajectory> trajectories_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::shared_ptr<const LearnedModel> model_;
  std::optional<nlohmann::json> summary_;
  nlohmann::json decomposition_;
};

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path ui_dir;  // static files served at "/" when set
};

/// HTTP front end for an ExplorerService.
class ExplorerServer {
 public:
  ExplorerServer(ExplorerService service, ServeOptions options);
  ~ExplorerServer();
  ExplorerServer(const ExplorerServer&) = delete;
  ExplorerServer& operator=(const ExplorerServer&) = delete;

  /// Binds the socket; throws ServiceError if the port is taken. Returns the port.
  int bind();
  /// Serves until stop(). Call bind() first.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gumbelcf
