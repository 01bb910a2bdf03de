#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gumbelcf/mdp.hpp"
#include "gumbelcf/ope.hpp"
#include "gumbelcf/sepsis.hpp"

namespace gumbelcf {

/// Invalid experiment configuration (bad flag, file or value).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An estimator could not produce a meaningful value (e.g. all WIS weights zero).
class DegenerateEstimate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TargetKind { Learned, Behavior };

const char* target_name(TargetKind t);
TargetKind target_from_name(const std::string& name);

struct ExperimentConfig {
  std::uint64_t seed = 20190601;
  std::size_t n_train_episodes = 1000;
  std::size_t n_eval_episodes = 1000;  // fresh episodes for MB and True
  std::size_t horizon = 20;
  double epsilon = 0.05;
  std::size_t n_cf = 5;
  std::size_t n_boot = 100;
  std::size_t n_repeats = 100;
  double gamma = 0.99;
  bool hidden_state = true;
  TargetKind target = TargetKind::Learned;
  std::string dynamics_path;
  sepsis::DynamicsConfig dynamics;

  sepsis::ModelSpace model_space() const;
  /// Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
  /// Overlays the keys present in `j` onto this config. Loads the dynamics
  /// file when "dynamics" names one.
  void merge_json(const nlohmann::json& j);
  /// Reads dynamics_path (if set) into `dynamics`.
  void load_dynamics();
};

/// Seed of a named stochastic sub-task.
std::uint64_t task_seed(const ExperimentConfig& config, const std::string& label);

/// Behavior policy over the 1440 full states (plus the two absorbing states).
PolicyTable build_behavior_policy(const ExperimentConfig& config);

std::vector<Trajectory> simulate_observed(const ExperimentConfig& config,
                                          const PolicyTable& behavior, std::size_t n,
                                          const std::string& label);

struct LearnedModel {
  FiniteMDP mdp;
  PolicyTable target;              // policy iteration on the learned MDP
  PolicyTable empirical_behavior;  // action frequencies per model state
};

LearnedModel learn_model(const ExperimentConfig& config, std::span<const Trajectory> observed);

/// How the evaluated policy acts in each estimator.
struct TargetView {
  StepProbability wis_probability;
  const PolicyTable* model_policy = nullptr;  // for MB rollouts in the learned MDP
  ActionPlan cf_plan;
  sepsis::EpisodeSpec true_spec;              // for fresh simulator episodes
};

TargetView make_target_view(const ExperimentConfig& config, TargetKind kind,
                            const LearnedModel& model, const PolicyTable& behavior);

struct EvaluationResult {
  std::vector<OpeReport> reports;
  bool wis_degenerate = false;
  CfEstimate cf;
  DecompositionMatrix decomposition;

  const OpeReport& report(Estimator e, const std::string& label = {}) const;
  nlohmann::json summary_json(const ExperimentConfig& config) const;
};

/// Observed, WIS, MB, CF and True estimates with percentile-bootstrap
/// intervals, plus the outcome decomposition of the same counterfactual draws.
EvaluationResult evaluate(const ExperimentConfig& config, std::span<const Trajectory> observed,
                          const LearnedModel& model, const PolicyTable& behavior);

/// Counterfactual actions for a target: the learned policy, or a replay of the
/// observed actions with the empirical behavior policy past the episode end.
ActionPlan counterfactual_plan(TargetKind kind, const LearnedModel& model);

DecompositionMatrix decompose_run(const ExperimentConfig& config,
                                  std::span<const Trajectory> observed, const LearnedModel& model);

/// Repeats simulate / learn / evaluate with independent training and held-out
/// sets; reports the mean and the 2.5% / 97.5% quantiles across repeats.
std::vector<OpeReport> evaluate_repeated(const ExperimentConfig& config,
                                         const PolicyTable& behavior);

/// CSV rows: estimator,label,point,lower,upper,n_bootstrap.
std::string reports_csv(const std::vector<OpeReport>& reports);
std::string decomposition_csv(const DecompositionMatrix& m);
/// Observed and counterfactual per-step series for one episode.
std::string trajectory_series_csv(const Trajectory& observed,
                                  const std::vector<Trajectory>& counterfactuals,
                                  const sepsis::ModelSpace& space);

/// Artifact file names inside an artifacts directory.
namespace artifacts {
inline constexpr const char* kExperiment = "experiment.json";
inline constexpr const char* kTrajectories = "trajectories.jsonl";
inline constexpr const char* kLearnedMdp = "learned_mdp.json";
inline constexpr const char* kTargetPolicy = "target_policy.json";
inline constexpr const char* kBehaviorPolicy = "behavior_policy.json";
inline constexpr const char* kSummary = "summary.json";
inline constexpr const char* kSummaryRepeated = "summary_repeated.json";
inline constexpr const char* kOpeCsv = "ope.csv";
inline constexpr const char* kDecomposition = "decomposition.json";
inline constexpr const char* kDecompositionCsv = "decomposition.csv";
inline constexpr const char* kSeriesCsv = "trajectory_series.csv";
}  // namespace artifacts

void save_learned(const std::filesystem::path& dir, const LearnedModel& model);
/// Learns from the trajectories when no saved model exists.
LearnedModel load_or_learn(const std::filesystem::path& dir, const ExperimentConfig& config,
                           std::span<const Trajectory> observed);

}  // namespace gumbelcf
