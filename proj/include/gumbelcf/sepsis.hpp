#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gumbelcf/mdp.hpp"
#include "gumbelcf/random.hpp"

namespace gumbelcf::sepsis {

enum Level : int { kLow = 0, kNormal = 1, kHigh = 2 };

/// Glucose ordinal levels; only kGlucoseNormal is in range.
enum GlucoseLevel : int {
  kGlucoseVeryLow = 0,
  kGlucoseLow = 1,
  kGlucoseNormal = 2,
  kGlucoseHigh = 3,
  kGlucoseVeryHigh = 4,
};

inline constexpr std::size_t kNumFullStates = 1440;
inline constexpr std::size_t kNumProjectedStates = 144;
inline constexpr std::size_t kNumActions = 8;

struct PatientState {
  int heart_rate = kNormal;       // Low / Normal / High
  int blood_pressure = kNormal;   // Low / Normal / High
  int oxygen = kNormal;           // Low / Normal
  int glucose = kGlucoseNormal;   // VeryLow .. VeryHigh
  bool diabetic = false;
  bool on_antibiotics = false;
  bool on_vasopressors = false;
  bool on_ventilation = false;

  /// Number of vitals outside the normal range (0..4).
  int abnormal_count() const;
  bool any_treatment() const { return on_antibiotics || on_vasopressors || on_ventilation; }
  bool is_dead() const { return abnormal_count() >= 3; }
  bool is_dischargeable() const { return abnormal_count() == 0 && !any_treatment(); }

  friend bool operator==(const PatientState&, const PatientState&) = default;
};

struct SepsisAction {
  bool antibiotics = false;
  bool vasopressors = false;
  bool ventilation = false;

  static SepsisAction from_id(ActionId id);
  ActionId id() const;
};

/// Stochastic treatment and fluctuation parameters. The defaults are tuned
/// artifact values, not measured physiology.
struct DynamicsConfig {
  // Treatment on.
  double antibiotics_hr_high_to_normal = 0.5;
  double antibiotics_bp_high_to_normal = 0.5;
  double ventilation_o2_low_to_normal = 0.7;
  double vasopressors_bp_raise = 0.7;
  double vasopressors_bp_raise_diabetic = 0.5;
  double vasopressors_glucose_raise_diabetic = 0.5;
  // Treatment withdrawn.
  double antibiotics_withdraw_hr_to_high = 0.1;
  double antibiotics_withdraw_bp_to_high = 0.1;
  double ventilation_withdraw_o2_to_low = 0.1;
  double vasopressors_withdraw_bp_drop = 0.1;
  double vasopressors_withdraw_bp_drop_diabetic = 0.05;
  // Spontaneous one-level moves (half up, half down) of untreated vitals.
  double fluctuate_hr = 0.1;
  double fluctuate_bp = 0.1;
  double fluctuate_o2 = 0.1;
  double fluctuate_glucose = 0.1;
  double diabetic_glucose_multiplier = 3.0;
  double diabetes_prevalence = 0.2;
  // Initial vitals, before conditioning on a live, non-dischargeable start.
  std::array<double, 3> initial_heart_rate{0.25, 0.5, 0.25};
  std::array<double, 3> initial_blood_pressure{0.25, 0.5, 0.25};
  std::array<double, 2> initial_oxygen{0.3, 0.7};
  std::array<double, 5> initial_glucose{0.05, 0.15, 0.6, 0.15, 0.05};

  void validate() const;
};

nlohmann::json to_json(const DynamicsConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
DynamicsConfig dynamics_from_json(const nlohmann::json& j);

/// Encodings. Full ids cover all 1440 cells; projected ids drop glucose and
/// diabetes and cover 144 cells.
StateId full_index(const PatientState& s);
PatientState from_full_index(StateId id);
StateId project_observation(const PatientState& s);
/// Decodes a projected id; glucose is reported as Normal and diabetic false.
PatientState from_projected_index(StateId id);

enum class ObservationMode { Projected, Full };

/// Model state space: observation cells plus death and discharge.
struct ModelSpace {
  ObservationMode mode = ObservationMode::Projected;

  std::size_t n_observations() const {
    return mode == ObservationMode::Projected ? kNumProjectedStates : kNumFullStates;
  }
  std::size_t n_states() const { return n_observations() + 2; }
  StateId death() const { return n_observations(); }
  StateId discharge() const { return n_observations() + 1; }
  StateId observe(const PatientState& s) const {
    return mode == ObservationMode::Projected ? project_observation(s) : full_index(s);
  }
  MdpLayout layout() const;
};

/// Patient state behind a model id; empty for death and discharge. Projected
/// ids decode with glucose Normal and diabetic false.
std::optional<PatientState> decode_model_state(const ModelSpace& space, StateId id);

/// A weighted set of successor states.
using Outcomes = std::vector<std::pair<double, PatientState>>;

struct StepResult {
  PatientState state;
  double reward = 0.0;
  bool done = false;
  Terminal terminal = Terminal::Censored;
};

/// One transition: treatment effects, withdrawal effects, fluctuations, then
/// the death / discharge checks.
StepResult env_step(const PatientState& state, SepsisAction action, const DynamicsConfig& config,
                    Rng& rng);

/// Exact successor distribution of env_step before the terminal checks.
Outcomes transition_outcomes(const PatientState& state, SepsisAction action,
                             const DynamicsConfig& config);

PatientState sample_initial(const DynamicsConfig& config, Rng& rng);

/// Exact initial-state distribution over full ids.
std::vector<double> initial_distribution(const DynamicsConfig& config);

/// Exact environment MDP over 1440 full states plus death (1440) and
/// discharge (1441), enumerated from the config.
FiniteMDP build_true_mdp(const DynamicsConfig& config);

/// Deterministic policy smoothed so each non-preferred action gets
/// epsilon / (n_actions - 1).
PolicyTable smooth_policy(std::span<const ActionId> actions, std::size_t n_actions,
                          double epsilon);

/// Policy iteration on the true MDP, then epsilon-smoothing.
PolicyTable make_behavior_policy(const FiniteMDP& true_mdp, double epsilon, double gamma = 0.99);

/// Where a policy reads its state from.
enum class PolicyInput { FullState, ModelState };

struct EpisodeSpec {
  const PolicyTable* policy = nullptr;
  PolicyInput input = PolicyInput::FullState;
  ModelSpace emit;  // which ids land in the `o` fields
  std::size_t horizon = 20;
};

/// Runs one episode in the simulator. Steps carry full-state ids in `s`,
/// model ids in `o` and the acting policy's row in `bprobs`.
Trajectory run_episode(const DynamicsConfig& config, const EpisodeSpec& spec, Rng& rng,
                       std::string id);

/// Episodes "ep-0000", ... each on a stream derived from (seed, label, id).
std::vector<Trajectory> generate_episodes(const DynamicsConfig& config, const EpisodeSpec& spec,
                                          std::size_t n, std::uint64_t seed,
                                          const std::string& label);

std::string episode_id(std::size_t i);

}  // namespace gumbelcf::sepsis
