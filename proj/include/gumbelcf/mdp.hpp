#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gumbelcf/categorical.hpp"
#include "gumbelcf/gumbel.hpp"
#include "gumbelcf/random.hpp"

namespace gumbelcf {

using StateId = std::size_t;
using ActionId = std::size_t;

/// An observed transition that the model assigns zero probability.
class ObservationImpossible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Terminal { Died, Censored, Discharged };

const char* terminal_name(Terminal t);
Terminal terminal_from_name(const std::string& name);

struct Step {
  StateId state = 0;        // ground-truth state id
  StateId obs = 0;          // state id as seen by the model
  ActionId action = 0;
  std::optional<CategoricalParams> behavior_probs;
  double reward = 0.0;      // reward received on this transition
};

/// One episode. `final_state`/`final_obs` is the state entered by the last
/// step's transition.
struct Trajectory {
  std::string id;
  std::vector<Step> steps;
  StateId final_state = 0;
  StateId final_obs = 0;
  Terminal terminal = Terminal::Censored;

  double total_reward() const;
  std::size_t size() const { return steps.size(); }
  /// Model-space state at time t, for t in [0, size()].
  StateId obs_at(std::size_t t) const { return t < steps.size() ? steps[t].obs : final_obs; }
};

using SparseRow = std::vector<std::pair<StateId, double>>;

/// Tabular MDP with sparse transition rows.
///
/// The step reward for (s, a) -> s' is reward(s, a) + entry_reward(s').
/// Absorbing states self-loop with probability one and earn nothing once
/// entered.
class FiniteMDP {
 public:
  FiniteMDP(std::size_t n_states, std::size_t n_actions);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }

  /// Sets the row for (s, a); entries are merged, sorted and checked to form a
  /// valid distribution.
  void set_row(StateId s, ActionId a, SparseRow row);
  const SparseRow& row(StateId s, ActionId a) const { return rows_[index(s, a)]; }
  /// Dense next-state distribution for (s, a).
  CategoricalParams transition(StateId s, ActionId a) const;
  double probability(StateId s, ActionId a, StateId next) const;

  void set_reward(StateId s, ActionId a, double r) { reward_[index(s, a)] = r; }
  double reward(StateId s, ActionId a) const { return reward_[index(s, a)]; }
  void set_entry_reward(StateId s, double r) { entry_reward_.at(s) = r; }
  double entry_reward(StateId s) const { return entry_reward_[s]; }

  /// Marks s absorbing: self-loop rows for every action, zero (s, a) reward.
  void make_absorbing(StateId s);
  bool is_absorbing(StateId s) const { return absorbing_[s]; }
  std::vector<StateId> absorbing_states() const;

  void set_death_state(StateId s);
  void set_discharge_state(StateId s);
  std::optional<StateId> death_state() const { return death_; }
  std::optional<StateId> discharge_state() const { return discharge_; }

  void set_initial(std::optional<CategoricalParams> initial);
  const std::optional<CategoricalParams>& initial() const { return initial_; }

  /// Outcome label for an episode that entered `s` last.
  Terminal classify(StateId s, bool absorbed) const;

  /// Throws std::invalid_argument if any invariant is broken.
  void validate() const;

 private:
  std::size_t index(StateId s, ActionId a) const;

  std::size_t n_states_;
  std::size_t n_actions_;
  std::vector<SparseRow> rows_;
  std::vector<double> reward_;
  std::vector<double> entry_reward_;
  std::vector<bool> absorbing_;
  std::optional<StateId> death_;
  std::optional<StateId> discharge_;
  std::optional<CategoricalParams> initial_;
};

enum class PolicyKind { Deterministic, Stochastic };

/// Markov policy over model states.
class PolicyTable {
 public:
  PolicyTable(std::vector<CategoricalParams> rows);
  static PolicyTable deterministic(std::span<const ActionId> actions, std::size_t n_actions);

  std::size_t n_states() const { return rows_.size(); }
  std::size_t n_actions() const { return rows_.empty() ? 0 : rows_.front().size(); }
  const CategoricalParams& row(StateId s) const { return rows_.at(s); }
  double probability(StateId s, ActionId a) const { return rows_.at(s)[a]; }
  PolicyKind kind() const { return kind_; }

  /// Greedy action of each row.
  std::vector<ActionId> modes() const;

  /// Draws an action; one-hot rows consume no randomness.
  ActionId sample(StateId s, Rng& rng) const;

 private:
  std::vector<CategoricalParams> rows_;
  PolicyKind kind_;
};

/// Draws an index from a categorical by inverse CDF on one uniform.
std::size_t sample_categorical(std::span<const double> probs, Rng& rng);

/// Ids of the model's absorbing outcomes, used when learning from episodes.
struct MdpLayout {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::optional<StateId> death_state;
  std::optional<StateId> discharge_state;
  double death_reward = -1.0;
  double discharge_reward = 1.0;
};

/// Count-based MDP over the trajectories' model states. Unobserved (s, a)
/// pairs transition to the death state; death and discharge are absorbing.
FiniteMDP learn_mdp(std::span<const Trajectory> trajectories, const MdpLayout& layout);

/// Empirical action frequencies per model state; unvisited states are uniform.
PolicyTable learn_behavior_policy(std::span<const Trajectory> trajectories,
                                  std::size_t n_states, std::size_t n_actions);

/// Rolls the policy forward from `start` (or a draw from mdp.initial()).
Trajectory simulate(const FiniteMDP& mdp, const PolicyTable& policy, std::size_t horizon,
                    Rng& rng, std::optional<StateId> start = std::nullopt,
                    std::string id = {});

/// Which actions a counterfactual rollout takes.
///
/// With a table, actions come from that policy. Without one, the observed
/// actions are replayed, and `fallback` covers steps past the observed episode.
/// Overrides pin the action at specific time steps in either case.
struct ActionPlan {
  const PolicyTable* policy = nullptr;
  const PolicyTable* fallback = nullptr;
  std::map<std::size_t, ActionId> overrides;

  static ActionPlan follow(const PolicyTable& policy) { return {&policy, nullptr, {}}; }
  static ActionPlan replay(const PolicyTable* fallback = nullptr) { return {nullptr, fallback, {}}; }
};

/// Abducted transition noise for every observed step of an episode.
std::vector<GumbelNoise> abduct_noise(const FiniteMDP& mdp, const Trajectory& observed, Rng& rng);

/// Counterfactual episode under the Gumbel-Max SCM: the observed transitions
/// fix per-step posterior noise, which is reused at the same time step under
/// the plan's actions. Steps past the observed length use prior noise.
Trajectory counterfactual_rollout(const FiniteMDP& mdp, const Trajectory& observed,
                                  const ActionPlan& plan, std::size_t horizon, Rng& rng);
Trajectory counterfactual_rollout(const FiniteMDP& mdp, const Trajectory& observed,
                                  const PolicyTable& target, std::size_t horizon, Rng& rng);

/// First time step at which the actions differ, or the shorter length.
std::size_t first_action_divergence(const Trajectory& a, const Trajectory& b);

}  // namespace gumbelcf
