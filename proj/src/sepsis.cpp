#include "gumbelcf/sepsis.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <stdexcept>

#include "gumbelcf/planning.hpp"

namespace gumbelcf::sepsis {

int PatientState::abnormal_count() const {
  return (heart_rate != kNormal) + (blood_pressure != kNormal) + (oxygen != kNormal) +
         (glucose != kGlucoseNormal);
}

SepsisAction SepsisAction::from_id(ActionId id) {
  if (id >= kNumActions) throw std::invalid_argument("sepsis: action id out of range");
  return {(id & 4U) != 0, (id & 2U) != 0, (id & 1U) != 0};
}

ActionId SepsisAction::id() const {
  return (antibiotics ? 4U : 0U) | (vasopressors ? 2U : 0U) | (ventilation ? 1U : 0U);
}

// ---------------------------------------------------------------------------
// Config

void DynamicsConfig::validate() const {
  const auto check = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument(std::string("dynamics: ") + name + " must lie in [0, 1]");
  };
  check(antibiotics_hr_high_to_normal, "antibiotics_hr_high_to_normal");
  check(antibiotics_bp_high_to_normal, "antibiotics_bp_high_to_normal");
  check(ventilation_o2_low_to_normal, "ventilation_o2_low_to_normal");
  check(vasopressors_bp_raise, "vasopressors_bp_raise");
  check(vasopressors_bp_raise_diabetic, "vasopressors_bp_raise_diabetic");
  check(vasopressors_glucose_raise_diabetic, "vasopressors_glucose_raise_diabetic");
  check(antibiotics_withdraw_hr_to_high, "antibiotics_withdraw_hr_to_high");
  check(antibiotics_withdraw_bp_to_high, "antibiotics_withdraw_bp_to_high");
  check(ventilation_withdraw_o2_to_low, "ventilation_withdraw_o2_to_low");
  check(vasopressors_withdraw_bp_drop, "vasopressors_withdraw_bp_drop");
  check(vasopressors_withdraw_bp_drop_diabetic, "vasopressors_withdraw_bp_drop_diabetic");
  check(fluctuate_hr, "fluctuate_hr");
  check(fluctuate_bp, "fluctuate_bp");
  check(fluctuate_o2, "fluctuate_o2");
  check(fluctuate_glucose, "fluctuate_glucose");
  check(std::min(1.0, fluctuate_glucose * diabetic_glucose_multiplier), "diabetic glucose rate");
  if (diabetic_glucose_multiplier < 0.0)
    throw std::invalid_argument("dynamics: diabetic_glucose_multiplier must be non-negative");
  check(diabetes_prevalence, "diabetes_prevalence");
  // Each initial distribution is validated by constructing it.
  (void)CategoricalParams({initial_heart_rate.begin(), initial_heart_rate.end()});
  (void)CategoricalParams({initial_blood_pressure.begin(), initial_blood_pressure.end()});
  (void)CategoricalParams({initial_oxygen.begin(), initial_oxygen.end()});
  (void)CategoricalParams({initial_glucose.begin(), initial_glucose.end()});
}

#define GUMBELCF_DYNAMICS_FIELDS(X)          \
  X(antibiotics_hr_high_to_normal)           \
  X(antibiotics_bp_high_to_normal)           \
  X(ventilation_o2_low_to_normal)            \
  X(vasopressors_bp_raise)                   \
  X(vasopressors_bp_raise_diabetic)          \
  X(vasopressors_glucose_raise_diabetic)     \
  X(antibiotics_withdraw_hr_to_high)         \
  X(antibiotics_withdraw_bp_to_high)         \
  X(ventilation_withdraw_o2_to_low)          \
  X(vasopressors_withdraw_bp_drop)           \
  X(vasopressors_withdraw_bp_drop_diabetic)  \
  X(fluctuate_hr)                            \
  X(fluctuate_bp)                            \
  X(fluctuate_o2)                            \
  X(fluctuate_glucose)                       \
  X(diabetic_glucose_multiplier)             \
  X(diabetes_prevalence)                     \
  X(initial_heart_rate)                      \
  X(initial_blood_pressure)                  \
  X(initial_oxygen)                          \
  X(initial_glucose)

nlohmann::json to_json(const DynamicsConfig& config) {
  nlohmann::json j;
#define X(name) j[#name] = config.name;
  GUMBELCF_DYNAMICS_FIELDS(X)
#undef X
  return j;
}

DynamicsConfig dynamics_from_json(const nlohmann::json& j) {
  DynamicsConfig config;
  if (!j.is_object()) throw std::invalid_argument("dynamics: expected a JSON object");
  std::size_t known = 0;
  try {
#define X(name)                                                   \
  if (j.contains(#name)) {                                        \
    j.at(#name).get_to(config.name);                              \
    ++known;                                                      \
  }
    GUMBELCF_DYNAMICS_FIELDS(X)
#undef X
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("dynamics: ") + e.what());
  }
  if (known != j.size()) {
    const DynamicsConfig defaults;
    const auto reference = to_json(defaults);
    for (const auto& item : j.items())
      if (!reference.contains(item.key()))
        throw std::invalid_argument("dynamics: unknown field '" + item.key() + "'");
  }
  config.validate();
  return config;
}

#undef GUMBELCF_DYNAMICS_FIELDS

// ---------------------------------------------------------------------------
// Encodings

StateId full_index(const PatientState& s) {
  StateId id = static_cast<StateId>(s.heart_rate);
  id = id * 3 + static_cast<StateId>(s.blood_pressure);
  id = id * 2 + static_cast<StateId>(s.oxygen);
  id = id * 5 + static_cast<StateId>(s.glucose);
  id = id * 2 + (s.diabetic ? 1 : 0);
  id = id * 2 + (s.on_antibiotics ? 1 : 0);
  id = id * 2 + (s.on_vasopressors ? 1 : 0);
  id = id * 2 + (s.on_ventilation ? 1 : 0);
  return id;
}

PatientState from_full_index(StateId id) {
  if (id >= kNumFullStates) throw std::invalid_argument("sepsis: full state id out of range");
  PatientState s;
  s.on_ventilation = id % 2;
  id /= 2;
  s.on_vasopressors = id % 2;
  id /= 2;
  s.on_antibiotics = id % 2;
  id /= 2;
  s.diabetic = id % 2;
  id /= 2;
  s.glucose = static_cast<int>(id % 5);
  id /= 5;
  s.oxygen = static_cast<int>(id % 2);
  id /= 2;
  s.blood_pressure = static_cast<int>(id % 3);
  id /= 3;
  s.heart_rate = static_cast<int>(id);
  return s;
}

StateId project_observation(const PatientState& s) {
  StateId id = static_cast<StateId>(s.heart_rate);
  id = id * 3 + static_cast<StateId>(s.blood_pressure);
  id = id * 2 + static_cast<StateId>(s.oxygen);
  id = id * 2 + (s.on_antibiotics ? 1 : 0);
  id = id * 2 + (s.on_vasopressors ? 1 : 0);
  id = id * 2 + (s.on_ventilation ? 1 : 0);
  return id;
}

PatientState from_projected_index(StateId id) {
  if (id >= kNumProjectedStates)
    throw std::invalid_argument("sepsis: projected state id out of range");
  PatientState s;
  s.on_ventilation = id % 2;
  id /= 2;
  s.on_vasopressors = id % 2;
  id /= 2;
  s.on_antibiotics = id % 2;
  id /= 2;
  s.oxygen = static_cast<int>(id % 2);
  id /= 2;
  s.blood_pressure = static_cast<int>(id % 3);
  id /= 3;
  s.heart_rate = static_cast<int>(id);
  return s;
}

MdpLayout ModelSpace::layout() const {
  MdpLayout layout;
  layout.n_states = n_states();
  layout.n_actions = kNumActions;
  layout.death_state = death();
  layout.discharge_state = discharge();
  return layout;
}

// ---------------------------------------------------------------------------
// Dynamics

namespace {

using Stage = std::function<Outcomes(const PatientState&)>;

Outcomes certain(const PatientState& s) { return {{1.0, s}}; }

/// With probability p apply `change`, otherwise keep the state.
template <class Change>
Outcomes maybe(const PatientState& s, double p, Change change) {
  PatientState changed = s;
  change(changed);
  if (p <= 0.0 || changed == s) return certain(s);
  if (p >= 1.0) return certain(changed);
  return {{1.0 - p, s}, {p, changed}};
}

/// Moves `field` one level down or up with probability rate / 2 each,
/// clipped to [0, top].
Outcomes fluctuate(const PatientState& s, double rate, int PatientState::*field, int top) {
  if (rate <= 0.0) return certain(s);
  PatientState down = s;
  PatientState up = s;
  down.*field = std::max(0, s.*field - 1);
  up.*field = std::min(top, s.*field + 1);
  return {{1.0 - rate, s}, {rate / 2.0, down}, {rate / 2.0, up}};
}

std::vector<Stage> build_stages(const PatientState& start, SepsisAction action,
                                const DynamicsConfig& c) {
  std::vector<Stage> stages;
  const bool diabetic = start.diabetic;
  if (action.antibiotics) {
    stages.emplace_back([&c](const PatientState& s) {
      return maybe(s, c.antibiotics_hr_high_to_normal, [](PatientState& x) {
        if (x.heart_rate == kHigh) x.heart_rate = kNormal;
      });
    });
    stages.emplace_back([&c](const PatientState& s) {
      return maybe(s, c.antibiotics_bp_high_to_normal, [](PatientState& x) {
        if (x.blood_pressure == kHigh) x.blood_pressure = kNormal;
      });
    });
  } else if (start.on_antibiotics) {
    stages.emplace_back([&c](const PatientState& s) {
      return maybe(s, c.antibiotics_withdraw_hr_to_high, [](PatientState& x) {
        if (x.heart_rate == kNormal) x.heart_rate = kHigh;
      });
    });
    stages.emplace_back([&c](const PatientState& s) {
      return maybe(s, c.antibiotics_withdraw_bp_to_high, [](PatientState& x) {
        if (x.blood_pressure == kNormal) x.blood_pressure = kHigh;
      });
    });
  }
  if (action.ventilation) {
    stages.emplace_back([&c](const PatientState& s) {
      return maybe(s, c.ventilation_o2_low_to_normal, [](PatientState& x) {
        if (x.oxygen == kLow) x.oxygen = kNormal;
      });
    });
  } else if (start.on_ventilation) {
    stages.emplace_back([&c](const PatientState& s) {
      return maybe(s, c.ventilation_withdraw_o2_to_low, [](PatientState& x) {
        if (x.oxygen == kNormal) x.oxygen = kLow;
      });
    });
  }
  if (action.vasopressors) {
    const double raise = diabetic ? c.vasopressors_bp_raise_diabetic : c.vasopressors_bp_raise;
    stages.emplace_back([raise](const PatientState& s) {
      return maybe(s, raise, [](PatientState& x) {
        x.blood_pressure = std::min<int>(kHigh, x.blood_pressure + 1);
      });
    });
    if (diabetic) {
      stages.emplace_back([&c](const PatientState& s) {
        return maybe(s, c.vasopressors_glucose_raise_diabetic, [](PatientState& x) {
          x.glucose = std::min<int>(kGlucoseVeryHigh, x.glucose + 1);
        });
      });
    }
  } else if (start.on_vasopressors) {
    const double drop =
        diabetic ? c.vasopressors_withdraw_bp_drop_diabetic : c.vasopressors_withdraw_bp_drop;
    stages.emplace_back([drop](const PatientState& s) {
      return maybe(s, drop, [](PatientState& x) {
        x.blood_pressure = std::max<int>(kLow, x.blood_pressure - 1);
      });
    });
  }
  if (!action.antibiotics) {
    stages.emplace_back([&c](const PatientState& s) {
      return fluctuate(s, c.fluctuate_hr, &PatientState::heart_rate, kHigh);
    });
  }
  if (!action.antibiotics && !action.vasopressors) {
    stages.emplace_back([&c](const PatientState& s) {
      return fluctuate(s, c.fluctuate_bp, &PatientState::blood_pressure, kHigh);
    });
  }
  if (!action.ventilation) {
    stages.emplace_back([&c](const PatientState& s) {
      return fluctuate(s, c.fluctuate_o2, &PatientState::oxygen, kNormal);
    });
  }
  const double glucose_rate =
      std::min(1.0, c.fluctuate_glucose * (diabetic ? c.diabetic_glucose_multiplier : 1.0));
  stages.emplace_back([glucose_rate](const PatientState& s) {
    return fluctuate(s, glucose_rate, &PatientState::glucose, kGlucoseVeryHigh);
  });
  stages.emplace_back([action](const PatientState& s) {
    PatientState x = s;
    x.on_antibiotics = action.antibiotics;
    x.on_vasopressors = action.vasopressors;
    x.on_ventilation = action.ventilation;
    return certain(x);
  });
  return stages;
}

const PatientState& pick(const Outcomes& outcomes, Rng& rng) {
  if (outcomes.size() == 1) return outcomes.front().second;
  const double u = rng.uniform();
  double cumulative = 0.0;
  for (const auto& [p, s] : outcomes) {
    cumulative += p;
    if (u < cumulative) return s;
  }
  return outcomes.back().second;
}

StepResult finish(const PatientState& next) {
  StepResult result;
  result.state = next;
  if (next.is_dead()) {
    result.done = true;
    result.reward = -1.0;
    result.terminal = Terminal::Died;
  } else if (next.is_dischargeable()) {
    result.done = true;
    result.reward = 1.0;
    result.terminal = Terminal::Discharged;
  }
  return result;
}

}  // namespace

StepResult env_step(const PatientState& state, SepsisAction action, const DynamicsConfig& config,
                    Rng& rng) {
  PatientState current = state;
  for (const auto& stage : build_stages(state, action, config)) {
    const Outcomes outcomes = stage(current);
    current = pick(outcomes, rng);
  }
  return finish(current);
}

Outcomes transition_outcomes(const PatientState& state, SepsisAction action,
                             const DynamicsConfig& config) {
  std::map<StateId, double> dist{{full_index(state), 1.0}};
  for (const auto& stage : build_stages(state, action, config)) {
    std::map<StateId, double> next;
    for (const auto& [id, mass] : dist)
      for (const auto& [p, s] : stage(from_full_index(id))) next[full_index(s)] += mass * p;
    dist = std::move(next);
  }
  Outcomes out;
  out.reserve(dist.size());
  for (const auto& [id, p] : dist) out.emplace_back(p, from_full_index(id));
  return out;
}

namespace {

bool valid_start(const PatientState& s) { return !s.is_dead() && !s.is_dischargeable(); }

}  // namespace

std::optional<PatientState> decode_model_state(const ModelSpace& space, StateId id) {
  if (id == space.death() || id == space.discharge()) return std::nullopt;
  if (id >= space.n_observations()) throw std::invalid_argument("sepsis: model state id out of range");
  return space.mode == ObservationMode::Projected ? from_projected_index(id) : from_full_index(id);
}

PatientState sample_initial(const DynamicsConfig& config, Rng& rng) {
  PatientState s;
  s.diabetic = rng.uniform() < config.diabetes_prevalence;
  do {
    s.heart_rate = static_cast<int>(sample_categorical(config.initial_heart_rate, rng));
    s.blood_pressure = static_cast<int>(sample_categorical(config.initial_blood_pressure, rng));
    s.oxygen = static_cast<int>(sample_categorical(config.initial_oxygen, rng));
    s.glucose = static_cast<int>(sample_categorical(config.initial_glucose, rng));
  } while (!valid_start(s));
  return s;
}

std::vector<double> initial_distribution(const DynamicsConfig& config) {
  std::vector<double> dist(kNumFullStates, 0.0);
  for (int diabetic = 0; diabetic < 2; ++diabetic) {
    const double p_diabetic =
        diabetic ? config.diabetes_prevalence : 1.0 - config.diabetes_prevalence;
    if (p_diabetic == 0.0) continue;
    double valid_mass = 0.0;
    std::vector<std::pair<StateId, double>> cells;
    for (int hr = 0; hr < 3; ++hr)
      for (int bp = 0; bp < 3; ++bp)
        for (int o2 = 0; o2 < 2; ++o2)
          for (int glu = 0; glu < 5; ++glu) {
            PatientState s;
            s.heart_rate = hr;
            s.blood_pressure = bp;
            s.oxygen = o2;
            s.glucose = glu;
            s.diabetic = diabetic != 0;
            if (!valid_start(s)) continue;
            const double p = config.initial_heart_rate[hr] * config.initial_blood_pressure[bp] *
                             config.initial_oxygen[o2] * config.initial_glucose[glu];
            valid_mass += p;
            cells.emplace_back(full_index(s), p);
          }
    if (valid_mass <= 0.0) throw std::invalid_argument("dynamics: no valid initial state");
    for (const auto& [id, p] : cells) dist[id] += p_diabetic * p / valid_mass;
  }
  return dist;
}

FiniteMDP build_true_mdp(const DynamicsConfig& config) {
  config.validate();
  constexpr StateId death = kNumFullStates;
  constexpr StateId discharge = kNumFullStates + 1;
  FiniteMDP mdp(kNumFullStates + 2, kNumActions);
  for (StateId id = 0; id < kNumFullStates; ++id) {
    const PatientState s = from_full_index(id);
    for (ActionId a = 0; a < kNumActions; ++a) {
      SparseRow row;
      for (const auto& [p, next] : transition_outcomes(s, SepsisAction::from_id(a), config)) {
        if (next.is_dead()) {
          row.emplace_back(death, p);
        } else if (next.is_dischargeable()) {
          row.emplace_back(discharge, p);
        } else {
          row.emplace_back(full_index(next), p);
        }
      }
      mdp.set_row(id, a, std::move(row));
    }
  }
  mdp.set_death_state(death);
  mdp.set_discharge_state(discharge);
  mdp.set_entry_reward(death, -1.0);
  mdp.set_entry_reward(discharge, 1.0);
  std::vector<double> initial = initial_distribution(config);
  initial.resize(kNumFullStates + 2, 0.0);
  mdp.set_initial(CategoricalParams(std::move(initial)));
  mdp.validate();
  return mdp;
}

PolicyTable smooth_policy(std::span<const ActionId> actions, std::size_t n_actions,
                          double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("smooth_policy: epsilon must lie in [0, 1]");
  std::vector<CategoricalParams> rows;
  rows.reserve(actions.size());
  for (ActionId best : actions) {
    if (n_actions == 1 || epsilon == 0.0) {
      rows.push_back(CategoricalParams::one_hot(n_actions, best));
      continue;
    }
    std::vector<double> probs(n_actions, epsilon / static_cast<double>(n_actions - 1));
    probs.at(best) = 1.0 - epsilon;
    rows.emplace_back(std::move(probs));
  }
  return PolicyTable(std::move(rows));
}

PolicyTable make_behavior_policy(const FiniteMDP& true_mdp, double epsilon, double gamma) {
  const PolicyTable optimal = policy_iteration(true_mdp, gamma).policy;
  const auto actions = optimal.modes();
  return smooth_policy(actions, true_mdp.n_actions(), epsilon);
}

// ---------------------------------------------------------------------------
// Episodes

std::string episode_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ep-%04zu", i);
  return buf;
}

Trajectory run_episode(const DynamicsConfig& config, const EpisodeSpec& spec, Rng& rng,
                       std::string id) {
  if (spec.policy == nullptr) throw std::invalid_argument("run_episode: no policy");
  const std::size_t needed =
      spec.input == PolicyInput::FullState ? kNumFullStates : spec.emit.n_observations();
  if (spec.policy->n_states() < needed || spec.policy->n_actions() != kNumActions)
    throw std::invalid_argument("run_episode: policy does not cover the state space");

  Trajectory traj;
  traj.id = std::move(id);
  PatientState state = sample_initial(config, rng);
  bool done = false;
  for (std::size_t t = 0; t < spec.horizon && !done; ++t) {
    const StateId policy_state =
        spec.input == PolicyInput::FullState ? full_index(state) : spec.emit.observe(state);
    const ActionId a = spec.policy->sample(policy_state, rng);
    const StepResult result = env_step(state, SepsisAction::from_id(a), config, rng);
    Step step;
    step.state = full_index(state);
    step.obs = spec.emit.observe(state);
    step.action = a;
    step.behavior_probs = spec.policy->row(policy_state);
    step.reward = result.reward;
    traj.steps.push_back(std::move(step));
    state = result.state;
    done = result.done;
    traj.terminal = result.terminal;
  }
  traj.final_state = full_index(state);
  switch (traj.terminal) {
    case Terminal::Died:
      traj.final_obs = spec.emit.death();
      break;
    case Terminal::Discharged:
      traj.final_obs = spec.emit.discharge();
      break;
    case Terminal::Censored:
      traj.final_obs = spec.emit.observe(state);
      break;
  }
  return traj;
}

std::vector<Trajectory> generate_episodes(const DynamicsConfig& config, const EpisodeSpec& spec,
                                          std::size_t n, std::uint64_t seed,
                                          const std::string& label) {
  std::vector<Trajectory> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = episode_id(i);
    Rng rng(derive_seed(seed, label + "/" + id));
    out.push_back(run_episode(config, spec, rng, id));
  }
  return out;
}

}  // namespace gumbelcf::sepsis
