#include "gumbelcf/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gumbelcf {

const char* terminal_name(Terminal t) {
  switch (t) {
    case Terminal::Died:
      return "died";
    case Terminal::Discharged:
      return "discharged";
    case Terminal::Censored:
      return "censored";
  }
  return "censored";
}

Terminal terminal_from_name(const std::string& name) {
  if (name == "died") return Terminal::Died;
  if (name == "discharged") return Terminal::Discharged;
  if (name == "censored") return Terminal::Censored;
  throw std::invalid_argument("unknown terminal outcome '" + name + "'");
}

double Trajectory::total_reward() const {
  double total = 0.0;
  for (const auto& step : steps) total += step.reward;
  return total;
}

// ---------------------------------------------------------------------------
// FiniteMDP

FiniteMDP::FiniteMDP(std::size_t n_states, std::size_t n_actions)
    : n_states_(n_states),
      n_actions_(n_actions),
      rows_(n_states * n_actions),
      reward_(n_states * n_actions, 0.0),
      entry_reward_(n_states, 0.0),
      absorbing_(n_states, false) {
  if (n_states == 0 || n_actions == 0)
    throw std::invalid_argument("mdp: need at least one state and one action");
}

std::size_t FiniteMDP::index(StateId s, ActionId a) const {
  if (s >= n_states_ || a >= n_actions_) throw std::out_of_range("mdp: state/action out of range");
  return s * n_actions_ + a;
}

void FiniteMDP::set_row(StateId s, ActionId a, SparseRow row) {
  std::sort(row.begin(), row.end());
  SparseRow merged;
  double total = 0.0;
  for (const auto& [next, p] : row) {
    if (next >= n_states_) throw std::invalid_argument("mdp: next state out of range");
    if (!std::isfinite(p) || p < 0.0) throw std::invalid_argument("mdp: invalid probability");
    total += p;
    if (p == 0.0) continue;
    if (!merged.empty() && merged.back().first == next) {
      merged.back().second += p;
    } else {
      merged.emplace_back(next, p);
    }
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("mdp: row (" + std::to_string(s) + ", " + std::to_string(a) +
                                ") sums to " + std::to_string(total));
  // Rows already normalized up to rounding are stored as given so that a
  // serialized model reloads bit for bit.
  if (std::abs(total - 1.0) > 1e-12)
    for (auto& entry : merged) entry.second /= total;
  rows_[index(s, a)] = std::move(merged);
}

CategoricalParams FiniteMDP::transition(StateId s, ActionId a) const {
  std::vector<double> dense(n_states_, 0.0);
  for (const auto& [next, p] : row(s, a)) dense[next] = p;
  return CategoricalParams(std::move(dense));
}

double FiniteMDP::probability(StateId s, ActionId a, StateId next) const {
  const auto& r = row(s, a);
  const auto it = std::lower_bound(r.begin(), r.end(), std::make_pair(next, 0.0));
  return it != r.end() && it->first == next ? it->second : 0.0;
}

void FiniteMDP::make_absorbing(StateId s) {
  for (ActionId a = 0; a < n_actions_; ++a) {
    rows_[index(s, a)] = {{s, 1.0}};
    reward_[index(s, a)] = 0.0;
  }
  absorbing_.at(s) = true;
}

std::vector<StateId> FiniteMDP::absorbing_states() const {
  std::vector<StateId> out;
  for (StateId s = 0; s < n_states_; ++s)
    if (absorbing_[s]) out.push_back(s);
  return out;
}

void FiniteMDP::set_death_state(StateId s) {
  make_absorbing(s);
  death_ = s;
}

void FiniteMDP::set_discharge_state(StateId s) {
  make_absorbing(s);
  discharge_ = s;
}

void FiniteMDP::set_initial(std::optional<CategoricalParams> initial) {
  if (initial && initial->size() != n_states_)
    throw std::invalid_argument("mdp: initial distribution has wrong length");
  initial_ = std::move(initial);
}

Terminal FiniteMDP::classify(StateId s, bool absorbed) const {
  if (!absorbed) return Terminal::Censored;
  if (death_ && s == *death_) return Terminal::Died;
  if (discharge_ && s == *discharge_) return Terminal::Discharged;
  if (entry_reward_[s] < 0.0) return Terminal::Died;
  if (entry_reward_[s] > 0.0) return Terminal::Discharged;
  return Terminal::Censored;
}

void FiniteMDP::validate() const {
  for (StateId s = 0; s < n_states_; ++s) {
    for (ActionId a = 0; a < n_actions_; ++a) {
      const auto& r = rows_[index(s, a)];
      if (r.empty())
        throw std::invalid_argument("mdp: missing row (" + std::to_string(s) + ", " +
                                    std::to_string(a) + ")");
      double total = 0.0;
      for (const auto& entry : r) total += entry.second;
      if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("mdp: row not normalized");
      if (absorbing_[s] && (r.size() != 1 || r[0].first != s || reward_[index(s, a)] != 0.0))
        throw std::invalid_argument("mdp: absorbing state " + std::to_string(s) +
                                    " must self-loop with zero reward");
    }
  }
}

// ---------------------------------------------------------------------------
// PolicyTable

PolicyTable::PolicyTable(std::vector<CategoricalParams> rows) : rows_(std::move(rows)) {
  if (rows_.empty()) throw std::invalid_argument("policy: no states");
  const std::size_t k = rows_.front().size();
  bool deterministic = true;
  for (const auto& r : rows_) {
    if (r.size() != k) throw std::invalid_argument("policy: rows differ in action count");
    deterministic = deterministic && r.is_one_hot();
  }
  kind_ = deterministic ? PolicyKind::Deterministic : PolicyKind::Stochastic;
}

PolicyTable PolicyTable::deterministic(std::span<const ActionId> actions, std::size_t n_actions) {
  std::vector<CategoricalParams> rows;
  rows.reserve(actions.size());
  for (ActionId a : actions) rows.push_back(CategoricalParams::one_hot(n_actions, a));
  return PolicyTable(std::move(rows));
}

std::vector<ActionId> PolicyTable::modes() const {
  std::vector<ActionId> out;
  out.reserve(rows_.size());
  for (const auto& r : rows_) out.push_back(r.mode());
  return out;
}

std::size_t sample_categorical(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    cumulative += probs[i];
    last_positive = i;
    if (u < cumulative) return i;
  }
  return last_positive;
}

ActionId PolicyTable::sample(StateId s, Rng& rng) const {
  const auto& r = row(s);
  if (r.is_one_hot()) return r.mode();
  return sample_categorical(r.probs(), rng);
}

// ---------------------------------------------------------------------------
// Learning

FiniteMDP learn_mdp(std::span<const Trajectory> trajectories, const MdpLayout& layout) {
  if (trajectories.empty()) throw std::invalid_argument("learn_mdp: no trajectories");
  const std::size_t n_s = layout.n_states;
  const std::size_t n_a = layout.n_actions;
  FiniteMDP mdp(n_s, n_a);

  std::vector<std::map<StateId, double>> counts(n_s * n_a);
  std::vector<double> entry_sum(n_s, 0.0);
  std::vector<double> entry_count(n_s, 0.0);
  std::vector<double> initial(n_s, 0.0);

  for (const auto& traj : trajectories) {
    if (traj.steps.empty()) throw std::invalid_argument("learn_mdp: empty trajectory " + traj.id);
    if (traj.steps.front().obs >= n_s)
      throw std::invalid_argument("learn_mdp: id out of range in trajectory " + traj.id);
    initial[traj.steps.front().obs] += 1.0;
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
      const auto& step = traj.steps[t];
      const StateId next = traj.obs_at(t + 1);
      if (step.obs >= n_s || next >= n_s || step.action >= n_a)
        throw std::invalid_argument("learn_mdp: id out of range in trajectory " + traj.id);
      counts[step.obs * n_a + step.action][next] += 1.0;
      entry_sum[next] += step.reward;
      entry_count[next] += 1.0;
    }
  }

  for (StateId s = 0; s < n_s; ++s) {
    if (entry_count[s] > 0.0) mdp.set_entry_reward(s, entry_sum[s] / entry_count[s]);
    for (ActionId a = 0; a < n_a; ++a) {
      const auto& c = counts[s * n_a + a];
      double total = 0.0;
      for (const auto& entry : c) total += entry.second;
      SparseRow row;
      if (total > 0.0) {
        for (const auto& [next, n] : c) row.emplace_back(next, n / total);
      } else if (layout.death_state) {
        row.emplace_back(*layout.death_state, 1.0);
      } else {
        row.emplace_back(s, 1.0);
      }
      mdp.set_row(s, a, std::move(row));
    }
  }

  if (layout.death_state) {
    mdp.set_death_state(*layout.death_state);
    if (entry_count[*layout.death_state] == 0.0)
      mdp.set_entry_reward(*layout.death_state, layout.death_reward);
  }
  if (layout.discharge_state) {
    mdp.set_discharge_state(*layout.discharge_state);
    if (entry_count[*layout.discharge_state] == 0.0)
      mdp.set_entry_reward(*layout.discharge_state, layout.discharge_reward);
  }

  double n_episodes = static_cast<double>(trajectories.size());
  for (double& v : initial) v /= n_episodes;
  mdp.set_initial(CategoricalParams(std::move(initial)));
  mdp.validate();
  return mdp;
}

PolicyTable learn_behavior_policy(std::span<const Trajectory> trajectories, std::size_t n_states,
                                  std::size_t n_actions) {
  std::vector<std::vector<double>> counts(n_states, std::vector<double>(n_actions, 0.0));
  for (const auto& traj : trajectories)
    for (const auto& step : traj.steps) counts.at(step.obs).at(step.action) += 1.0;
  std::vector<CategoricalParams> rows;
  rows.reserve(n_states);
  for (auto& c : counts) {
    double total = 0.0;
    for (double v : c) total += v;
    if (total == 0.0) {
      rows.push_back(CategoricalParams::uniform(n_actions));
      continue;
    }
    for (double& v : c) v /= total;
    rows.emplace_back(std::move(c));
  }
  return PolicyTable(std::move(rows));
}

// ---------------------------------------------------------------------------
// Rollouts

namespace {

StateId sample_row(const SparseRow& row, Rng& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  for (const auto& [next, p] : row) {
    cumulative += p;
    if (u < cumulative) return next;
  }
  return row.back().first;
}

Step make_step(StateId s, ActionId a, double reward, std::optional<CategoricalParams> probs) {
  Step step;
  step.state = s;
  step.obs = s;
  step.action = a;
  step.behavior_probs = std::move(probs);
  step.reward = reward;
  return step;
}

}  // namespace

Trajectory simulate(const FiniteMDP& mdp, const PolicyTable& policy, std::size_t horizon,
                    Rng& rng, std::optional<StateId> start, std::string id) {
  if (policy.n_actions() != mdp.n_actions() || policy.n_states() < mdp.n_states())
    throw std::invalid_argument("simulate: policy does not match the mdp");
  StateId s = 0;
  if (start) {
    s = *start;
  } else if (mdp.initial()) {
    s = sample_categorical(mdp.initial()->probs(), rng);
  } else {
    throw std::invalid_argument("simulate: no start state and no initial distribution");
  }
  Trajectory traj;
  traj.id = std::move(id);
  bool absorbed = mdp.is_absorbing(s);
  for (std::size_t t = 0; t < horizon && !absorbed; ++t) {
    const ActionId a = policy.sample(s, rng);
    const StateId next = sample_row(mdp.row(s, a), rng);
    const double r = mdp.reward(s, a) + mdp.entry_reward(next);
    traj.steps.push_back(make_step(s, a, r, policy.row(s)));
    s = next;
    absorbed = mdp.is_absorbing(s);
  }
  traj.final_state = s;
  traj.final_obs = s;
  traj.terminal = mdp.classify(s, absorbed);
  return traj;
}

std::vector<GumbelNoise> abduct_noise(const FiniteMDP& mdp, const Trajectory& observed, Rng& rng) {
  std::vector<GumbelNoise> noise;
  noise.reserve(observed.size());
  for (std::size_t t = 0; t < observed.size(); ++t) {
    const StateId s = observed.obs_at(t);
    const ActionId a = observed.steps[t].action;
    const StateId next = observed.obs_at(t + 1);
    if (s >= mdp.n_states() || next >= mdp.n_states() || a >= mdp.n_actions())
      throw std::invalid_argument("counterfactual_rollout: id out of range in " + observed.id);
    if (!(mdp.probability(s, a, next) > 0.0))
      throw ObservationImpossible("trajectory " + observed.id + " step " + std::to_string(t) +
                                  ": transition " + std::to_string(s) + " -(" +
                                  std::to_string(a) + ")-> " + std::to_string(next) +
                                  " has zero probability under the model");
    noise.push_back(posterior_topdown(mdp.transition(s, a), next, rng));
  }
  return noise;
}

Trajectory counterfactual_rollout(const FiniteMDP& mdp, const Trajectory& observed,
                                  const ActionPlan& plan, std::size_t horizon, Rng& rng) {
  if (observed.steps.empty())
    throw std::invalid_argument("counterfactual_rollout: empty trajectory " + observed.id);
  const std::vector<GumbelNoise> noise = abduct_noise(mdp, observed, rng);

  auto choose = [&](std::size_t t, StateId s) -> ActionId {
    if (const auto it = plan.overrides.find(t); it != plan.overrides.end()) {
      if (it->second >= mdp.n_actions())
        throw std::invalid_argument("counterfactual_rollout: override action out of range");
      return it->second;
    }
    if (plan.policy) return plan.policy->sample(s, rng);
    if (t < observed.size()) return observed.steps[t].action;
    if (plan.fallback) return plan.fallback->sample(s, rng);
    throw std::invalid_argument(
        "counterfactual_rollout: replay ran past the observed episode without a fallback policy");
  };

  Trajectory cf;
  cf.id = observed.id;
  StateId s = observed.obs_at(0);
  bool absorbed = mdp.is_absorbing(s);
  for (std::size_t t = 0; t < horizon && !absorbed; ++t) {
    const ActionId a = choose(t, s);
    const CategoricalParams p = mdp.transition(s, a);
    const StateId next = t < noise.size() ? gumbel_argmax(p, noise[t])
                                          : gumbel_argmax(p, sample_gumbel_noise(p.size(), rng));
    const double r = mdp.reward(s, a) + mdp.entry_reward(next);
    std::optional<CategoricalParams> probs;
    if (plan.policy && !plan.overrides.contains(t)) probs = plan.policy->row(s);
    cf.steps.push_back(make_step(s, a, r, std::move(probs)));
    s = next;
    absorbed = mdp.is_absorbing(s);
  }
  cf.final_state = s;
  cf.final_obs = s;
  cf.terminal = mdp.classify(s, absorbed);
  return cf;
}

Trajectory counterfactual_rollout(const FiniteMDP& mdp, const Trajectory& observed,
                                  const PolicyTable& target, std::size_t horizon, Rng& rng) {
  return counterfactual_rollout(mdp, observed, ActionPlan::follow(target), horizon, rng);
}

std::size_t first_action_divergence(const Trajectory& a, const Trajectory& b) {
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t t = 0; t < n; ++t)
    if (a.steps[t].action != b.steps[t].action) return t;
  return n;
}

}  // namespace gumbelcf
