#include "gumbelcf/ope.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gumbelcf {

const char* estimator_name(Estimator e) {
  switch (e) {
    case Estimator::Observed:
      return "Observed";
    case Estimator::WIS:
      return "WIS";
    case Estimator::MB:
      return "MB";
    case Estimator::CF:
      return "CF";
    case Estimator::TrueSimulated:
      return "True";
  }
  return "Observed";
}

OpeReport::OpeReport(Estimator e, std::string label_, double point_,
                     std::array<double, 2> interval_, std::size_t n_bootstrap_)
    : estimator(e),
      label(std::move(label_)),
      point(point_),
      interval({std::min(interval_[0], point_), std::max(interval_[1], point_)}),
      n_bootstrap(n_bootstrap_) {}

nlohmann::json OpeReport::to_json() const {
  return {{"estimator", estimator_name(estimator)},
          {"label", label},
          {"point", point},
          {"interval", {interval[0], interval[1]}},
          {"n_bootstrap", n_bootstrap}};
}

double mean_return(std::span<const Trajectory> trajectories) {
  if (trajectories.empty()) throw std::invalid_argument("mean_return: no trajectories");
  double total = 0.0;
  for (const auto& t : trajectories) total += t.total_reward();
  return total / static_cast<double>(trajectories.size());
}

StepProbability table_probability(const PolicyTable& target) {
  return [&target](const Step& step) { return target.probability(step.obs, step.action); };
}

StepProbability behavior_probability() {
  return [](const Step& step) {
    if (!step.behavior_probs) throw std::invalid_argument("step has no behavior probabilities");
    return (*step.behavior_probs)[step.action];
  };
}

WisResult wis_estimate(std::span<const Trajectory> trajectories, const StepProbability& target) {
  if (trajectories.empty()) throw std::invalid_argument("wis_estimate: no trajectories");
  double weighted = 0.0;
  double total_weight = 0.0;
  for (const auto& traj : trajectories) {
    double w = 1.0;
    for (const auto& step : traj.steps) {
      if (!step.behavior_probs)
        throw std::invalid_argument("wis_estimate: trajectory " + traj.id +
                                    " is missing behavior probabilities");
      const double b = (*step.behavior_probs)[step.action];
      if (!(b > 0.0))
        throw std::invalid_argument("wis_estimate: trajectory " + traj.id +
                                    " took an action with zero behavior probability");
      w *= target(step) / b;
    }
    weighted += w * traj.total_reward();
    total_weight += w;
  }
  if (total_weight == 0.0) return {0.0, true};
  return {weighted / total_weight, false};
}

WisResult wis_estimate(std::span<const Trajectory> trajectories, const PolicyTable& target) {
  return wis_estimate(trajectories, table_probability(target));
}

std::vector<double> mb_returns(const FiniteMDP& model, const PolicyTable& target, std::size_t n,
                               std::size_t horizon, Rng& rng) {
  if (n == 0) throw std::invalid_argument("mb_estimate: need n >= 1");
  std::vector<double> returns;
  returns.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    returns.push_back(simulate(model, target, horizon, rng).total_reward());
  return returns;
}

double mb_estimate(const FiniteMDP& model, const PolicyTable& target, std::size_t n,
                   std::size_t horizon, Rng& rng) {
  const auto returns = mb_returns(model, target, n, horizon, rng);
  return std::accumulate(returns.begin(), returns.end(), 0.0) / static_cast<double>(n);
}

std::vector<double> CounterfactualSet::episode_means() const {
  std::vector<double> means;
  means.reserve(draws.size());
  for (const auto& episode : draws) {
    double total = 0.0;
    for (const auto& cf : episode) total += cf.total_reward();
    means.push_back(total / static_cast<double>(episode.size()));
  }
  return means;
}

CounterfactualSet draw_counterfactuals(const FiniteMDP& model,
                                       std::span<const Trajectory> observed,
                                       const ActionPlan& plan, std::size_t n_cf,
                                       std::size_t horizon, std::uint64_t base_seed) {
  if (n_cf == 0) throw std::invalid_argument("counterfactuals: need n_cf >= 1");
  CounterfactualSet set;
  set.draws.reserve(observed.size());
  for (const auto& traj : observed) {
    Rng rng(derive_seed(base_seed, "cf/" + traj.id));
    std::vector<Trajectory> episode;
    episode.reserve(n_cf);
    for (std::size_t k = 0; k < n_cf; ++k)
      episode.push_back(counterfactual_rollout(model, traj, plan, horizon, rng));
    set.draws.push_back(std::move(episode));
  }
  return set;
}

CfEstimate summarize_counterfactuals(const CounterfactualSet& set,
                                     std::span<const Trajectory> observed) {
  if (set.draws.size() != observed.size() || observed.empty())
    throw std::invalid_argument("cf_estimate: counterfactual set does not match the episodes");
  CfEstimate out;
  out.episode_means = set.episode_means();
  out.delta.reserve(observed.size());
  for (std::size_t i = 0; i < observed.size(); ++i)
    out.delta.push_back(out.episode_means[i] - observed[i].total_reward());
  const double n = static_cast<double>(observed.size());
  out.estimate = std::accumulate(out.episode_means.begin(), out.episode_means.end(), 0.0) / n;
  out.mean_delta = std::accumulate(out.delta.begin(), out.delta.end(), 0.0) / n;
  return out;
}

CfEstimate cf_estimate(const FiniteMDP& model, std::span<const Trajectory> observed,
                       const ActionPlan& plan, std::size_t n_cf, std::size_t horizon, Rng& rng) {
  const auto set = draw_counterfactuals(model, observed, plan, n_cf, horizon, rng());
  return summarize_counterfactuals(set, observed);
}

CfEstimate cf_estimate(const FiniteMDP& model, std::span<const Trajectory> observed,
                       const PolicyTable& target, std::size_t n_cf, std::size_t horizon,
                       Rng& rng) {
  return cf_estimate(model, observed, ActionPlan::follow(target), n_cf, horizon, rng);
}

std::size_t outcome_index(Terminal t) {
  switch (t) {
    case Terminal::Died:
      return 0;
    case Terminal::Censored:
      return 1;
    case Terminal::Discharged:
      return 2;
  }
  return 1;
}

const char* outcome_label(Terminal t) {
  switch (t) {
    case Terminal::Died:
      return "died";
    case Terminal::Censored:
      return "no_change";
    case Terminal::Discharged:
      return "discharged";
  }
  return "no_change";
}

Terminal outcome_from_label(const std::string& label) {
  if (label == "died") return Terminal::Died;
  if (label == "no_change") return Terminal::Censored;
  if (label == "discharged") return Terminal::Discharged;
  throw std::invalid_argument("unknown outcome label '" + label + "'");
}

Terminal modal_outcome(std::span<const Trajectory> draws) {
  if (draws.empty()) throw std::invalid_argument("modal_outcome: no draws");
  std::array<std::size_t, 3> tally{};
  for (const auto& d : draws) ++tally[outcome_index(d.terminal)];
  constexpr std::array<Terminal, 3> order{Terminal::Died, Terminal::Censored,
                                          Terminal::Discharged};
  std::size_t best = 0;
  for (std::size_t i = 1; i < 3; ++i)
    if (tally[i] > tally[best]) best = i;
  return order[best];
}

std::uint64_t DecompositionMatrix::total() const {
  std::uint64_t sum = 0;
  for (const auto& row : counts)
    for (auto c : row) sum += c;
  return sum;
}

nlohmann::json DecompositionMatrix::to_json() const {
  constexpr std::array<Terminal, 3> order{Terminal::Died, Terminal::Censored,
                                          Terminal::Discharged};
  nlohmann::json labels = nlohmann::json::array();
  for (auto t : order) labels.push_back(outcome_label(t));
  nlohmann::json grid = nlohmann::json::array();
  nlohmann::json cells = nlohmann::json::object();
  for (std::size_t r = 0; r < 3; ++r) {
    grid.push_back(counts[r]);
    for (std::size_t c = 0; c < 3; ++c)
      cells[std::string(outcome_label(order[r])) + "_" + outcome_label(order[c])] = ids[r][c];
  }
  return {{"schema_version", 1},
          {"rows", "observed"},
          {"columns", "counterfactual"},
          {"labels", labels},
          {"counts", grid},
          {"total", total()},
          {"cells", cells}};
}

DecompositionMatrix decompose(const CounterfactualSet& set, std::span<const Trajectory> observed) {
  if (set.draws.size() != observed.size())
    throw std::invalid_argument("decompose: counterfactual set does not match the episodes");
  DecompositionMatrix m;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const std::size_t r = outcome_index(observed[i].terminal);
    const std::size_t c = outcome_index(modal_outcome(set.draws[i]));
    ++m.counts[r][c];
    m.ids[r][c].push_back(observed[i].id);
  }
  return m;
}

DecompositionMatrix decompose_outcomes(std::span<const Trajectory> observed,
                                       const FiniteMDP& model, const ActionPlan& plan,
                                       std::size_t n_cf, std::size_t horizon, Rng& rng) {
  return decompose(draw_counterfactuals(model, observed, plan, n_cf, horizon, rng()), observed);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: no values");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::array<double, 2> bootstrap_mean_interval(std::span<const double> values, std::size_t n_boot,
                                              Rng& rng) {
  const std::function<double(std::span<const double>)> mean = [](std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  return bootstrap_interval(values, mean, n_boot, rng);
}

}  // namespace gumbelcf
