#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gumbelcf/mdp.hpp"
#include "gumbelcf/random.hpp"

namespace gumbelcf {

enum class Estimator { Observed, WIS, MB, CF, TrueSimulated };

const char* estimator_name(Estimator e);

struct OpeReport {
  Estimator estimator = Estimator::Observed;
  std::string label;  // e.g. "WIS (held-out)"
  double point = 0.0;
  std::array<double, 2> interval{};
  std::size_t n_bootstrap = 0;

  OpeReport() = default;
  /// The interval is widened if needed so that it contains the point.
  OpeReport(Estimator e, std::string label, double point, std::array<double, 2> interval,
            std::size_t n_bootstrap);

  nlohmann::json to_json() const;
};

/// Mean undiscounted return.
double mean_return(std::span<const Trajectory> trajectories);

/// Probability the evaluated policy assigns to a recorded step.
using StepProbability = std::function<double(const Step&)>;

StepProbability table_probability(const PolicyTable& target);
/// The recorded behavior probabilities themselves (importance weights of one).
StepProbability behavior_probability();

struct WisResult {
  double estimate = 0.0;
  bool degenerate = false;  // every weight was zero
};

/// Per-episode weighted importance sampling: sum_i w_i R_i / sum_i w_i with
/// w_i = prod_t target(a_t | o_t) / behavior(a_t | o_t).
WisResult wis_estimate(std::span<const Trajectory> trajectories, const StepProbability& target);
WisResult wis_estimate(std::span<const Trajectory> trajectories, const PolicyTable& target);

/// Returns of n fresh rollouts in the model.
std::vector<double> mb_returns(const FiniteMDP& model, const PolicyTable& target, std::size_t n,
                               std::size_t horizon, Rng& rng);
double mb_estimate(const FiniteMDP& model, const PolicyTable& target, std::size_t n,
                   std::size_t horizon, Rng& rng);

/// n_cf counterfactual rollouts per observed episode. Episode i draws from a
/// stream derived from (base seed, episode id), so results do not depend on
/// evaluation order.
struct CounterfactualSet {
  std::vector<std::vector<Trajectory>> draws;  // [episode][draw]

  /// Mean counterfactual return of each episode.
  std::vector<double> episode_means() const;
};

CounterfactualSet draw_counterfactuals(const FiniteMDP& model,
                                       std::span<const Trajectory> observed,
                                       const ActionPlan& plan, std::size_t n_cf,
                                       std::size_t horizon, std::uint64_t base_seed);

struct CfEstimate {
  double estimate = 0.0;
  std::vector<double> episode_means;
  /// mean counterfactual return minus observed return, per episode.
  std::vector<double> delta;
  double mean_delta = 0.0;
};

CfEstimate summarize_counterfactuals(const CounterfactualSet& set,
                                     std::span<const Trajectory> observed);

CfEstimate cf_estimate(const FiniteMDP& model, std::span<const Trajectory> observed,
                       const ActionPlan& plan, std::size_t n_cf, std::size_t horizon, Rng& rng);
CfEstimate cf_estimate(const FiniteMDP& model, std::span<const Trajectory> observed,
                       const PolicyTable& target, std::size_t n_cf, std::size_t horizon,
                       Rng& rng);

/// Observed outcome against modal counterfactual outcome.
struct DecompositionMatrix {
  std::array<std::array<std::uint64_t, 3>, 3> counts{};
  std::array<std::array<std::vector<std::string>, 3>, 3> ids;

  std::uint64_t total() const;
  nlohmann::json to_json() const;
};

/// Outcome row/column index: died 0, no change 1, discharged 2.
std::size_t outcome_index(Terminal t);
const char* outcome_label(Terminal t);
Terminal outcome_from_label(const std::string& label);

/// Most frequent outcome; ties resolve toward died, then no change.
Terminal modal_outcome(std::span<const Trajectory> draws);

DecompositionMatrix decompose(const CounterfactualSet& set, std::span<const Trajectory> observed);
DecompositionMatrix decompose_outcomes(std::span<const Trajectory> observed,
                                       const FiniteMDP& model, const ActionPlan& plan,
                                       std::size_t n_cf, std::size_t horizon, Rng& rng);

/// Linear-interpolated empirical quantile of unsorted data, q in [0, 1].
double quantile(std::vector<double> values, double q);

/// Percentile bootstrap: resample items with replacement n_boot times and
/// return the 2.5% and 97.5% quantiles of the statistic.
template <class T>
std::array<double, 2> bootstrap_interval(std::span<const T> items,
                                         const std::function<double(std::span<const T>)>& stat,
                                         std::size_t n_boot, Rng& rng) {
  if (n_boot < 2) throw std::invalid_argument("bootstrap_interval: need n_boot >= 2");
  if (items.empty()) throw std::invalid_argument("bootstrap_interval: no items");
  std::vector<double> replicates;
  replicates.reserve(n_boot);
  std::vector<T> sample;
  sample.reserve(items.size());
  for (std::size_t b = 0; b < n_boot; ++b) {
    sample.clear();
    for (std::size_t i = 0; i < items.size(); ++i) sample.push_back(items[rng.below(items.size())]);
    replicates.push_back(stat(std::span<const T>(sample)));
  }
  return {quantile(replicates, 0.025), quantile(replicates, 0.975)};
}

/// Bootstrap of the mean of a sample of returns.
std::array<double, 2> bootstrap_mean_interval(std::span<const double> values, std::size_t n_boot,
                                              Rng& rng);

}  // namespace gumbelcf
