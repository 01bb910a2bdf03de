#include "gumbelcf/pipeline.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "gumbelcf/io.hpp"
#include "gumbelcf/planning.hpp"

namespace gumbelcf {

namespace fs = std::filesystem;
using nlohmann::json;

const char* target_name(TargetKind t) {
  return t == TargetKind::Learned ? "learned" : "behavior";
}

TargetKind target_from_name(const std::string& name) {
  if (name == "learned") return TargetKind::Learned;
  if (name == "behavior") return TargetKind::Behavior;
  throw ConfigError("target must be 'learned' or 'behavior', got '" + name + "'");
}

sepsis::ModelSpace ExperimentConfig::model_space() const {
  return {hidden_state ? sepsis::ObservationMode::Projected : sepsis::ObservationMode::Full};
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(n_train_episodes >= 1, "n_train_episodes must be at least 1");
  require(n_eval_episodes >= 1, "n_eval_episodes must be at least 1");
  require(horizon >= 1, "horizon must be at least 1");
  require(epsilon >= 0.0 && epsilon < 1.0, "epsilon must lie in [0, 1)");
  require(n_cf >= 1, "n_cf must be at least 1");
  require(n_boot >= 2, "n_boot must be at least 2");
  require(n_repeats >= 2, "n_repeats must be at least 2");
  require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
  try {
    dynamics.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

json ExperimentConfig::to_json() const {
  json j = {{"seed", seed},
            {"n_train_episodes", n_train_episodes},
            {"n_eval_episodes", n_eval_episodes},
            {"horizon", horizon},
            {"epsilon", epsilon},
            {"n_cf", n_cf},
            {"n_boot", n_boot},
            {"n_repeats", n_repeats},
            {"gamma", gamma},
            {"hidden_state", hidden_state},
            {"target", target_name(target)},
            {"dynamics", sepsis::to_json(dynamics)}};
  return j;
}

void ExperimentConfig::merge_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "seed") seed = value.get<std::uint64_t>();
      else if (key == "n_train_episodes") n_train_episodes = value.get<std::size_t>();
      else if (key == "n_eval_episodes") n_eval_episodes = value.get<std::size_t>();
      else if (key == "horizon") horizon = value.get<std::size_t>();
      else if (key == "epsilon") epsilon = value.get<double>();
      else if (key == "n_cf") n_cf = value.get<std::size_t>();
      else if (key == "n_boot") n_boot = value.get<std::size_t>();
      else if (key == "n_repeats") n_repeats = value.get<std::size_t>();
      else if (key == "gamma") gamma = value.get<double>();
      else if (key == "hidden_state") hidden_state = value.get<bool>();
      else if (key == "target") target = target_from_name(value.get<std::string>());
      else if (key == "dynamics") {
        if (value.is_string()) {
          dynamics_path = value.get<std::string>();
          load_dynamics();
        } else {
          dynamics = sepsis::dynamics_from_json(value);
        }
      } else if (key == "schema_version") {
        if (value.get<int>() != kSchemaVersion)
          throw ConfigError("unsupported config schema_version " + value.dump());
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

void ExperimentConfig::load_dynamics() {
  if (dynamics_path.empty()) return;
  try {
    dynamics = sepsis::dynamics_from_json(read_json(dynamics_path));
  } catch (const json::exception& e) {
    throw ConfigError("dynamics file " + dynamics_path + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError("dynamics file " + dynamics_path + ": " + e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

std::uint64_t task_seed(const ExperimentConfig& config, const std::string& label) {
  return derive_seed(config.seed, label);
}

PolicyTable build_behavior_policy(const ExperimentConfig& config) {
  const FiniteMDP true_mdp = sepsis::build_true_mdp(config.dynamics);
  return sepsis::make_behavior_policy(true_mdp, config.epsilon, config.gamma);
}

std::vector<Trajectory> simulate_observed(const ExperimentConfig& config,
                                          const PolicyTable& behavior, std::size_t n,
                                          const std::string& label) {
  sepsis::EpisodeSpec spec{&behavior, sepsis::PolicyInput::FullState, config.model_space(),
                           config.horizon};
  return sepsis::generate_episodes(config.dynamics, spec, n, config.seed, label);
}

LearnedModel learn_model(const ExperimentConfig& config, std::span<const Trajectory> observed) {
  const auto space = config.model_space();
  FiniteMDP mdp = learn_mdp(observed, space.layout());
  PolicyTable target = policy_iteration(mdp, config.gamma).policy;
  PolicyTable empirical = learn_behavior_policy(observed, space.n_states(), sepsis::kNumActions);
  return {std::move(mdp), std::move(target), std::move(empirical)};
}

ActionPlan counterfactual_plan(TargetKind kind, const LearnedModel& model) {
  return kind == TargetKind::Learned ? ActionPlan::follow(model.target)
                                     : ActionPlan::replay(&model.empirical_behavior);
}

TargetView make_target_view(const ExperimentConfig& config, TargetKind kind,
                            const LearnedModel& model, const PolicyTable& behavior) {
  TargetView view;
  view.true_spec.emit = config.model_space();
  view.true_spec.horizon = config.horizon;
  view.cf_plan = counterfactual_plan(kind, model);
  if (kind == TargetKind::Learned) {
    view.wis_probability = table_probability(model.target);
    view.model_policy = &model.target;
    view.true_spec.policy = &model.target;
    view.true_spec.input = sepsis::PolicyInput::ModelState;
  } else {
    view.wis_probability = behavior_probability();
    view.model_policy = &model.empirical_behavior;
    view.true_spec.policy = &behavior;
    view.true_spec.input = sepsis::PolicyInput::FullState;
  }
  return view;
}

namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<double> returns_of(std::span<const Trajectory> trajs) {
  std::vector<double> out;
  out.reserve(trajs.size());
  for (const auto& t : trajs) out.push_back(t.total_reward());
  return out;
}

OpeReport mean_report(Estimator e, std::string label, std::span<const double> values,
                      const ExperimentConfig& config, const std::string& seed_label) {
  Rng rng(task_seed(config, seed_label));
  return {e, std::move(label), mean_of(values),
          bootstrap_mean_interval(values, config.n_boot, rng), config.n_boot};
}

OpeReport wis_report(std::string label, std::span<const Trajectory> trajs,
                     const StepProbability& target, const ExperimentConfig& config,
                     const std::string& seed_label, bool& degenerate) {
  const WisResult point = wis_estimate(trajs, target);
  degenerate = degenerate || point.degenerate;
  Rng rng(task_seed(config, seed_label));
  const std::function<double(std::span<const Trajectory>)> stat =
      [&target](std::span<const Trajectory> sample) { return wis_estimate(sample, target).estimate; };
  return {Estimator::WIS, std::move(label), point.estimate,
          bootstrap_interval(trajs, stat, config.n_boot, rng), config.n_boot};
}

/// Point estimates of one simulate / learn / evaluate pass, without intervals.
struct PointEstimates {
  double observed = 0, wis_train = 0, wis_heldout = 0, mb = 0, cf = 0, truth = 0;
};

std::vector<double> true_returns(const ExperimentConfig& config, const TargetView& view) {
  const auto episodes = sepsis::generate_episodes(config.dynamics, view.true_spec,
                                                  config.n_eval_episodes, config.seed, "true");
  return returns_of(episodes);
}

std::vector<double> model_returns(const ExperimentConfig& config, const LearnedModel& model,
                                  const TargetView& view) {
  Rng rng(task_seed(config, "mb"));
  return mb_returns(model.mdp, *view.model_policy, config.n_eval_episodes, config.horizon, rng);
}

CounterfactualSet cf_draws(const ExperimentConfig& config, std::span<const Trajectory> observed,
                           const LearnedModel& model, const TargetView& view) {
  return draw_counterfactuals(model.mdp, observed, view.cf_plan, config.n_cf, config.horizon,
                              task_seed(config, "cf"));
}

}  // namespace

const OpeReport& EvaluationResult::report(Estimator e, const std::string& label) const {
  for (const auto& r : reports)
    if (r.estimator == e && (label.empty() || r.label == label)) return r;
  throw std::out_of_range(std::string("no report for ") + estimator_name(e));
}

json EvaluationResult::summary_json(const ExperimentConfig& config) const {
  json reps = json::array();
  for (const auto& r : reports) reps.push_back(r.to_json());
  return {{"schema_version", kSchemaVersion},
          {"mode", "bootstrap"},
          {"target", target_name(config.target)},
          {"hidden_state", config.hidden_state},
          {"n_trajectories", cf.episode_means.size()},
          {"reports", reps},
          {"wis_degenerate", wis_degenerate},
          {"cf_mean_delta", cf.mean_delta},
          {"config", config.to_json()}};
}

EvaluationResult evaluate(const ExperimentConfig& config, std::span<const Trajectory> observed,
                          const LearnedModel& model, const PolicyTable& behavior) {
  if (observed.empty()) throw DataError("evaluate: no observed trajectories");
  const TargetView view = make_target_view(config, config.target, model, behavior);
  EvaluationResult out;

  const auto observed_returns = returns_of(observed);
  out.reports.push_back(mean_report(Estimator::Observed, "Observed", observed_returns, config,
                                    "boot/observed"));

  out.reports.push_back(wis_report("WIS (train)", observed, view.wis_probability, config,
                                   "boot/wis_train", out.wis_degenerate));
  const auto heldout = simulate_observed(config, behavior, config.n_train_episodes, "heldout");
  out.reports.push_back(wis_report("WIS (held-out)", heldout, view.wis_probability, config,
                                   "boot/wis_heldout", out.wis_degenerate));

  const auto mb = model_returns(config, model, view);
  out.reports.push_back(mean_report(Estimator::MB, "MB", mb, config, "boot/mb"));

  const CounterfactualSet set = cf_draws(config, observed, model, view);
  out.cf = summarize_counterfactuals(set, observed);
  out.reports.push_back(mean_report(Estimator::CF, "CF", out.cf.episode_means, config, "boot/cf"));
  out.decomposition = decompose(set, observed);

  const auto truth = true_returns(config, view);
  out.reports.push_back(
      mean_report(Estimator::TrueSimulated, "True", truth, config, "boot/true"));
  return out;
}

DecompositionMatrix decompose_run(const ExperimentConfig& config,
                                  std::span<const Trajectory> observed, const LearnedModel& model) {
  return decompose(draw_counterfactuals(model.mdp, observed, counterfactual_plan(config.target, model),
                                        config.n_cf, config.horizon, task_seed(config, "cf")),
                   observed);
}

std::vector<OpeReport> evaluate_repeated(const ExperimentConfig& config,
                                         const PolicyTable& behavior) {
  std::vector<PointEstimates> runs;
  runs.reserve(config.n_repeats);
  for (std::size_t r = 0; r < config.n_repeats; ++r) {
    ExperimentConfig run = config;
    run.seed = task_seed(config, "repeat/" + std::to_string(r));
    const auto train = simulate_observed(run, behavior, run.n_train_episodes, "train");
    const auto heldout = simulate_observed(run, behavior, run.n_train_episodes, "heldout");
    const LearnedModel model = learn_model(run, train);
    const TargetView view = make_target_view(run, run.target, model, behavior);
    PointEstimates p;
    p.observed = mean_return(train);
    p.wis_train = wis_estimate(train, view.wis_probability).estimate;
    p.wis_heldout = wis_estimate(heldout, view.wis_probability).estimate;
    const auto mb = model_returns(run, model, view);
    p.mb = mean_of(mb);
    p.cf = summarize_counterfactuals(cf_draws(run, train, model, view), train).estimate;
    const auto truth = true_returns(run, view);
    p.truth = mean_of(truth);
    runs.push_back(p);
  }
  auto collect = [&](double PointEstimates::*field, Estimator e, const char* label) {
    std::vector<double> v;
    v.reserve(runs.size());
    for (const auto& p : runs) v.push_back(p.*field);
    return OpeReport(e, label, mean_of(v), {quantile(v, 0.025), quantile(v, 0.975)},
                     config.n_repeats);
  };
  return {collect(&PointEstimates::observed, Estimator::Observed, "Observed"),
          collect(&PointEstimates::wis_train, Estimator::WIS, "WIS (train)"),
          collect(&PointEstimates::wis_heldout, Estimator::WIS, "WIS (held-out)"),
          collect(&PointEstimates::mb, Estimator::MB, "MB"),
          collect(&PointEstimates::cf, Estimator::CF, "CF"),
          collect(&PointEstimates::truth, Estimator::TrueSimulated, "True")};
}

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace

std::string reports_csv(const std::vector<OpeReport>& reports) {
  std::string out = "estimator,label,point,lower,upper,n_bootstrap\n";
  for (const auto& r : reports) {
    out += std::string(estimator_name(r.estimator)) + "," + r.label + "," + fmt(r.point) + "," +
           fmt(r.interval[0]) + "," + fmt(r.interval[1]) + "," + std::to_string(r.n_bootstrap) +
           "\n";
  }
  return out;
}

std::string decomposition_csv(const DecompositionMatrix& m) {
  constexpr std::array<Terminal, 3> order{Terminal::Died, Terminal::Censored, Terminal::Discharged};
  std::string out = "observed,counterfactual,count\n";
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c)
      out += std::string(outcome_label(order[r])) + "," + outcome_label(order[c]) + "," +
             std::to_string(m.counts[r][c]) + "\n";
  return out;
}

std::string trajectory_series_csv(const Trajectory& observed,
                                  const std::vector<Trajectory>& counterfactuals,
                                  const sepsis::ModelSpace& space) {
  std::string out =
      "episode,source,t,model_state,heart_rate,blood_pressure,oxygen,antibiotics,vasopressors,"
      "ventilation,action,reward\n";
  auto emit = [&](const Trajectory& t, const std::string& source) {
    for (std::size_t i = 0; i <= t.size(); ++i) {
      const StateId id = t.obs_at(i);
      out += observed.id + "," + source + "," + std::to_string(i) + "," + std::to_string(id) + ",";
      if (const auto s = sepsis::decode_model_state(space, id)) {
        out += std::to_string(s->heart_rate) + "," + std::to_string(s->blood_pressure) + "," +
               std::to_string(s->oxygen) + "," + std::to_string(int(s->on_antibiotics)) + "," +
               std::to_string(int(s->on_vasopressors)) + "," +
               std::to_string(int(s->on_ventilation)) + ",";
      } else {
        out += id == space.death() ? "died,,,,," : "discharged,,,,,";
      }
      if (i < t.size())
        out += std::to_string(t.steps[i].action) + "," + fmt(t.steps[i].reward);
      else
        out += ",";
      out += "\n";
    }
  };
  emit(observed, "observed");
  for (std::size_t k = 0; k < counterfactuals.size(); ++k)
    emit(counterfactuals[k], "cf-" + std::to_string(k));
  return out;
}

void save_learned(const fs::path& dir, const LearnedModel& model) {
  write_json(dir / artifacts::kLearnedMdp, to_json(model.mdp));
  write_json(dir / artifacts::kTargetPolicy, to_json(model.target));
  write_json(dir / artifacts::kBehaviorPolicy, to_json(model.empirical_behavior));
}

LearnedModel load_or_learn(const fs::path& dir, const ExperimentConfig& config,
                           std::span<const Trajectory> observed) {
  const auto mdp_path = dir / artifacts::kLearnedMdp;
  const auto target_path = dir / artifacts::kTargetPolicy;
  const auto behavior_path = dir / artifacts::kBehaviorPolicy;
  if (fs::exists(mdp_path) && fs::exists(target_path) && fs::exists(behavior_path)) {
    LearnedModel m{mdp_from_json(read_json(mdp_path)), policy_from_json(read_json(target_path)),
                   policy_from_json(read_json(behavior_path))};
    if (m.mdp.n_states() != config.model_space().n_states())
      throw DataError("learned model does not match the configured state space");
    return m;
  }
  return learn_model(config, observed);
}

}  // namespace gumbelcf
