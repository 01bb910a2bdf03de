// gumbelcf: simulate, learn, evaluate and explore counterfactual off-policy
// evaluation on the sepsis simulator.

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gumbelcf/discrete_scm.hpp"
#include "gumbelcf/io.hpp"
#include "gumbelcf/pipeline.hpp"
#include "gumbelcf/service.hpp"

namespace fs = std::filesystem;
using namespace gumbelcf;

namespace {

enum ExitCode : int { kOk = 0, kIoError = 1, kConfigError = 2, kDataError = 3, kDegenerate = 4 };

struct Overrides {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_train_episodes;
  std::optional<std::size_t> n_eval_episodes;
  std::optional<std::size_t> horizon;
  std::optional<double> epsilon;
  std::optional<std::size_t> n_cf;
  std::optional<std::size_t> n_boot;
  std::optional<std::size_t> n_repeats;
  std::optional<std::string> target;
  std::optional<std::string> dynamics;
  bool full_state = false;
  bool hidden_state = false;
};

void add_config_option(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_file, "JSON file of experiment settings")
      ->check(CLI::ExistingFile);
}

/// Defaults, then the artifacts' experiment.json (if asked), then --config,
/// then explicit flags.
ExperimentConfig resolve(const Overrides& o, const std::optional<fs::path>& experiment) {
  ExperimentConfig c;
  if (experiment) {
    if (!fs::exists(*experiment))
      throw ServiceError("missing artifact " + experiment->string() + "; run simulate first");
    c.merge_json(read_json(*experiment));
  }
  if (!o.config_file.empty()) {
    nlohmann::json j;
    try {
      j = read_json(o.config_file);
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
    c.merge_json(j);
  }
  if (o.seed) c.seed = *o.seed;
  if (o.n_train_episodes) c.n_train_episodes = *o.n_train_episodes;
  if (o.n_eval_episodes) c.n_eval_episodes = *o.n_eval_episodes;
  if (o.horizon) c.horizon = *o.horizon;
  if (o.epsilon) c.epsilon = *o.epsilon;
  if (o.n_cf) c.n_cf = *o.n_cf;
  if (o.n_boot) c.n_boot = *o.n_boot;
  if (o.n_repeats) c.n_repeats = *o.n_repeats;
  if (o.target) c.target = target_from_name(*o.target);
  if (o.dynamics) {
    c.dynamics_path = *o.dynamics;
    c.load_dynamics();
  }
  if (o.full_state && o.hidden_state) throw ConfigError("--full-state and --hidden-state conflict");
  if (o.full_state) c.hidden_state = false;
  if (o.hidden_state) c.hidden_state = true;
  c.validate();
  return c;
}

std::vector<Trajectory> load_trajectories(const fs::path& dir) {
  const fs::path p = dir / artifacts::kTrajectories;
  if (!fs::exists(p)) throw ServiceError("missing artifact " + p.string() + "; run simulate first");
  return read_jsonl(p);
}

void print_reports(const std::vector<OpeReport>& reports) {
  std::printf("%-16s %10s %22s\n", "estimator", "point", "interval");
  for (const auto& r : reports)
    std::printf("%-16s %10.4f   [%8.4f, %8.4f]\n", r.label.c_str(), r.point, r.interval[0],
                r.interval[1]);
}

ExplorerServer* g_server = nullptr;

void handle_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual off-policy evaluation with Gumbel-Max structural causal models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gumbelcf 0.1.0");

  Overrides o;
  std::string artifacts_dir = "artifacts";

  auto* simulate = app.add_subcommand("simulate", "Simulate observed episodes under the behavior policy");
  add_config_option(simulate, o);
  simulate->add_option("--artifacts", artifacts_dir, "Output directory")->capture_default_str();
  simulate->add_option("--seed", o.seed, "Master seed");
  simulate->add_option("--n-train-episodes", o.n_train_episodes, "Number of observed episodes");
  simulate->add_option("--horizon", o.horizon, "Maximum episode length");
  simulate->add_option("--epsilon", o.epsilon, "Behavior policy exploration mass");
  simulate->add_option("--dynamics", o.dynamics, "Simulator dynamics JSON")->check(CLI::ExistingFile);
  simulate->add_flag("--full-state", o.full_state, "Record glucose and diabetes in model states");
  simulate->add_flag("--hidden-state", o.hidden_state, "Hide glucose and diabetes (default)");

  auto* learn = app.add_subcommand("learn", "Fit the MDP and the target policy from episodes");
  add_config_option(learn, o);
  learn->add_option("--artifacts", artifacts_dir, "Artifacts directory")->capture_default_str();

  std::string mode = "bootstrap";
  std::string series_id;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Run the off-policy estimators");
  add_config_option(evaluate_cmd, o);
  evaluate_cmd->add_option("--artifacts", artifacts_dir, "Artifacts directory")->capture_default_str();
  evaluate_cmd->add_option("--target", o.target, "Policy to evaluate")
      ->check(CLI::IsMember({"learned", "behavior"}));
  evaluate_cmd->add_option("--mode", mode, "bootstrap: intervals over one dataset; repeat: "
                                           "spread over independently simulated datasets")
      ->check(CLI::IsMember({"bootstrap", "repeat"}))
      ->capture_default_str();
  evaluate_cmd->add_option("--n-cf", o.n_cf, "Counterfactual draws per episode");
  evaluate_cmd->add_option("--n-boot", o.n_boot, "Bootstrap resamples");
  evaluate_cmd->add_option("--n-repeats", o.n_repeats, "Datasets in repeat mode");
  evaluate_cmd->add_option("--n-eval-episodes", o.n_eval_episodes,
                           "Fresh episodes for the model-based and true estimates");
  evaluate_cmd->add_option("--series", series_id,
                           "Also export observed and counterfactual series of this episode");

  auto* decompose_cmd = app.add_subcommand("decompose", "Tabulate observed vs counterfactual outcomes");
  add_config_option(decompose_cmd, o);
  decompose_cmd->add_option("--artifacts", artifacts_dir, "Artifacts directory")->capture_default_str();
  decompose_cmd->add_option("--target", o.target, "Policy to evaluate")
      ->check(CLI::IsMember({"learned", "behavior"}));
  decompose_cmd->add_option("--n-cf", o.n_cf, "Counterfactual draws per episode");

  std::uint64_t demo_samples = 100000;
  std::uint64_t demo_seed = 0;
  std::string demo_out;
  auto* nonid = app.add_subcommand("nonid-demo",
                                   "Show two SCMs that agree observationally but not counterfactually");
  nonid->add_option("--samples", demo_samples, "Posterior draws for the Gumbel-Max SCM")
      ->capture_default_str();
  nonid->add_option("--seed", demo_seed, "Seed")->capture_default_str();
  nonid->add_option("--out", demo_out, "Also write the JSON report here");

  ServeOptions serve_options;
  std::string ui_dir;
  auto* serve = app.add_subcommand("serve", "Serve artifacts to the trajectory explorer");
  serve->add_option("--artifacts", artifacts_dir, "Artifacts directory")->capture_default_str();
  serve->add_option("--host", serve_options.host, "Bind address")->capture_default_str();
  serve->add_option("--port", serve_options.port, "Port (0 picks a free one)")->capture_default_str();
  serve->add_option("--ui-dir", ui_dir, "Static UI build to serve at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  const fs::path dir = artifacts_dir;
  try {
    if (*simulate) {
      const ExperimentConfig config = resolve(o, std::nullopt);
      fs::create_directories(dir);
      const PolicyTable behavior = build_behavior_policy(config);
      const auto episodes = simulate_observed(config, behavior, config.n_train_episodes, "train");
      write_json(dir / artifacts::kExperiment, config.to_json());
      write_jsonl(dir / artifacts::kTrajectories, episodes);
      std::printf("wrote %zu episodes to %s (mean return %.4f)\n", episodes.size(),
                  (dir / artifacts::kTrajectories).string().c_str(), mean_return(episodes));
    } else if (*learn) {
      const ExperimentConfig config = resolve(o, dir / artifacts::kExperiment);
      const auto episodes = load_trajectories(dir);
      const LearnedModel model = learn_model(config, episodes);
      save_learned(dir, model);
      std::printf("learned a %zu-state model from %zu episodes\n", model.mdp.n_states(),
                  episodes.size());
    } else if (*evaluate_cmd) {
      const ExperimentConfig config = resolve(o, dir / artifacts::kExperiment);
      const PolicyTable behavior = build_behavior_policy(config);
      if (mode == "repeat") {
        const auto reports = evaluate_repeated(config, behavior);
        nlohmann::json reps = nlohmann::json::array();
        for (const auto& r : reports) reps.push_back(r.to_json());
        write_json(dir / artifacts::kSummaryRepeated,
                   {{"schema_version", kSchemaVersion},
                    {"mode", "repeat"},
                    {"target", target_name(config.target)},
                    {"hidden_state", config.hidden_state},
                    {"reports", reps},
                    {"config", config.to_json()}});
        write_text(dir / "ope_repeated.csv", reports_csv(reports));
        print_reports(reports);
        return kOk;
      }
      const auto episodes = load_trajectories(dir);
      const LearnedModel model = load_or_learn(dir, config, episodes);
      const EvaluationResult result = evaluate(config, episodes, model, behavior);
      write_json(dir / artifacts::kSummary, result.summary_json(config));
      write_text(dir / artifacts::kOpeCsv, reports_csv(result.reports));
      if (!series_id.empty()) {
        const auto it = std::find_if(episodes.begin(), episodes.end(),
                                     [&](const Trajectory& t) { return t.id == series_id; });
        if (it == episodes.end()) throw DataError("unknown episode '" + series_id + "'");
        Rng rng(derive_seed(task_seed(config, "cf"), "cf/" + it->id));
        std::vector<Trajectory> draws;
        const ActionPlan plan = counterfactual_plan(config.target, model);
        for (std::size_t k = 0; k < config.n_cf; ++k)
          draws.push_back(counterfactual_rollout(model.mdp, *it, plan, config.horizon, rng));
        write_text(dir / artifacts::kSeriesCsv,
                   trajectory_series_csv(*it, draws, config.model_space()));
      }
      print_reports(result.reports);
      if (result.wis_degenerate)
        throw DegenerateEstimate("every importance weight is zero; WIS is undefined");
    } else if (*decompose_cmd) {
      const ExperimentConfig config = resolve(o, dir / artifacts::kExperiment);
      const auto episodes = load_trajectories(dir);
      const LearnedModel model = load_or_learn(dir, config, episodes);
      const DecompositionMatrix m = decompose_run(config, episodes, model);
      write_json(dir / artifacts::kDecomposition, m.to_json());
      write_text(dir / artifacts::kDecompositionCsv, decomposition_csv(m));
      std::cout << decomposition_csv(m);
    } else if (*nonid) {
      Rng rng(demo_seed);
      const auto report = nonid_demo(demo_samples, rng);
      const auto j = report.to_json();
      if (!demo_out.empty()) write_json(demo_out, j);
      std::cout << j.dump(2) << "\n";
    } else if (*serve) {
      if (!ui_dir.empty()) serve_options.ui_dir = ui_dir;
      ExplorerServer server(ExplorerService::load(dir), serve_options);
      const int port = server.bind();
      g_server = &server;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      std::printf("serving %s on http://%s:%d\n", dir.string().c_str(),
                  serve_options.host.c_str(), port);
      std::fflush(stdout);
      server.listen();
      g_server = nullptr;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const ObservationImpossible& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const DegenerateEstimate& e) {
    std::cerr << "degenerate estimate: " << e.what() << "\n";
    return kDegenerate;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  }
  return kOk;
}
