#include "gumbelcf/service.hpp"

#include <array>

#include <httplib.h>

#include "gumbelcf/io.hpp"
#include "gumbelcf/sepsis.hpp"

namespace gumbelcf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Response = ExplorerService::Response;

Response error(int status, const std::string& message) {
  return {status, {{"schema_version", kSchemaVersion}, {"error", message}}};
}

json levels_legend() {
  return {{"heart_rate", {"low", "normal", "high"}},
          {"blood_pressure", {"low", "normal", "high"}},
          {"oxygen", {"low", "normal"}},
          {"glucose", {"very_low", "low", "normal", "high", "very_high"}}};
}

json vitals_json(const sepsis::PatientState& s, bool with_glucose) {
  json j = {{"heart_rate", s.heart_rate},
            {"blood_pressure", s.blood_pressure},
            {"oxygen", s.oxygen},
            {"glucose", nullptr},
            {"diabetic", nullptr}};
  if (with_glucose) {
    j["glucose"] = s.glucose;
    j["diabetic"] = s.diabetic;
  }
  return j;
}

json treatments_json(const sepsis::PatientState& s) {
  return {{"antibiotics", s.on_antibiotics},
          {"vasopressors", s.on_vasopressors},
          {"ventilation", s.on_ventilation}};
}

json action_json(ActionId a) {
  const auto act = sepsis::SepsisAction::from_id(a);
  return {{"id", a},
          {"antibiotics", act.antibiotics},
          {"vasopressors", act.vasopressors},
          {"ventilation", act.ventilation}};
}

/// Decoded state at one time step. Observed episodes carry full simulator ids
/// in `state`; counterfactual episodes only have model ids.
json state_json(const sepsis::ModelSpace& space, StateId state, StateId model_state,
                bool ground_truth) {
  json j = {{"state_id", state}, {"model_state", model_state}};
  std::optional<sepsis::PatientState> decoded;
  bool with_glucose = space.mode == sepsis::ObservationMode::Full;
  if (ground_truth && state < sepsis::kNumFullStates) {
    decoded = sepsis::from_full_index(state);
    with_glucose = true;
  } else {
    decoded = sepsis::decode_model_state(space, model_state);
  }
  if (decoded) {
    j["vitals"] = vitals_json(*decoded, with_glucose);
    j["treatments"] = treatments_json(*decoded);
  } else {
    j["vitals"] = nullptr;
    j["treatments"] = nullptr;
  }
  return j;
}

json trajectory_json(const Trajectory& t, const sepsis::ModelSpace& space, bool ground_truth) {
  json steps = json::array();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const Step& step = t.steps[i];
    json j = state_json(space, step.state, step.obs, ground_truth);
    j["t"] = i;
    j["action"] = action_json(step.action);
    j["reward"] = step.reward;
    steps.push_back(std::move(j));
  }
  json final_state = state_json(space, t.final_state, t.final_obs, ground_truth);
  final_state["t"] = t.size();
  return {{"id", t.id},
          {"steps", steps},
          {"final", final_state},
          {"terminal", terminal_name(t.terminal)},
          {"outcome", outcome_label(t.terminal)},
          {"total_reward", t.total_reward()}};
}

template <class T>
T field(const json& body, const char* key, T fallback) {
  if (!body.contains(key) || body[key].is_null()) return fallback;
  return body[key].get<T>();
}

}  // namespace

ExplorerService ExplorerService::load(const fs::path& dir) {
  const fs::path experiment = dir / artifacts::kExperiment;
  const fs::path trajectories = dir / artifacts::kTrajectories;
  for (const auto& p : {experiment, trajectories})
    if (!fs::exists(p)) throw ServiceError("missing artifact " + p.string());

  ExplorerService svc;
  svc.config_.merge_json(read_json(experiment));
  svc.trajectories_ = read_jsonl(trajectories);
  if (svc.trajectories_.empty()) throw DataError("no trajectories in " + trajectories.string());
  for (std::size_t i = 0; i < svc.trajectories_.size(); ++i)
    if (!svc.by_id_.emplace(svc.trajectories_[i].id, i).second)
      throw DataError("duplicate trajectory id " + svc.trajectories_[i].id);
  svc.model_ = std::make_shared<const LearnedModel>(load_or_learn(dir, svc.config_, svc.trajectories_));

  if (fs::exists(dir / artifacts::kSummary)) svc.summary_ = read_json(dir / artifacts::kSummary);
  if (fs::exists(dir / artifacts::kDecomposition))
    svc.decomposition_ = read_json(dir / artifacts::kDecomposition);
  else
    svc.decomposition_ = decompose_run(svc.config_, svc.trajectories_, *svc.model_).to_json();
  return svc;
}

Response ExplorerService::summary() const {
  if (!summary_) return error(404, "summary.json not found; run the evaluate command first");
  return {200, *summary_};
}

Response ExplorerService::decomposition() const { return {200, decomposition_}; }

Response ExplorerService::trajectories(const std::optional<std::string>& cell) const {
  json ids = json::array();
  if (cell) {
    const auto& cells = decomposition_.at("cells");
    if (!cells.contains(*cell)) return error(400, "unknown decomposition cell '" + *cell + "'");
    ids = cells.at(*cell);
  } else {
    for (const auto& t : trajectories_) ids.push_back(t.id);
  }
  json out = {{"schema_version", kSchemaVersion}, {"ids", ids}, {"count", ids.size()}};
  if (cell) out["cell"] = *cell;
  return {200, out};
}

Response ExplorerService::trajectory(const std::string& id) const {
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) return error(404, "unknown trajectory '" + id + "'");
  json out = trajectory_json(trajectories_[it->second], config_.model_space(), true);
  out["schema_version"] = kSchemaVersion;
  out["levels"] = levels_legend();
  return {200, out};
}

Response ExplorerService::counterfactual(const json& request) const {
  if (!request.is_object()) return error(400, "request body must be a JSON object");
  std::string id;
  std::string policy;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  ActionPlan plan;
  try {
    if (!request.contains("trajectory_id")) return error(400, "trajectory_id is required");
    id = request.at("trajectory_id").get<std::string>();
    policy = field<std::string>(request, "policy", "target");
    if (policy == "learned") policy = "target";
    n_samples = field<std::size_t>(request, "n_samples", config_.n_cf);
    seed = field<std::uint64_t>(request, "seed", 0);
    if (policy != "target" && policy != "behavior")
      return error(400, "policy must be 'target' or 'behavior'");
    if (n_samples < 1 || n_samples > kMaxSamples)
      return error(400, "n_samples must lie in [1, " + std::to_string(kMaxSamples) + "]");
    plan = counterfactual_plan(
        policy == "target" ? TargetKind::Learned : TargetKind::Behavior, *model_);
    if (request.contains("action_overrides")) {
      for (const auto& o : request.at("action_overrides")) {
        const auto t = o.at("t").get<std::size_t>();
        const auto a = o.at("action_id").get<ActionId>();
        if (t >= config_.horizon) return error(400, "override time step out of range");
        if (a >= sepsis::kNumActions) return error(400, "override action_id out of range");
        if (!plan.overrides.emplace(t, a).second)
          return error(400, "duplicate override for t=" + std::to_string(t));
      }
    }
  } catch (const json::exception& e) {
    return error(400, std::string("malformed request: ") + e.what());
  }

  const auto it = by_id_.find(id);
  if (it == by_id_.end()) return error(404, "unknown trajectory '" + id + "'");
  const Trajectory& observed = trajectories_[it->second];
  const auto space = config_.model_space();

  Rng rng(derive_seed(seed, "counterfactual/" + id));
  json samples = json::array();
  std::array<std::size_t, 3> tally{};
  double total = 0.0;
  try {
    for (std::size_t k = 0; k < n_samples; ++k) {
      const Trajectory cf = counterfactual_rollout(model_->mdp, observed, plan, config_.horizon, rng);
      json j = trajectory_json(cf, space, false);
      j["index"] = k;
      j["divergence_t"] = first_action_divergence(observed, cf);
      samples.push_back(std::move(j));
      ++tally[outcome_index(cf.terminal)];
      total += cf.total_reward();
    }
  } catch (const ObservationImpossible& e) {
    return error(422, e.what());
  }

  json overrides = json::array();
  for (const auto& [t, a] : plan.overrides) overrides.push_back({{"t", t}, {"action_id", a}});
  json observed_json = trajectory_json(observed, space, true);
  return {200,
          {{"schema_version", kSchemaVersion},
           {"trajectory_id", id},
           {"policy", policy},
           {"seed", seed},
           {"n_samples", n_samples},
           {"action_overrides", overrides},
           {"observed", observed_json},
           {"samples", samples},
           {"outcomes",
            {{"died", tally[0]}, {"no_change", tally[1]}, {"discharged", tally[2]}}},
           {"mean_return", total / static_cast<double>(n_samples)},
           {"levels", levels_legend()}}};
}

struct ExplorerServer::Impl {
  Impl(ExplorerService s, ServeOptions o) : service(std::move(s)), options(std::move(o)) {}
  ExplorerService service;
  ServeOptions options;
  httplib::Server server;
  bool bound = false;
};

namespace {

void reply(httplib::Response& res, const Response& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

}  // namespace

ExplorerServer::ExplorerServer(ExplorerService service, ServeOptions options)
    : impl_(std::make_unique<Impl>(std::move(service), std::move(options))) {
  auto& svr = impl_->server;
  const ExplorerService& svc = impl_->service;
  // SO_REUSEADDR only: SO_REUSEPORT would let a second server share a busy port.
  svr.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  svr.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  svr.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });
  svr.Get("/api/summary", [&svc](const httplib::Request&, httplib::Response& res) {
    reply(res, svc.summary());
  });
  svr.Get("/api/decomposition", [&svc](const httplib::Request&, httplib::Response& res) {
    reply(res, svc.decomposition());
  });
  svr.Get("/api/trajectories", [&svc](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> cell;
    if (req.has_param("cell")) cell = req.get_param_value("cell");
    reply(res, svc.trajectories(cell));
  });
  svr.Get(R"(/api/trajectories/([^/]+))",
          [&svc](const httplib::Request& req, httplib::Response& res) {
            reply(res, svc.trajectory(req.matches[1]));
          });
  svr.Post("/api/counterfactual", [&svc](const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded()) return reply(res, error(400, "request body is not valid JSON"));
    reply(res, svc.counterfactual(body));
  });
  svr.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "internal error";
        try {
          std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          what = e.what();
        } catch (...) {
        }
        reply(res, error(500, what));
      });
  if (!impl_->options.ui_dir.empty()) {
    if (!fs::is_directory(impl_->options.ui_dir))
      throw ServiceError("ui directory not found: " + impl_->options.ui_dir.string());
    svr.set_mount_point("/", impl_->options.ui_dir.string());
  }
}

ExplorerServer::~ExplorerServer() { stop(); }

int ExplorerServer::bind() {
  auto& o = impl_->options;
  if (o.port == 0) {
    const int port = impl_->server.bind_to_any_port(o.host);
    if (port < 0) throw ServiceError("could not bind " + o.host);
    o.port = port;
  } else if (!impl_->server.bind_to_port(o.host, o.port)) {
    throw ServiceError("port " + std::to_string(o.port) + " on " + o.host + " is already in use");
  }
  impl_->bound = true;
  return o.port;
}

void ExplorerServer::listen() {
  if (!impl_->bound) bind();
  impl_->server.listen_after_bind();
}

void ExplorerServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace gumbelcf
