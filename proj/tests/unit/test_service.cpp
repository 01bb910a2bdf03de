#include <doctest.h>

#include <filesystem>
#include <thread>

#include <httplib.h>

#include "gumbelcf/io.hpp"
#include "gumbelcf/pipeline.hpp"
#include "gumbelcf/service.hpp"

using namespace gumbelcf;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Artifacts written the same way the CLI writes them; built once per process.
const fs::path& artifacts_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "gumbelcf_service_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    ExperimentConfig c;
    c.n_train_episodes = 200;
    c.n_eval_episodes = 200;
    c.n_boot = 10;
    const PolicyTable behavior = build_behavior_policy(c);
    const auto train = simulate_observed(c, behavior, c.n_train_episodes, "train");
    write_json(d / artifacts::kExperiment, c.to_json());
    write_jsonl(d / artifacts::kTrajectories, train);
    const LearnedModel model = learn_model(c, train);
    save_learned(d, model);
    const auto result = evaluate(c, train, model, behavior);
    write_json(d / artifacts::kSummary, result.summary_json(c));
    write_json(d / artifacts::kDecomposition, result.decomposition.to_json());
    return d;
  }();
  return dir;
}

const ExplorerService& service() {
  static const ExplorerService svc = ExplorerService::load(artifacts_dir());
  return svc;
}

json steps_shape(const json& trajectory) {
  json out = json::array();
  for (const auto& s : trajectory["steps"]) out.push_back({s["model_state"], s["action"]["id"]});
  out.push_back(trajectory["outcome"]);
  return out;
}

}  // namespace

TEST_SUITE("service") {
  TEST_CASE("summary and decomposition come from the artifacts") {
    const auto s = service().summary();
    CHECK(s.status == 200);
    CHECK(s.body == read_json(artifacts_dir() / artifacts::kSummary));
    const auto d = service().decomposition();
    CHECK(d.status == 200);
    CHECK(d.body["total"] == 200);
  }

  TEST_CASE("trajectory listing and cells") {
    const auto all = service().trajectories(std::nullopt);
    CHECK(all.status == 200);
    CHECK(all.body["count"] == 200);
    const auto decomposition = service().decomposition().body;
    std::size_t total = 0;
    for (const auto& [cell, ids] : decomposition["cells"].items()) {
      const auto r = service().trajectories(cell);
      REQUIRE(r.status == 200);
      CHECK(r.body["ids"] == ids);
      total += r.body["count"].get<std::size_t>();
    }
    CHECK(total == 200);
    CHECK(service().trajectories(std::string("alive_dead")).status == 400);
  }

  TEST_CASE("trajectory detail") {
    const auto r = service().trajectory("ep-0000");
    REQUIRE(r.status == 200);
    const auto& steps = r.body["steps"];
    REQUIRE(steps.size() >= 1);
    CHECK(steps[0]["t"] == 0);
    CHECK(steps[0]["vitals"].contains("heart_rate"));
    CHECK(steps[0]["action"]["id"].get<int>() < 8);
    CHECK(r.body.contains("outcome"));
    CHECK(r.body.contains("levels"));
    CHECK(service().trajectory("ep-9999").status == 404);
  }

  TEST_CASE("counterfactual requests are validated") {
    const auto& svc = service();
    CHECK(svc.counterfactual(json::array()).status == 400);
    CHECK(svc.counterfactual({{"policy", "target"}}).status == 400);
    CHECK(svc.counterfactual({{"trajectory_id", "ep-0000"}, {"policy", "random"}}).status == 400);
    CHECK(svc.counterfactual({{"trajectory_id", "ep-0000"}, {"n_samples", 0}}).status == 400);
    CHECK(svc.counterfactual({{"trajectory_id", "ep-0000"}, {"n_samples", 51}}).status == 400);
    CHECK(svc.counterfactual({{"trajectory_id", "ep-0000"},
                              {"action_overrides", {{{"t", 20}, {"action_id", 0}}}}})
              .status == 400);
    CHECK(svc.counterfactual({{"trajectory_id", "ep-0000"},
                              {"action_overrides", {{{"t", 0}, {"action_id", 8}}}}})
              .status == 400);
    CHECK(svc.counterfactual({{"trajectory_id", "ep-0000"},
                              {"action_overrides",
                               {{{"t", 1}, {"action_id", 0}}, {{"t", 1}, {"action_id", 2}}}}})
              .status == 400);
    CHECK(svc.counterfactual({{"trajectory_id", "nope"}}).status == 404);
  }

  TEST_CASE("counterfactual responses") {
    const auto& svc = service();
    const json request = {{"trajectory_id", "ep-0003"}, {"n_samples", 8}, {"seed", 5}};
    const auto a = svc.counterfactual(request);
    REQUIRE(a.status == 200);
    CHECK(a.body["samples"].size() == 8);
    CHECK(a.body["policy"] == "target");
    const auto& o = a.body["outcomes"];
    CHECK(o["died"].get<int>() + o["no_change"].get<int>() + o["discharged"].get<int>() == 8);
    CHECK(svc.counterfactual(request).body == a.body);
    CHECK(svc.counterfactual({{"trajectory_id", "ep-0003"}, {"n_samples", 8}, {"seed", 6}}).body !=
          a.body);

    const auto replay = svc.counterfactual(
        {{"trajectory_id", "ep-0003"}, {"policy", "behavior"}, {"action_overrides", json::array()}});
    REQUIRE(replay.status == 200);
    const json observed = steps_shape(replay.body["observed"]);
    for (const auto& sample : replay.body["samples"]) CHECK(steps_shape(sample) == observed);
  }

  TEST_CASE("overrides change the action at the given step") {
    const auto& svc = service();
    const auto observed = svc.trajectory("ep-0001").body;
    const int a0 = observed["steps"][0]["action"]["id"];
    const int other = (a0 + 1) % 8;
    const auto r = svc.counterfactual({{"trajectory_id", "ep-0001"},
                                       {"policy", "behavior"},
                                       {"n_samples", 5},
                                       {"action_overrides", {{{"t", 0}, {"action_id", other}}}}});
    REQUIRE(r.status == 200);
    for (const auto& sample : r.body["samples"]) {
      CHECK(sample["steps"][0]["action"]["id"] == other);
      CHECK(sample["divergence_t"] == 0);
    }
  }

  TEST_CASE("missing artifacts") {
    const fs::path empty = fs::temp_directory_path() / "gumbelcf_service_empty";
    fs::remove_all(empty);
    fs::create_directories(empty);
    CHECK_THROWS_AS(ExplorerService::load(empty), ServiceError);
    fs::copy_file(artifacts_dir() / artifacts::kExperiment, empty / artifacts::kExperiment);
    CHECK_THROWS_AS(ExplorerService::load(empty), ServiceError);
    write_text(empty / artifacts::kTrajectories, "");
    CHECK_THROWS_AS(ExplorerService::load(empty), DataError);
  }

  TEST_CASE("http endpoints") {
    ExplorerServer server(ExplorerService::load(artifacts_dir()), ServeOptions{"127.0.0.1", 0, {}});
    const int port = server.bind();
    REQUIRE(port > 0);
    std::thread worker([&] { server.listen(); });

    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(30, 0);
    auto summary = client.Get("/api/summary");
    REQUIRE(summary);
    CHECK(summary->status == 200);
    CHECK(summary->get_header_value("Access-Control-Allow-Origin") == "*");
    CHECK(json::parse(summary->body) == service().summary().body);

    auto listing = client.Get("/api/trajectories?cell=died_discharged");
    REQUIRE(listing);
    CHECK(json::parse(listing->body) == service().trajectories(std::string("died_discharged")).body);

    auto detail = client.Get("/api/trajectories/ep-0002");
    REQUIRE(detail);
    CHECK(json::parse(detail->body) == service().trajectory("ep-0002").body);
    CHECK(client.Get("/api/trajectories/missing")->status == 404);

    const json request = {{"trajectory_id", "ep-0002"}, {"n_samples", 3}, {"seed", 1}};
    auto cf = client.Post("/api/counterfactual", request.dump(), "application/json");
    REQUIRE(cf);
    CHECK(cf->status == 200);
    CHECK(json::parse(cf->body) == service().counterfactual(request).body);
    auto bad = client.Post("/api/counterfactual", "{not json", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);

    // A second server on the same port must fail to start.
    ExplorerServer clash(ExplorerService::load(artifacts_dir()),
                         ServeOptions{"127.0.0.1", port, {}});
    CHECK_THROWS_AS(clash.bind(), ServiceError);

    server.stop();
    worker.join();
  }
}
