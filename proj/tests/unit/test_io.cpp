#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "gumbelcf/io.hpp"

using namespace gumbelcf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "gumbelcf_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

Trajectory sample_trajectory() {
  Trajectory t;
  t.id = "ep-0001";
  Step s;
  s.state = 17;
  s.obs = 5;
  s.action = 3;
  s.behavior_probs = CategoricalParams({0.25, 0.25, 0.25, 0.25});
  s.reward = 0.0;
  t.steps.push_back(s);
  s.action = 1;
  s.reward = -1.0;
  t.steps.push_back(s);
  t.final_state = 1440;
  t.final_obs = 144;
  t.terminal = Terminal::Died;
  return t;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("trajectory round trip") {
    const Trajectory t = sample_trajectory();
    const auto j = to_json(t);
    CHECK(j["steps"][0]["s"] == 17);
    CHECK(j["steps"][0]["o"] == 5);
    CHECK(j["terminal"] == "died");
    const Trajectory back = trajectory_from_json(j);
    CHECK(back.id == t.id);
    CHECK(back.size() == 2);
    CHECK(back.steps[1].reward == -1.0);
    CHECK(back.final_obs == 144);
    CHECK(back.terminal == Terminal::Died);
    CHECK(to_json(back) == j);
  }

  TEST_CASE("jsonl files") {
    const std::vector<Trajectory> ts{sample_trajectory(), sample_trajectory()};
    const auto path = scratch("episodes.jsonl");
    write_jsonl(path, ts);
    std::ifstream in(path);
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 2);
    const auto back = read_jsonl(path);
    CHECK(back.size() == 2);
    CHECK(to_jsonl(back) == to_jsonl(ts));
  }

  TEST_CASE("malformed input raises data errors") {
    CHECK_THROWS_AS(trajectory_from_json(nlohmann::json::parse(R"({"id": "x"})")), DataError);
    CHECK_THROWS_AS(
        trajectory_from_json(nlohmann::json::parse(
            R"({"id":"x","steps":[{"s":0,"a":0,"r":0,"bprobs":[0.5,0.7]}],"final":{"s":1},"terminal":"died"})")),
        DataError);
    CHECK_THROWS_AS(
        trajectory_from_json(nlohmann::json::parse(
            R"({"id":"x","steps":[],"final":{"s":1},"terminal":"asleep"})")),
        DataError);
    const auto path = scratch("broken.jsonl");
    std::ofstream(path) << "{\"id\": \n";
    CHECK_THROWS_AS(read_jsonl(path), DataError);
    CHECK_THROWS_AS(read_json(scratch("does-not-exist.json")), DataError);
    CHECK_THROWS_AS(mdp_from_json(nlohmann::json::parse(R"({"n_states": 2})")), DataError);
  }

  TEST_CASE("mdp round trip, sparse and dense") {
    const auto clinic = fixtures::clinic();
    const auto j = to_json(clinic.mdp);
    CHECK(j["schema_version"] == kSchemaVersion);
    CHECK(j["transition_format"] == "sparse");
    const FiniteMDP back = mdp_from_json(j);
    CHECK(to_json(back) == j);
    CHECK(back.death_state() == clinic.mdp.death_state());
    CHECK(back.is_absorbing(3));

    nlohmann::json dense = j;
    dense["transition_format"] = "dense";
    dense["transition"] = nlohmann::json::array();
    for (std::size_t s = 0; s < 4; ++s) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t a = 0; a < 2; ++a) row.push_back(clinic.P[s][a]);
      dense["transition"].push_back(row);
    }
    CHECK(to_json(mdp_from_json(dense)) == j);
  }

  TEST_CASE("policy round trip") {
    const PolicyTable pi({CategoricalParams({0.1, 0.9}), CategoricalParams({1.0, 0.0})});
    const auto j = to_json(pi);
    CHECK(j["kind"] == "stochastic");
    CHECK(to_json(policy_from_json(j)) == j);
  }

  TEST_CASE("json files end with a newline") {
    const auto path = scratch("x.json");
    write_json(path, {{"a", 1}});
    std::ifstream in(path);
    const std::string text((std::istreambuf_iterator<char>(in)), {});
    CHECK(text.back() == '\n');
    CHECK(read_json(path)["a"] == 1);
  }
}
