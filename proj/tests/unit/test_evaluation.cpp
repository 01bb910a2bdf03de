#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "fixtures.hpp"
#include "gumbelcf/ope.hpp"
#include "gumbelcf/planning.hpp"
#include "oracles.hpp"

using namespace gumbelcf;

namespace {

PolicyTable stochastic(const std::vector<std::vector<double>>& rows) {
  std::vector<CategoricalParams> out;
  for (const auto& r : rows) out.emplace_back(r);
  return PolicyTable(std::move(out));
}

std::vector<Trajectory> rollouts(const FiniteMDP& mdp, const PolicyTable& pi, std::size_t n,
                                 std::size_t horizon, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Trajectory> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(simulate(mdp, pi, horizon, rng, std::nullopt, "ep-" + std::to_string(i)));
  return out;
}

Trajectory with_terminal(Terminal t) {
  Trajectory out;
  out.terminal = t;
  return out;
}

fixtures::SmallMdp random_mdp(std::size_t n, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  oracle::Tensor P(n, std::vector<oracle::Vec>(k, oracle::Vec(n, 0.0)));
  std::vector<oracle::Vec> r(n, oracle::Vec(k, 0.0));
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t a = 0; a < k; ++a) {
      double total = 0.0;
      for (auto& p : P[s][a]) total += (p = rng.uniform() < 0.4 ? rng.uniform() : 0.0);
      if (total == 0.0) P[s][a][rng.below(n)] = total = 1.0;
      for (auto& p : P[s][a]) p /= total;
      r[s][a] = 2.0 * rng.uniform() - 1.0;
    }
  oracle::Vec entry(n), init(n, 1.0 / n);
  for (auto& e : entry) e = rng.uniform() - 0.5;
  return fixtures::build(P, r, entry, std::vector<bool>(n, false), init);
}

}  // namespace

TEST_SUITE("evaluation") {
  TEST_CASE("policy iteration on a two-state example") {
    // State 0: action 0 earns nothing, action 1 earns 1; both stay put.
    const auto m = fixtures::build({{{1.0, 0.0}, {1.0, 0.0}}, {{0.0, 1.0}, {0.0, 1.0}}},
                                   {{0.0, 1.0}, {0.0, 0.0}}, {0.0, 0.0}, {false, true},
                                   {1.0, 0.0});
    const auto result = policy_iteration(m.mdp, 0.9);
    CHECK(result.policy.probability(0, 1) == 1.0);
    CHECK(std::abs(result.values[0] - 10.0) < 1e-9);
    CHECK(result.values[1] == 0.0);
    CHECK(result.residual < 1e-8);
    CHECK_THROWS_AS(policy_iteration(m.mdp, 0.9, 1e-8, 1), ConvergenceError);
  }

  TEST_CASE("policy iteration with a single action is policy evaluation") {
    const auto m = fixtures::build({{{0.5, 0.5}}, {{0.2, 0.8}}}, {{1.0}, {-1.0}}, {0.0, 0.5},
                                   {false, false}, {1.0, 0.0});
    const auto result = policy_iteration(m.mdp, 0.95);
    const auto expected = oracle::policy_value(m.P, m.r, m.entry, m.absorbing, {{1.0}, {1.0}}, 0.95);
    for (std::size_t s = 0; s < 2; ++s) CHECK(std::abs(result.values[s] - expected[s]) < 1e-8);
  }

  TEST_CASE("policy iteration matches value iteration on random mdps") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto m = random_mdp(10, 3, seed);
      const auto result = policy_iteration(m.mdp, 0.95, 1e-10);
      const auto v = oracle::value_iteration(m.P, m.r, m.entry, m.absorbing, 0.95);
      for (std::size_t s = 0; s < 10; ++s) CHECK(std::abs(result.values[s] - v[s]) < 1e-6);
      CHECK(bellman_residual(m.mdp, result.values, 0.95) < 1e-8);
      const auto pv = evaluate_policy(m.mdp, result.policy, 0.95);
      for (std::size_t s = 0; s < 10; ++s) CHECK(std::abs(pv[s] - v[s]) < 1e-6);
    }
  }

  TEST_CASE("evaluate_policy matches iterative evaluation") {
    const auto m = fixtures::clinic();
    const PolicyTable pi = stochastic({{0.3, 0.7}, {0.6, 0.4}, {1, 0}, {1, 0}});
    const auto v = evaluate_policy(m.mdp, pi, 0.9);
    const auto expected =
        oracle::policy_value(m.P, m.r, m.entry, m.absorbing, fixtures::rows_of(pi), 0.9);
    for (std::size_t s = 0; s < 4; ++s) CHECK(std::abs(v[s] - expected[s]) < 1e-10);
  }

  TEST_CASE("wis with target equal to behavior is the plain average") {
    const auto m = fixtures::clinic();
    const PolicyTable behavior = stochastic({{0.5, 0.5}, {0.5, 0.5}, {1, 0}, {1, 0}});
    const auto data = rollouts(m.mdp, behavior, 500, 10, 3);
    const auto wis = wis_estimate(data, behavior);
    CHECK_FALSE(wis.degenerate);
    CHECK(std::abs(wis.estimate - mean_return(data)) < 1e-12);
    CHECK(std::abs(wis_estimate(data, behavior_probability()).estimate - mean_return(data)) < 1e-12);
  }

  TEST_CASE("wis reports a degenerate estimate when every weight is zero") {
    const auto m = fixtures::clinic();
    const PolicyTable always0 = stochastic({{1, 0}, {1, 0}, {1, 0}, {1, 0}});
    const PolicyTable always1 = stochastic({{0, 1}, {0, 1}, {1, 0}, {1, 0}});
    const auto data = rollouts(m.mdp, always0, 50, 10, 4);
    const auto wis = wis_estimate(data, always1);
    CHECK(wis.degenerate);
  }

  TEST_CASE("wis is invariant to scaling the target probabilities") {
    const auto m = fixtures::clinic();
    const PolicyTable behavior = stochastic({{0.5, 0.5}, {0.5, 0.5}, {1, 0}, {1, 0}});
    const PolicyTable target = stochastic({{0.2, 0.8}, {0.9, 0.1}, {1, 0}, {1, 0}});
    const auto data = rollouts(m.mdp, behavior, 300, 3, 5);
    const StepProbability base = table_probability(target);
    const StepProbability scaled = [&](const Step& s) { return 3.0 * base(s); };
    // Scaling every step by 3 scales each weight by 3^len; equal-length
    // episodes keep their relative weights.
    std::vector<Trajectory> full_length;
    for (const auto& t : data)
      if (t.size() == 3) full_length.push_back(t);
    REQUIRE(full_length.size() > 20);
    CHECK(std::abs(wis_estimate(full_length, base).estimate -
                   wis_estimate(full_length, scaled).estimate) < 1e-12);
  }

  TEST_CASE("wis approaches the exact value of a short problem") {
    const auto m = fixtures::clinic();
    const PolicyTable behavior = stochastic({{0.5, 0.5}, {0.5, 0.5}, {1, 0}, {1, 0}});
    const PolicyTable target = stochastic({{0.2, 0.8}, {0.9, 0.1}, {1, 0}, {1, 0}});
    const auto data = rollouts(m.mdp, behavior, 40000, 2, 6);
    const double exact = oracle::finite_horizon_return(m.P, m.r, m.entry, m.absorbing,
                                                       fixtures::rows_of(target), m.init, 2);
    CHECK(std::abs(wis_estimate(data, target).estimate - exact) < 0.02);
  }

  TEST_CASE("model-based estimate on a deterministic path") {
    const auto m = fixtures::build({{{0, 1, 0}}, {{0, 0, 1}}, {{0, 0, 1}}}, {{0.0}, {0.0}, {0.0}},
                                   {0.0, 0.0, 1.0}, {false, false, true}, {1.0, 0.0, 0.0});
    Rng rng(7);
    const PolicyTable pi = stochastic({{1}, {1}, {1}});
    CHECK(mb_estimate(m.mdp, pi, 100, 20, rng) == 1.0);
    CHECK(mb_estimate(m.mdp, pi, 100, 1, rng) == 0.0);
  }

  TEST_CASE("replaying the observed actions reproduces the observed returns") {
    const auto m = fixtures::clinic();
    const PolicyTable behavior = stochastic({{0.5, 0.5}, {0.5, 0.5}, {1, 0}, {1, 0}});
    const auto data = rollouts(m.mdp, behavior, 400, 10, 8);
    Rng rng(9);
    const auto cf = cf_estimate(m.mdp, data, ActionPlan::replay(&behavior), 5, 10, rng);
    CHECK(cf.estimate == doctest::Approx(mean_return(data)).epsilon(1e-12));
    for (double d : cf.delta) CHECK(d == 0.0);
  }

  TEST_CASE("wis, model-based and counterfactual estimates agree on the true model") {
    const auto m = fixtures::clinic();
    const PolicyTable behavior = stochastic({{0.5, 0.5}, {0.5, 0.5}, {1, 0}, {1, 0}});
    const PolicyTable target = stochastic({{0.1, 0.9}, {0.8, 0.2}, {1, 0}, {1, 0}});
    const std::size_t horizon = 5;
    const double exact = oracle::finite_horizon_return(m.P, m.r, m.entry, m.absorbing,
                                                       fixtures::rows_of(target), m.init, horizon);
    const auto data = rollouts(m.mdp, behavior, 20000, horizon, 10);
    Rng rng(11);
    const double wis = wis_estimate(data, target).estimate;
    const double mb = mb_estimate(m.mdp, target, 20000, horizon, rng);
    const double cf = cf_estimate(m.mdp, data, target, 1, horizon, rng).estimate;
    CHECK(std::abs(wis - exact) < 0.03);
    CHECK(std::abs(mb - exact) < 0.03);
    CHECK(std::abs(cf - exact) < 0.03);
  }

  TEST_CASE("decomposition under replay is diagonal") {
    const auto m = fixtures::clinic();
    const PolicyTable behavior = stochastic({{0.5, 0.5}, {0.5, 0.5}, {1, 0}, {1, 0}});
    const auto data = rollouts(m.mdp, behavior, 500, 4, 12);
    Rng rng(13);
    const auto d = decompose_outcomes(data, m.mdp, ActionPlan::replay(&behavior), 5, 4, rng);
    CHECK(d.total() == 500);
    std::array<std::uint64_t, 3> observed{};
    for (const auto& t : data) ++observed[outcome_index(t.terminal)];
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(d.counts[i][i] == observed[i]);
      CHECK(d.ids[i][i].size() == observed[i]);
      for (std::size_t j = 0; j < 3; ++j)
        if (i != j) CHECK(d.counts[i][j] == 0);
    }
  }

  TEST_CASE("decomposition rows sum to the observed outcome counts") {
    const auto m = fixtures::clinic();
    const PolicyTable behavior = stochastic({{0.5, 0.5}, {0.5, 0.5}, {1, 0}, {1, 0}});
    const PolicyTable target = stochastic({{0, 1}, {1, 0}, {1, 0}, {1, 0}});
    const auto data = rollouts(m.mdp, behavior, 500, 4, 14);
    const auto set = draw_counterfactuals(m.mdp, data, ActionPlan::follow(target), 5, 4, 15);
    const auto d = decompose(set, data);
    std::array<std::uint64_t, 3> observed{};
    for (const auto& t : data) ++observed[outcome_index(t.terminal)];
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(d.counts[i][0] + d.counts[i][1] + d.counts[i][2] == observed[i]);
    const auto j = d.to_json();
    CHECK(j["total"] == 500);
    CHECK(j["cells"].contains("died_discharged"));
  }

  TEST_CASE("modal outcome breaks ties toward died, then no change") {
    using T = Terminal;
    CHECK(modal_outcome(std::vector{with_terminal(T::Died), with_terminal(T::Discharged)}) == T::Died);
    CHECK(modal_outcome(std::vector{with_terminal(T::Censored), with_terminal(T::Discharged)}) ==
          T::Censored);
    CHECK(modal_outcome(std::vector{with_terminal(T::Died), with_terminal(T::Censored),
                                    with_terminal(T::Discharged), with_terminal(T::Discharged)}) ==
          T::Discharged);
  }

  TEST_CASE("quantiles interpolate linearly") {
    const std::vector<double> v{4.0, 1.0, 3.0, 2.0};
    CHECK(quantile(v, 0.0) == 1.0);
    CHECK(quantile(v, 1.0) == 4.0);
    CHECK(std::abs(quantile(v, 0.5) - 2.5) < 1e-15);
    CHECK(std::abs(quantile(v, 1.0 / 3.0) - 2.0) < 1e-12);
    CHECK_THROWS(quantile({}, 0.5));
  }

  TEST_CASE("bootstrap of a constant has zero width") {
    const std::vector<double> v(50, 0.7);
    Rng rng(16);
    const auto ci = bootstrap_mean_interval(v, 100, rng);
    CHECK(std::abs(ci[0] - 0.7) < 1e-12);
    CHECK(std::abs(ci[1] - 0.7) < 1e-12);
  }

  TEST_CASE("bootstrap intervals cover the mean") {
    Rng rng(17);
    int covered = 0;
    const int trials = 300;
    for (int k = 0; k < trials; ++k) {
      std::vector<double> v(100);
      for (auto& x : v) x = rng.uniform();
      const auto ci = bootstrap_mean_interval(v, 200, rng);
      REQUIRE(ci[0] <= ci[1]);
      covered += (ci[0] <= 0.5 && 0.5 <= ci[1]) ? 1 : 0;
    }
    CHECK(covered >= 0.9 * trials);
  }

  TEST_CASE("reports widen their interval to contain the point") {
    const OpeReport r(Estimator::MB, "MB", 5.0, {0.0, 1.0}, 100);
    CHECK(r.interval[0] == 0.0);
    CHECK(r.interval[1] == 5.0);
    const auto j = r.to_json();
    CHECK(j["label"] == "MB");
    CHECK(j["point"] == 5.0);
  }
}
