#include <doctest.h>

#include <cmath>
#include <vector>

#include "gumbelcf/discrete_scm.hpp"
#include "gumbelcf/gumbel.hpp"
#include "oracles.hpp"

using namespace gumbelcf;

TEST_SUITE("discrete_scm") {
  TEST_CASE("ordering must be a permutation") {
    CHECK_THROWS_AS(OrderedInverseCdfScm({0, 0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(OrderedInverseCdfScm({0, 3}), std::invalid_argument);
    CHECK_NOTHROW(OrderedInverseCdfScm({2, 0, 1}));
  }

  TEST_CASE("inverse cdf sampling") {
    const CategoricalParams p({0.25, 0.25, 0.3, 0.2});
    const auto ord = OrderedInverseCdfScm({0, 1, 2, 3});
    CHECK(inverse_cdf_sample(ord, p, 0.3) == 1);
    CHECK(inverse_cdf_sample(ord, p, 0.0) == 0);
    CHECK(inverse_cdf_sample(ord, p, 1.0) == 3);
    const CategoricalParams p_cf({0.0, 0.25, 0.25, 0.5});
    CHECK(inverse_cdf_sample(OrderedInverseCdfScm({0, 1, 3, 2}), p_cf, 0.3) == 3);
    CHECK_THROWS_AS(inverse_cdf_sample(ord, p, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(inverse_cdf_sample(ord, p, 1.1), std::invalid_argument);
  }

  TEST_CASE("inverse cdf reproduces p for any ordering") {
    Rng rng(3);
    const std::vector<double> probs{0.1, 0.0, 0.35, 0.15, 0.4};
    const CategoricalParams p(probs);
    for (const auto& order : std::vector<std::vector<std::size_t>>{
             {0, 1, 2, 3, 4}, {4, 3, 2, 1, 0}, {2, 0, 4, 1, 3}}) {
      const OrderedInverseCdfScm scm(order);
      std::vector<double> freq(5, 0.0);
      const int n = 100000;
      for (int i = 0; i < n; ++i) freq[inverse_cdf_sample(scm, p, rng.uniform())] += 1.0 / n;
      CHECK(oracle::tv(freq, probs) < 0.01);
      CHECK(freq[1] == 0.0);
    }
  }

  TEST_CASE("stability admissibility") {
    const CategoricalParams p({0.25, 0.25, 0.3, 0.2});
    const CategoricalParams p_cf({0.0, 0.25, 0.25, 0.5});
    CHECK(stability_admissible(p, p_cf, 1, 3));
    CHECK_FALSE(stability_admissible(p, p_cf, 1, 2));
    CHECK_FALSE(stability_admissible(p, p_cf, 1, 0));
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j)
        if (i != j) CHECK_FALSE(stability_admissible(p, p, i, j));
    // A category impossible before but possible after has an infinite ratio.
    const CategoricalParams q({0.5, 0.5, 0.0});
    const CategoricalParams q_cf({0.4, 0.3, 0.3});
    CHECK(stability_admissible(q, q_cf, 0, 2));
    CHECK_THROWS_AS(stability_admissible(q, q_cf, 2, 0), std::invalid_argument);
    CHECK_THROWS_AS(stability_admissible(q, q_cf, 0, 0), std::invalid_argument);
  }

  TEST_CASE("monotonicity of the binary mechanism") {
    Rng rng(5);
    const auto r = monotonicity_check({0.7, 0.3}, 100000, rng);
    CHECK(r.forbidden == 0);
    CHECK(r.joint[0][1] == 0);
    CHECK(std::abs(r.frequency(1, 0) - 0.4) < 0.01);

    const auto same = monotonicity_check({0.5, 0.5}, 100000, rng);
    CHECK(same.joint[0][1] == 0);
    CHECK(same.joint[1][0] == 0);

    const auto reverse = monotonicity_check({0.2, 0.6}, 100000, rng);
    CHECK(reverse.forbidden == 0);
    CHECK(reverse.joint[1][0] == 0);
  }

  TEST_CASE("monotone coupling closed form") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
      const BinaryScmSpec spec{rng.uniform(), rng.uniform()};
      const auto joint = monotone_coupling(spec);
      const auto expected = oracle::monotone_joint(spec.p_t1, spec.p_t0);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) CHECK(joint[a][b] == doctest::Approx(expected[a][b]));
      const auto r = monotonicity_check(spec, 100000, rng);
      CHECK(r.forbidden == 0);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) CHECK(std::abs(r.frequency(a, b) - expected[a][b]) < 0.01);
    }
  }

  TEST_CASE("non-identifiability demo") {
    Rng rng(0);
    const auto report = nonid_demo(100000, rng);
    CHECK(report.posterior_interval[0] == 0.25);
    CHECK(report.posterior_interval[1] == 0.5);
    CHECK(NonIdentifiabilityReport::certain_outcome(report.ord_distribution) == 2);
    CHECK(NonIdentifiabilityReport::certain_outcome(report.ord_prime_distribution) == 3);
    for (auto c : report.gumbel_support()) CHECK((c == 1 || c == 3));
    const auto j = report.to_json();
    CHECK(j["ord_outcome"] == 3);
    CHECK(j["ord_prime_outcome"] == 4);
    CHECK(j["gumbel_support"] == nlohmann::json::array({2, 4}));
    CHECK(j["posterior_interval"] == nlohmann::json::array({0.25, 0.5}));
  }

  TEST_CASE("ordered mechanisms agree interventionally but not counterfactually") {
    const CategoricalParams p({0.25, 0.25, 0.3, 0.2});
    const CategoricalParams p_cf({0.0, 0.25, 0.25, 0.5});
    const auto a = OrderedInverseCdfScm({0, 1, 2, 3}).counterfactual_distribution(p, p_cf, 1);
    const auto b = OrderedInverseCdfScm({0, 1, 3, 2}).counterfactual_distribution(p, p_cf, 1);
    CHECK(a == std::vector<double>{0, 0, 1, 0});
    CHECK(b == std::vector<double>{0, 0, 0, 1});
  }
}
