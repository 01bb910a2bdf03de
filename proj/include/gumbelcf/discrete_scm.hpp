#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "gumbelcf/categorical.hpp"
#include "gumbelcf/random.hpp"

namespace gumbelcf {

/// Categorical mechanism that lays the categories out on [0, 1] in a fixed
/// order and returns the interval a single uniform falls into.
class OrderedInverseCdfScm {
 public:
  explicit OrderedInverseCdfScm(std::vector<std::size_t> order);
  static OrderedInverseCdfScm identity(std::size_t k);

  const std::vector<std::size_t>& order() const { return order_; }
  std::size_t size() const { return order_.size(); }

  /// Half-open interval [lo, hi) of u mapped to `category` under p.
  std::array<double, 2> interval(const CategoricalParams& p, std::size_t category) const;

  /// Exact counterfactual distribution: the posterior over u given the
  /// observed category is uniform on its interval, pushed through p_cf.
  std::vector<double> counterfactual_distribution(const CategoricalParams& p,
                                                  const CategoricalParams& p_cf,
                                                  std::size_t observed) const;

 private:
  std::vector<std::size_t> order_;
};

/// Category whose interval contains u; the last interval is closed at 1.
std::size_t inverse_cdf_sample(const OrderedInverseCdfScm& scm, const CategoricalParams& p,
                               double u);

/// Whether a counterfactual move from i to j is allowed: p'_i/p_i < p'_j/p_j.
/// p_j = 0 with p'_j > 0 counts as an infinite ratio; p'_j = 0 is never
/// admissible. Throws if p_i = 0 or i == j.
bool stability_admissible(const CategoricalParams& p, const CategoricalParams& p_cf,
                          std::size_t i, std::size_t j);

struct BinaryScmSpec {
  double p_t1 = 0.5;  // P(Y=1 | do(T=1))
  double p_t0 = 0.5;  // P(Y=1 | do(T=0))
};

struct MonotonicityReport {
  std::uint64_t n_samples = 0;
  std::uint64_t forbidden = 0;
  /// joint[y1][y0] counts of (Y_{do(T=1)}, Y_{do(T=0)}).
  std::array<std::array<std::uint64_t, 2>, 2> joint{};

  double frequency(int y1, int y0) const {
    return static_cast<double>(joint[y1][y0]) / static_cast<double>(n_samples);
  }
};

/// Joint law of (Y_1, Y_0) under the monotone coupling with the given margins.
std::array<std::array<double, 2>, 2> monotone_coupling(const BinaryScmSpec& spec);

MonotonicityReport monotonicity_check(const BinaryScmSpec& spec, std::uint64_t n_samples,
                                      Rng& rng);

struct NonIdentifiabilityReport {
  std::array<double, 2> posterior_interval{};
  std::vector<double> ord_distribution;
  std::vector<double> ord_prime_distribution;
  std::vector<double> gumbel_frequencies;
  std::uint64_t gumbel_samples = 0;

  /// Category reached with probability one, if any.
  static std::ptrdiff_t certain_outcome(const std::vector<double>& dist);
  std::vector<std::size_t> gumbel_support() const;

  /// Labels are rendered 1-based.
  nlohmann::json to_json() const;
};

/// Four-category example where two orderings agree interventionally but
/// disagree counterfactually, contrasted with the Gumbel-Max mechanism.
NonIdentifiabilityReport nonid_demo(std::uint64_t gumbel_samples, Rng& rng);

}  // namespace gumbelcf
