#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gumbelcf {

/// Probability vector over k >= 1 categories.
///
/// Construction checks that entries are finite and non-negative and that the
/// total lies in [0.999, 1.001]; the stored vector is then renormalized so it
/// sums to one within 1e-9.
class CategoricalParams {
 public:
  explicit CategoricalParams(std::vector<double> probs);

  static CategoricalParams one_hot(std::size_t k, std::size_t index);
  static CategoricalParams uniform(std::size_t k);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const { return probs_; }

  /// Index of the largest entry (lowest index on ties).
  std::size_t mode() const;
  bool is_one_hot() const;

  friend bool operator==(const CategoricalParams&, const CategoricalParams&) = default;

 private:
  std::vector<double> probs_;
};

/// One draw of exogenous standard-Gumbel noise for a k-way mechanism.
struct GumbelNoise {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

/// Observed outcome under one intervention and the alternative intervention
/// whose outcome is queried.
class CounterfactualQuery {
 public:
  CounterfactualQuery(CategoricalParams p_obs, CategoricalParams p_cf,
                      std::size_t observed_index);

  const CategoricalParams& p_obs() const { return p_obs_; }
  const CategoricalParams& p_cf() const { return p_cf_; }
  std::size_t observed_index() const { return observed_; }

 private:
  CategoricalParams p_obs_;
  CategoricalParams p_cf_;
  std::size_t observed_;
};

/// Total-variation distance between two distributions of equal length.
double total_variation(std::span<const double> a, std::span<const double> b);

}  // namespace gumbelcf
