#include "gumbelcf/categorical.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gumbelcf {

CategoricalParams::CategoricalParams(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw std::invalid_argument("categorical: need at least one category");
  double total = 0.0;
  for (double p : probs_) {
    if (!std::isfinite(p) || p < 0.0)
      throw std::invalid_argument("categorical: entries must be finite and non-negative");
    total += p;
  }
  if (total < 0.999 || total > 1.001)
    throw std::invalid_argument("categorical: probabilities sum to " + std::to_string(total) +
                                ", outside [0.999, 1.001]");
  if (std::abs(total - 1.0) > 1e-12)
    for (double& p : probs_) p /= total;
}

CategoricalParams CategoricalParams::one_hot(std::size_t k, std::size_t index) {
  if (index >= k) throw std::invalid_argument("categorical: one-hot index out of range");
  std::vector<double> probs(k, 0.0);
  probs[index] = 1.0;
  return CategoricalParams(std::move(probs));
}

CategoricalParams CategoricalParams::uniform(std::size_t k) {
  if (k == 0) throw std::invalid_argument("categorical: need at least one category");
  return CategoricalParams(std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

std::size_t CategoricalParams::mode() const {
  return static_cast<std::size_t>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

bool CategoricalParams::is_one_hot() const {
  return std::count(probs_.begin(), probs_.end(), 1.0) == 1;
}

CounterfactualQuery::CounterfactualQuery(CategoricalParams p_obs, CategoricalParams p_cf,
                                         std::size_t observed_index)
    : p_obs_(std::move(p_obs)), p_cf_(std::move(p_cf)), observed_(observed_index) {
  if (p_obs_.size() != p_cf_.size())
    throw std::invalid_argument("counterfactual query: p_obs and p_cf differ in length");
  if (observed_ >= p_obs_.size())
    throw std::invalid_argument("counterfactual query: observed index out of range");
  if (!(p_obs_[observed_] > 0.0))
    throw std::invalid_argument("counterfactual query: observed outcome has zero probability");
}

double total_variation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("total_variation: length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return 0.5 * sum;
}

}  // namespace gumbelcf
