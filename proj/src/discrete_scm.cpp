#include "gumbelcf/discrete_scm.hpp"

#include <algorithm>
#include <stdexcept>

#include "gumbelcf/gumbel.hpp"

namespace gumbelcf {

OrderedInverseCdfScm::OrderedInverseCdfScm(std::vector<std::size_t> order)
    : order_(std::move(order)) {
  std::vector<bool> seen(order_.size(), false);
  for (std::size_t c : order_) {
    if (c >= order_.size() || seen[c])
      throw std::invalid_argument("ordered scm: order is not a permutation");
    seen[c] = true;
  }
  if (order_.empty()) throw std::invalid_argument("ordered scm: empty order");
}

OrderedInverseCdfScm OrderedInverseCdfScm::identity(std::size_t k) {
  std::vector<std::size_t> order(k);
  for (std::size_t i = 0; i < k; ++i) order[i] = i;
  return OrderedInverseCdfScm(std::move(order));
}

std::array<double, 2> OrderedInverseCdfScm::interval(const CategoricalParams& p,
                                                     std::size_t category) const {
  if (p.size() != size()) throw std::invalid_argument("ordered scm: size mismatch");
  double lo = 0.0;
  for (std::size_t m = 0; m < order_.size(); ++m) {
    const double hi = m + 1 == order_.size() ? 1.0 : lo + p[order_[m]];
    if (order_[m] == category) return {lo, hi};
    lo = hi;
  }
  throw std::invalid_argument("ordered scm: category out of range");
}

std::vector<double> OrderedInverseCdfScm::counterfactual_distribution(
    const CategoricalParams& p, const CategoricalParams& p_cf, std::size_t observed) const {
  const auto [lo, hi] = interval(p, observed);
  if (!(hi > lo)) throw std::invalid_argument("ordered scm: observed category has zero mass");
  std::vector<double> dist(size(), 0.0);
  for (std::size_t c = 0; c < size(); ++c) {
    const auto [clo, chi] = interval(p_cf, c);
    const double overlap = std::min(hi, chi) - std::max(lo, clo);
    if (overlap > 0.0) dist[c] = overlap / (hi - lo);
  }
  return dist;
}

std::size_t inverse_cdf_sample(const OrderedInverseCdfScm& scm, const CategoricalParams& p,
                               double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw std::invalid_argument("inverse_cdf_sample: u outside [0, 1]");
  if (p.size() != scm.size()) throw std::invalid_argument("inverse_cdf_sample: size mismatch");
  const auto& order = scm.order();
  double cumulative = 0.0;
  for (std::size_t m = 0; m + 1 < order.size(); ++m) {
    cumulative += p[order[m]];
    if (u < cumulative) return order[m];
  }
  return order.back();
}

bool stability_admissible(const CategoricalParams& p, const CategoricalParams& p_cf,
                          std::size_t i, std::size_t j) {
  if (p.size() != p_cf.size() || i >= p.size() || j >= p.size())
    throw std::invalid_argument("stability_admissible: index or size mismatch");
  if (i == j) throw std::invalid_argument("stability_admissible: requires i != j");
  if (!(p[i] > 0.0)) throw std::invalid_argument("stability_admissible: p_i must be positive");
  if (!(p_cf[j] > 0.0)) return false;
  if (!(p[j] > 0.0)) return true;
  return p_cf[i] / p[i] < p_cf[j] / p[j];
}

std::array<std::array<double, 2>, 2> monotone_coupling(const BinaryScmSpec& spec) {
  const double hi = std::max(spec.p_t1, spec.p_t0);
  const double lo = std::min(spec.p_t1, spec.p_t0);
  std::array<std::array<double, 2>, 2> joint{};
  joint[1][1] = lo;
  joint[0][0] = 1.0 - hi;
  if (spec.p_t1 >= spec.p_t0) {
    joint[1][0] = hi - lo;
  } else {
    joint[0][1] = hi - lo;
  }
  return joint;
}

MonotonicityReport monotonicity_check(const BinaryScmSpec& spec, std::uint64_t n_samples,
                                      Rng& rng) {
  if (n_samples == 0) throw std::invalid_argument("monotonicity_check: need n_samples >= 1");
  const auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(spec.p_t1) || !in_unit(spec.p_t0))
    throw std::invalid_argument("monotonicity_check: probabilities must lie in [0, 1]");
  const CategoricalParams treated({1.0 - spec.p_t1, spec.p_t1});
  const CategoricalParams control({1.0 - spec.p_t0, spec.p_t0});
  MonotonicityReport report;
  report.n_samples = n_samples;
  for (std::uint64_t n = 0; n < n_samples; ++n) {
    const GumbelNoise g = sample_gumbel_noise(2, rng);
    const auto y1 = gumbel_argmax(treated, g);
    const auto y0 = gumbel_argmax(control, g);
    ++report.joint[y1][y0];
    const bool forbidden = spec.p_t1 >= spec.p_t0 ? (y1 == 0 && y0 == 1) : (y1 == 1 && y0 == 0);
    if (forbidden) ++report.forbidden;
  }
  return report;
}

std::ptrdiff_t NonIdentifiabilityReport::certain_outcome(const std::vector<double>& dist) {
  for (std::size_t c = 0; c < dist.size(); ++c)
    if (dist[c] == 1.0) return static_cast<std::ptrdiff_t>(c);
  return -1;
}

std::vector<std::size_t> NonIdentifiabilityReport::gumbel_support() const {
  std::vector<std::size_t> support;
  for (std::size_t c = 0; c < gumbel_frequencies.size(); ++c)
    if (gumbel_frequencies[c] > 0.0) support.push_back(c);
  return support;
}

nlohmann::json NonIdentifiabilityReport::to_json() const {
  auto one_based = [](const std::vector<double>& dist) {
    nlohmann::json out = nlohmann::json::object();
    for (std::size_t c = 0; c < dist.size(); ++c) out[std::to_string(c + 1)] = dist[c];
    return out;
  };
  auto outcome = [](const std::vector<double>& dist) -> nlohmann::json {
    const auto c = certain_outcome(dist);
    return c < 0 ? nlohmann::json(nullptr) : nlohmann::json(c + 1);
  };
  nlohmann::json support = nlohmann::json::array();
  for (std::size_t c : gumbel_support()) support.push_back(c + 1);
  return {
      {"schema_version", 1},
      {"indexing", "1-based"},
      {"posterior_interval", {posterior_interval[0], posterior_interval[1]}},
      {"ord_outcome", outcome(ord_distribution)},
      {"ord_prime_outcome", outcome(ord_prime_distribution)},
      {"ord_distribution", one_based(ord_distribution)},
      {"ord_prime_distribution", one_based(ord_prime_distribution)},
      {"gumbel_support", support},
      {"gumbel_frequencies", one_based(gumbel_frequencies)},
      {"gumbel_samples", gumbel_samples},
  };
}

NonIdentifiabilityReport nonid_demo(std::uint64_t gumbel_samples, Rng& rng) {
  const CategoricalParams p({0.25, 0.25, 0.3, 0.2});
  const CategoricalParams p_cf({0.0, 0.25, 0.25, 0.5});
  constexpr std::size_t observed = 1;
  const auto ord = OrderedInverseCdfScm::identity(4);
  const OrderedInverseCdfScm ord_prime({0, 1, 3, 2});

  NonIdentifiabilityReport report;
  report.posterior_interval = ord.interval(p, observed);
  report.ord_distribution = ord.counterfactual_distribution(p, p_cf, observed);
  report.ord_prime_distribution = ord_prime.counterfactual_distribution(p, p_cf, observed);
  report.gumbel_samples = gumbel_samples;
  report.gumbel_frequencies.assign(4, 0.0);
  const CounterfactualQuery query(p, p_cf, observed);
  for (std::uint64_t n = 0; n < gumbel_samples; ++n)
    report.gumbel_frequencies[counterfactual_step(query, rng)] += 1.0;
  if (gumbel_samples > 0)
    for (double& f : report.gumbel_frequencies) f /= static_cast<double>(gumbel_samples);
  return report;
}

}  // namespace gumbelcf
