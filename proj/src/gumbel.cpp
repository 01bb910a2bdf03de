#include "gumbelcf/gumbel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace gumbelcf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace

double gumbel_from_uniform(double u) { return -std::log(-std::log(u)); }

double standard_gumbel(Rng& rng) { return gumbel_from_uniform(rng.uniform_open()); }

GumbelNoise sample_gumbel_noise(std::size_t k, Rng& rng) {
  GumbelNoise g;
  g.values.resize(k);
  for (double& v : g.values) v = standard_gumbel(rng);
  return g;
}

std::size_t gumbel_argmax(std::span<const double> probs, std::span<const double> noise) {
  if (probs.size() != noise.size())
    throw std::invalid_argument("gumbel_argmax: probability and noise lengths differ");
  std::size_t best = probs.size();
  double best_score = kNegInf;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (!(probs[j] > 0.0)) continue;
    const double score = std::log(probs[j]) + noise[j];
    if (best == probs.size() || score > best_score) {
      best = j;
      best_score = score;
    }
  }
  if (best == probs.size())
    throw std::invalid_argument("gumbel_argmax: all probabilities are zero");
  return best;
}

std::size_t gumbel_argmax(const CategoricalParams& p, const GumbelNoise& g) {
  return gumbel_argmax(p.probs(), g.values);
}

double truncated_gumbel_from_uniform(double location, double bound, double u) {
  // x = location - log(exp(-(bound - location)) - log u), evaluated in log space.
  const double tail = std::log(-std::log(u));
  const double x = location - log_add_exp(location - bound, tail);
  return std::min(x, bound);
}

double truncated_gumbel(double location, double bound, Rng& rng) {
  return truncated_gumbel_from_uniform(location, bound, rng.uniform_open());
}

RejectionDraw rejection_draw(const CategoricalParams& p_obs, std::size_t observed, Rng& rng,
                             std::size_t max_attempts) {
  RejectionDraw draw;
  while (draw.attempts < max_attempts) {
    ++draw.attempts;
    draw.noise = sample_gumbel_noise(p_obs.size(), rng);
    if (gumbel_argmax(p_obs, draw.noise) == observed) return draw;
  }
  throw SamplingFailure("posterior_rejection: no accepted sample in " +
                        std::to_string(max_attempts) + " attempts");
}

GumbelNoise posterior_rejection(const CounterfactualQuery& q, Rng& rng, std::size_t max_attempts) {
  return rejection_draw(q.p_obs(), q.observed_index(), rng, max_attempts).noise;
}

GumbelNoise posterior_topdown(const CategoricalParams& p_obs, std::size_t observed, Rng& rng) {
  if (observed >= p_obs.size() || !(p_obs[observed] > 0.0))
    throw std::invalid_argument("posterior_topdown: observed outcome has zero probability");
  const std::size_t k = p_obs.size();
  GumbelNoise g;
  g.values.resize(k);
  // Redraw in the measure-zero event that float rounding of g_j = shifted_j -
  // log p_j flips the observed argmax.
  do {
    const double top = standard_gumbel(rng);
    for (std::size_t j = 0; j < k; ++j) {
      if (j == observed) {
        g.values[j] = top - std::log(p_obs[j]);
      } else if (p_obs[j] > 0.0) {
        const double loc = std::log(p_obs[j]);
        g.values[j] = truncated_gumbel(loc, top, rng) - loc;
      } else {
        g.values[j] = standard_gumbel(rng);
      }
    }
  } while (gumbel_argmax(p_obs, g) != observed);
  return g;
}

GumbelNoise posterior_topdown(const CounterfactualQuery& q, Rng& rng) {
  return posterior_topdown(q.p_obs(), q.observed_index(), rng);
}

GumbelNoise posterior_sample(const CounterfactualQuery& q, Rng& rng, PosteriorMethod method) {
  return method == PosteriorMethod::Rejection ? posterior_rejection(q, rng)
                                              : posterior_topdown(q, rng);
}

std::size_t counterfactual_step(const CounterfactualQuery& q, Rng& rng, PosteriorMethod method) {
  return gumbel_argmax(q.p_cf(), posterior_sample(q, rng, method));
}

}  // namespace gumbelcf
