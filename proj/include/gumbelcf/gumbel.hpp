#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>

#include "gumbelcf/categorical.hpp"
#include "gumbelcf/random.hpp"

namespace gumbelcf {

/// Raised when a bounded sampler exhausts its attempt budget.
class SamplingFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PosteriorMethod { Rejection, TopDown };

inline constexpr std::size_t kDefaultRejectionCap = 1'000'000;

/// -log(-log u) for u in (0, 1).
double gumbel_from_uniform(double u);

double standard_gumbel(Rng& rng);

/// k independent standard-Gumbel draws.
GumbelNoise sample_gumbel_noise(std::size_t k, Rng& rng);

/// argmax_j (log p_j + g_j). Zero-probability categories score -inf and are
/// never selected; ties go to the lowest index. Probabilities may be
/// unnormalized.
std::size_t gumbel_argmax(std::span<const double> probs, std::span<const double> noise);
std::size_t gumbel_argmax(const CategoricalParams& p, const GumbelNoise& g);

/// Inverse-CDF draw from Gumbel(location) conditioned on x <= bound, using the
/// supplied uniform u in (0, 1). An infinite bound gives the untruncated draw.
double truncated_gumbel_from_uniform(double location, double bound, double u);
double truncated_gumbel(double location, double bound, Rng& rng);

struct RejectionDraw {
  GumbelNoise noise;
  std::size_t attempts = 0;
};

/// Posterior noise by rejection from the prior. Throws SamplingFailure after
/// max_attempts rejected proposals.
RejectionDraw rejection_draw(const CategoricalParams& p_obs, std::size_t observed, Rng& rng,
                             std::size_t max_attempts = kDefaultRejectionCap);

GumbelNoise posterior_rejection(const CounterfactualQuery& q, Rng& rng,
                                std::size_t max_attempts = kDefaultRejectionCap);

/// Posterior noise given that category `observed` won under p_obs.
///
/// The maximum shifted value is drawn as a standard Gumbel and assigned to the
/// observed category; every other positive-probability category gets a
/// Gumbel(log p_j) draw truncated at that maximum. Categories with p_j = 0
/// carry no information from the observation and are drawn from the prior.
GumbelNoise posterior_topdown(const CategoricalParams& p_obs, std::size_t observed, Rng& rng);
GumbelNoise posterior_topdown(const CounterfactualQuery& q, Rng& rng);

GumbelNoise posterior_sample(const CounterfactualQuery& q, Rng& rng,
                             PosteriorMethod method = PosteriorMethod::TopDown);

/// Counterfactual outcome: abduct noise under p_obs, then take the argmax
/// under p_cf.
std::size_t counterfactual_step(const CounterfactualQuery& q, Rng& rng,
                                PosteriorMethod method = PosteriorMethod::TopDown);

}  // namespace gumbelcf
