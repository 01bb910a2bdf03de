#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "gumbelcf/mdp.hpp"

namespace gumbelcf {

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Discounted state values of a (possibly stochastic) policy, by a sparse
/// linear solve. Absorbing states have value zero.
std::vector<double> evaluate_policy(const FiniteMDP& mdp, const PolicyTable& policy, double gamma);

/// Q(s, a) = r(s, a) + sum_s' P(s' | s, a) (entry(s') + gamma V(s')), row-major.
std::vector<double> q_values(const FiniteMDP& mdp, const std::vector<double>& values, double gamma);

/// max_s |max_a Q(s, a) - V(s)| over non-absorbing states.
double bellman_residual(const FiniteMDP& mdp, const std::vector<double>& values, double gamma);

struct PolicyIterationResult {
  PolicyTable policy;
  std::vector<double> values;
  std::size_t iterations = 0;
  double residual = 0.0;
};

/// Howard policy iteration with exact evaluation. Actions only change on a
/// strict improvement, so the returned policy is greedy-stable.
PolicyIterationResult policy_iteration(const FiniteMDP& mdp, double gamma = 0.99,
                                       double tol = 1e-8, std::size_t max_iterations = 1000);

}  // namespace gumbelcf
