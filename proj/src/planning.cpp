#include "gumbelcf/planning.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

namespace gumbelcf {

namespace {

void check_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("discount must lie in (0, 1)");
}

}  // namespace

std::vector<double> evaluate_policy(const FiniteMDP& mdp, const PolicyTable& policy,
                                    double gamma) {
  check_gamma(gamma);
  const std::size_t n = mdp.n_states();
  if (policy.n_states() < n || policy.n_actions() != mdp.n_actions())
    throw std::invalid_argument("evaluate_policy: policy does not match the mdp");

  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (StateId s = 0; s < n; ++s) {
    const auto row = static_cast<Eigen::Index>(s);
    triplets.emplace_back(row, row, 1.0);
    if (mdp.is_absorbing(s)) continue;
    double r = 0.0;
    for (ActionId a = 0; a < mdp.n_actions(); ++a) {
      const double pa = policy.probability(s, a);
      if (pa == 0.0) continue;
      r += pa * mdp.reward(s, a);
      for (const auto& [next, p] : mdp.row(s, a)) {
        r += pa * p * mdp.entry_reward(next);
        if (!mdp.is_absorbing(next))
          triplets.emplace_back(row, static_cast<Eigen::Index>(next), -gamma * pa * p);
      }
    }
    rhs[row] = r;
  }
  Eigen::SparseMatrix<double> system(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  system.setFromTriplets(triplets.begin(), triplets.end());
  system.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
  solver.compute(system);
  if (solver.info() != Eigen::Success) throw ConvergenceError("evaluate_policy: factorization failed");
  const Eigen::VectorXd v = solver.solve(rhs);
  if (solver.info() != Eigen::Success) throw ConvergenceError("evaluate_policy: solve failed");
  return {v.data(), v.data() + v.size()};
}

std::vector<double> q_values(const FiniteMDP& mdp, const std::vector<double>& values,
                             double gamma) {
  const std::size_t n_a = mdp.n_actions();
  std::vector<double> q(mdp.n_states() * n_a, 0.0);
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    if (mdp.is_absorbing(s)) continue;
    for (ActionId a = 0; a < n_a; ++a) {
      double total = mdp.reward(s, a);
      for (const auto& [next, p] : mdp.row(s, a))
        total += p * (mdp.entry_reward(next) + (mdp.is_absorbing(next) ? 0.0 : gamma * values[next]));
      q[s * n_a + a] = total;
    }
  }
  return q;
}

double bellman_residual(const FiniteMDP& mdp, const std::vector<double>& values, double gamma) {
  const auto q = q_values(mdp, values, gamma);
  const std::size_t n_a = mdp.n_actions();
  double residual = 0.0;
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    if (mdp.is_absorbing(s)) continue;
    const auto first = q.begin() + static_cast<std::ptrdiff_t>(s * n_a);
    const double best = *std::max_element(first, first + static_cast<std::ptrdiff_t>(n_a));
    residual = std::max(residual, std::abs(best - values[s]));
  }
  return residual;
}

PolicyIterationResult policy_iteration(const FiniteMDP& mdp, double gamma, double tol,
                                       std::size_t max_iterations) {
  check_gamma(gamma);
  const std::size_t n_s = mdp.n_states();
  const std::size_t n_a = mdp.n_actions();
  std::vector<ActionId> actions(n_s, 0);
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    const PolicyTable policy = PolicyTable::deterministic(actions, n_a);
    std::vector<double> values = evaluate_policy(mdp, policy, gamma);
    const auto q = q_values(mdp, values, gamma);
    bool changed = false;
    for (StateId s = 0; s < n_s; ++s) {
      if (mdp.is_absorbing(s)) continue;
      const double* row = q.data() + s * n_a;
      const ActionId best = static_cast<ActionId>(std::max_element(row, row + n_a) - row);
      const double margin = 1e-12 * std::max(1.0, std::abs(row[actions[s]]));
      if (row[best] > row[actions[s]] + margin) {
        actions[s] = best;
        changed = true;
      }
    }
    if (!changed) {
      const double residual = bellman_residual(mdp, values, gamma);
      if (residual >= tol)
        throw ConvergenceError("policy_iteration: stable policy with Bellman residual " +
                               std::to_string(residual));
      return {policy, std::move(values), it, residual};
    }
  }
  throw ConvergenceError("policy_iteration: no convergence within " +
                         std::to_string(max_iterations) + " iterations");
}

}  // namespace gumbelcf
