#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "rlsf/core/rng.hpp"

namespace rlsf {

/// Per-(state, action) table; rows are states, columns actions.
using SATable = Eigen::MatrixXd;

/// Explicit finite constrained MDP (P, r, c_gt, gamma, mu, c_max).
///
/// Episodic problems are expressed by absorbing states flagged in `terminal`
/// with zero reward and zero cost. The flags matter only when gamma == 1, where
/// occupancies are computed over the transient (non-terminal) part of the chain.
struct TabularCMDP {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  /// transition[a](s, s') = P(s' | s, a)
  std::vector<Eigen::MatrixXd> transition;
  SATable reward;
  /// Ground-truth binary cost, entries exactly 0 or 1.
  SATable cost_gt;
  Eigen::VectorXd mu;
  double gamma = 0.99;
  double c_max = 0.0;
  std::vector<bool> terminal;

  TabularCMDP() = default;
  TabularCMDP(std::size_t states, std::size_t actions);

  /// Throws ValidationError when any structural invariant is violated.
  void validate() const;

  bool has_terminal() const;
};

/// Row-stochastic policy table pi(a | s).
using PolicyTable = SATable;

/// Throws ValidationError unless every row is a distribution (tolerance 1e-9).
void validate_policy(const TabularCMDP& cmdp, const PolicyTable& policy);

PolicyTable uniform_policy(const TabularCMDP& cmdp);
PolicyTable deterministic_policy(const TabularCMDP& cmdp, const std::vector<int>& action_of_state);

/// P_pi(s, s') = sum_a pi(a|s) P(s'|s,a)
Eigen::MatrixXd policy_transition(const TabularCMDP& cmdp, const PolicyTable& policy);

/// J^f(pi) = E[sum_t gamma^t f(s_t, a_t)], solved exactly through the
/// Bellman evaluation system (I - gamma P_pi) V = f_pi.
double discounted_value(const TabularCMDP& cmdp, const PolicyTable& policy, const SATable& f);

/// rho(s, a) = E[sum_t gamma^t 1[(s_t, a_t) = (s, a)]] from the linear flow
/// system (I - gamma P_pi^T) d = mu. Throws UnsupportedError for gamma == 1
/// on a chain without absorbing states.
SATable occupancy_measure(const TabularCMDP& cmdp, const PolicyTable& policy);

/// Random dense CMDP with Dirichlet-like rows, random rewards and a random
/// binary cost table. Used by property suites and tests.
TabularCMDP random_cmdp(std::size_t n_states, std::size_t n_actions, double gamma, Rng& rng,
                        double unsafe_fraction = 0.3);

/// Random row-stochastic policy; a fraction of rows is made deterministic.
PolicyTable random_policy(const TabularCMDP& cmdp, Rng& rng);

}  // namespace rlsf
