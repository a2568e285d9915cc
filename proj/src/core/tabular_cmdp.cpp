#include "rlsf/core/tabular_cmdp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rlsf/core/errors.hpp"

namespace rlsf {
namespace {

constexpr double kStochasticTol = 1e-12;
constexpr double kPolicyTol = 1e-9;

// Indices of states that take part in the linear systems. For gamma < 1 that is
// every state; for gamma == 1 only the transient ones.
std::vector<Eigen::Index> active_states(const TabularCMDP& cmdp) {
  std::vector<Eigen::Index> idx;
  const bool restrict = cmdp.gamma >= 1.0;
  for (std::size_t s = 0; s < cmdp.n_states; ++s) {
    if (restrict && cmdp.terminal[s]) continue;
    idx.push_back(static_cast<Eigen::Index>(s));
  }
  return idx;
}

void require_solvable_discount(const TabularCMDP& cmdp) {
  if (cmdp.gamma >= 1.0 && !cmdp.has_terminal()) {
    throw UnsupportedError("gamma = 1 requires an episodic MDP with absorbing terminal states");
  }
}

}  // namespace

TabularCMDP::TabularCMDP(std::size_t states, std::size_t actions)
    : n_states(states),
      n_actions(actions),
      transition(actions, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(states), static_cast<Eigen::Index>(states))),
      reward(SATable::Zero(static_cast<Eigen::Index>(states), static_cast<Eigen::Index>(actions))),
      cost_gt(SATable::Zero(static_cast<Eigen::Index>(states), static_cast<Eigen::Index>(actions))),
      mu(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(states))),
      terminal(states, false) {}

bool TabularCMDP::has_terminal() const {
  for (bool t : terminal) {
    if (t) return true;
  }
  return false;
}

void TabularCMDP::validate() const {
  const auto ns = static_cast<Eigen::Index>(n_states);
  const auto na = static_cast<Eigen::Index>(n_actions);
  if (n_states == 0 || n_actions == 0) throw ValidationError("CMDP needs at least one state and one action");
  if (transition.size() != n_actions) throw ValidationError("transition tensor must have one matrix per action");
  if (reward.rows() != ns || reward.cols() != na) throw ValidationError("reward table has wrong shape");
  if (cost_gt.rows() != ns || cost_gt.cols() != na) throw ValidationError("cost table has wrong shape");
  if (mu.size() != ns) throw ValidationError("initial distribution has wrong size");
  if (terminal.size() != n_states) throw ValidationError("terminal flags have wrong size");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("gamma must lie in [0, 1]");
  if (!(c_max >= 0.0)) throw ValidationError("c_max must be >= 0");
  for (std::size_t a = 0; a < n_actions; ++a) {
    const auto& P = transition[a];
    if (P.rows() != ns || P.cols() != ns) throw ValidationError("transition matrix has wrong shape");
    if ((P.array() < 0.0).any()) throw ValidationError("negative transition probability");
    for (Eigen::Index s = 0; s < ns; ++s) {
      if (std::abs(P.row(s).sum() - 1.0) > kStochasticTol) {
        throw ValidationError("transition row (s=" + std::to_string(s) + ", a=" + std::to_string(a) +
                              ") does not sum to 1");
      }
    }
  }
  if ((mu.array() < 0.0).any() || std::abs(mu.sum() - 1.0) > kStochasticTol) {
    throw ValidationError("initial distribution must be non-negative and sum to 1");
  }
  for (Eigen::Index s = 0; s < ns; ++s) {
    for (Eigen::Index a = 0; a < na; ++a) {
      const double c = cost_gt(s, a);
      if (c != 0.0 && c != 1.0) throw ValidationError("ground-truth cost entries must be exactly 0 or 1");
      if (!std::isfinite(reward(s, a))) throw ValidationError("non-finite reward");
    }
  }
}

void validate_policy(const TabularCMDP& cmdp, const PolicyTable& policy) {
  if (policy.rows() != static_cast<Eigen::Index>(cmdp.n_states) ||
      policy.cols() != static_cast<Eigen::Index>(cmdp.n_actions)) {
    throw ValidationError("policy table has wrong shape");
  }
  for (Eigen::Index s = 0; s < policy.rows(); ++s) {
    if ((policy.row(s).array() < -kPolicyTol).any() || std::abs(policy.row(s).sum() - 1.0) > kPolicyTol) {
      throw ValidationError("policy row " + std::to_string(s) + " is not a distribution");
    }
  }
}

PolicyTable uniform_policy(const TabularCMDP& cmdp) {
  return PolicyTable::Constant(static_cast<Eigen::Index>(cmdp.n_states), static_cast<Eigen::Index>(cmdp.n_actions),
                               1.0 / static_cast<double>(cmdp.n_actions));
}

PolicyTable deterministic_policy(const TabularCMDP& cmdp, const std::vector<int>& action_of_state) {
  if (action_of_state.size() != cmdp.n_states) throw ValidationError("one action per state required");
  PolicyTable pi = PolicyTable::Zero(static_cast<Eigen::Index>(cmdp.n_states), static_cast<Eigen::Index>(cmdp.n_actions));
  for (std::size_t s = 0; s < cmdp.n_states; ++s) {
    const int a = action_of_state[s];
    if (a < 0 || static_cast<std::size_t>(a) >= cmdp.n_actions) throw ValidationError("action index out of range");
    pi(static_cast<Eigen::Index>(s), a) = 1.0;
  }
  return pi;
}

Eigen::MatrixXd policy_transition(const TabularCMDP& cmdp, const PolicyTable& policy) {
  const auto ns = static_cast<Eigen::Index>(cmdp.n_states);
  Eigen::MatrixXd Ppi = Eigen::MatrixXd::Zero(ns, ns);
  for (std::size_t a = 0; a < cmdp.n_actions; ++a) {
    Ppi.noalias() += policy.col(static_cast<Eigen::Index>(a)).asDiagonal() * cmdp.transition[a];
  }
  return Ppi;
}

double discounted_value(const TabularCMDP& cmdp, const PolicyTable& policy, const SATable& f) {
  validate_policy(cmdp, policy);
  if (f.rows() != policy.rows() || f.cols() != policy.cols()) throw ValidationError("function table has wrong shape");
  require_solvable_discount(cmdp);

  const auto idx = active_states(cmdp);
  const auto m = static_cast<Eigen::Index>(idx.size());
  const Eigen::MatrixXd Ppi = policy_transition(cmdp, policy);
  const Eigen::VectorXd fpi = policy.cwiseProduct(f).rowwise().sum();

  Eigen::MatrixXd A(m, m);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    b(i) = fpi(idx[i]);
    for (Eigen::Index j = 0; j < m; ++j) A(i, j) = (i == j ? 1.0 : 0.0) - cmdp.gamma * Ppi(idx[i], idx[j]);
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible()) throw UnsupportedError("policy does not terminate; value is unbounded at gamma = 1");
  const Eigen::VectorXd V = lu.solve(b);

  double J = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) J += cmdp.mu(idx[i]) * V(i);
  return J;
}

SATable occupancy_measure(const TabularCMDP& cmdp, const PolicyTable& policy) {
  validate_policy(cmdp, policy);
  require_solvable_discount(cmdp);

  const auto idx = active_states(cmdp);
  const auto m = static_cast<Eigen::Index>(idx.size());
  const Eigen::MatrixXd Ppi = policy_transition(cmdp, policy);

  // (I - gamma P_pi^T) d = mu
  Eigen::MatrixXd A(m, m);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    b(i) = cmdp.mu(idx[i]);
    for (Eigen::Index j = 0; j < m; ++j) A(i, j) = (i == j ? 1.0 : 0.0) - cmdp.gamma * Ppi(idx[j], idx[i]);
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible()) throw UnsupportedError("policy does not terminate; occupancy is unbounded at gamma = 1");
  const Eigen::VectorXd d = lu.solve(b);

  SATable rho = SATable::Zero(policy.rows(), policy.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    // Round-off can leave tiny negatives; occupancy is non-negative by construction.
    rho.row(idx[i]) = std::max(d(i), 0.0) * policy.row(idx[i]);
  }
  return rho;
}

TabularCMDP random_cmdp(std::size_t n_states, std::size_t n_actions, double gamma, Rng& rng, double unsafe_fraction) {
  TabularCMDP m(n_states, n_actions);
  m.gamma = gamma;
  const auto ns = static_cast<Eigen::Index>(n_states);
  for (std::size_t a = 0; a < n_actions; ++a) {
    for (Eigen::Index s = 0; s < ns; ++s) {
      double total = 0.0;
      for (Eigen::Index t = 0; t < ns; ++t) {
        // Exponential draws give a flat Dirichlet; zero out some to get sparsity.
        double w = -std::log(1.0 - uniform01(rng));
        if (uniform01(rng) < 0.3) w = 0.0;
        m.transition[a](s, t) = w;
        total += w;
      }
      if (total == 0.0) {
        m.transition[a](s, static_cast<Eigen::Index>(rng() % n_states)) = 1.0;
      } else {
        m.transition[a].row(s) /= total;
      }
    }
  }
  for (Eigen::Index s = 0; s < ns; ++s) {
    const bool unsafe = uniform01(rng) < unsafe_fraction;
    for (Eigen::Index a = 0; a < static_cast<Eigen::Index>(n_actions); ++a) {
      m.reward(s, a) = 2.0 * uniform01(rng) - 1.0;
      m.cost_gt(s, a) = unsafe ? 1.0 : 0.0;
    }
  }
  double total = 0.0;
  for (Eigen::Index s = 0; s < ns; ++s) {
    m.mu(s) = uniform01(rng);
    total += m.mu(s);
  }
  m.mu /= total;
  return m;
}

PolicyTable random_policy(const TabularCMDP& cmdp, Rng& rng) {
  const auto ns = static_cast<Eigen::Index>(cmdp.n_states);
  const auto na = static_cast<Eigen::Index>(cmdp.n_actions);
  PolicyTable pi(ns, na);
  for (Eigen::Index s = 0; s < ns; ++s) {
    if (uniform01(rng) < 0.25) {
      pi.row(s).setZero();
      pi(s, static_cast<Eigen::Index>(rng() % cmdp.n_actions)) = 1.0;
      continue;
    }
    double total = 0.0;
    for (Eigen::Index a = 0; a < na; ++a) {
      pi(s, a) = -std::log(1.0 - uniform01(rng));
      total += pi(s, a);
    }
    pi.row(s) /= total;
  }
  return pi;
}

}  // namespace rlsf
