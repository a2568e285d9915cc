#pragma once

#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlsf/nn/adam.hpp"
#include "rlsf/trainer/policy.hpp"
#include "rlsf/trainer/rollout.hpp"

namespace rlsf::trainer {

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// Generalized advantage estimation for one episode. `values` has one entry
/// per step; `bootstrap` is V(s_T) (0 for terminal endings).
GaeResult gae(std::span<const double> rewards, std::span<const double> values, double bootstrap, double gamma,
              double lambda);

struct PpoConfig {
  int epochs = 160;
  /// 0 or >= batch means full-batch steps.
  int minibatch = 0;
  double lr_policy = 1e-4;
  double lr_critic = 1e-4;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  double entropy_coef = 0.0;
  bool normalize_advantages = true;

  void validate() const;
};

/// Projected dual ascent on the cost constraint.
struct LagrangeState {
  double lambda = 0.0;
  double lr = 0.01;

  /// lambda <- max(0, lambda + lr (episode_cost - c_max)). Returns the new value.
  double update(double episode_cost, double c_max);
};

struct ActorCritic {
  Policy policy;
  Critic reward_critic;
  Critic cost_critic;
  nn::Adam policy_opt;
  nn::Adam reward_opt;
  nn::Adam cost_opt;

  ActorCritic() = default;
  ActorCritic(Policy p, Critic vr, Critic vc, const PpoConfig& config);

  nlohmann::json to_json() const;
  void load_json(const nlohmann::json& j);
};

struct UpdateStats {
  double policy_loss = 0.0;
  double reward_critic_loss = 0.0;
  double cost_critic_loss = 0.0;
  double mean_ratio_deviation = 0.0;
};

/// Clipped-surrogate policy step on (A_r - lambda A_c) / (1 + lambda) plus
/// critic regression on GAE returns for reward and the supplied per-step
/// costs. Throws NumericalError on a non-finite loss.
UpdateStats ppo_lagrangian_update(ActorCritic& ac, const std::vector<Rollout>& batch,
                                  const std::vector<std::vector<int>>& costs, double lambda, const PpoConfig& config,
                                  Rng& rng, nn::ExecutionPolicy exec = nn::ExecutionPolicy::parallel);

/// Mean clipped-surrogate loss (with entropy bonus) over a batch and its gradient.
nn::LossGradient policy_loss_gradient(const Policy& policy, const Eigen::MatrixXd& obs,
                                      const std::vector<std::vector<double>>& raw, std::span<const double> old_logp,
                                      std::span<const double> advantages, double clip, double entropy_coef,
                                      nn::ExecutionPolicy exec = nn::ExecutionPolicy::parallel);

/// Observations of every step in the batch, one column per step.
Eigen::MatrixXd stack_observations(const std::vector<Rollout>& batch);

}  // namespace rlsf::trainer
