#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rlsf/core/rng.hpp"
#include "rlsf/core/types.hpp"
#include "rlsf/envs/environment.hpp"
#include "rlsf/nn/batch_kernels.hpp"
#include "rlsf/nn/mlp.hpp"

namespace rlsf::trainer {

enum class PolicyKind {
  /// Softmax over discrete actions.
  categorical,
  /// Diagonal Gaussian in an unbounded space, squashed by tanh into the action box.
  squashed_gaussian,
};

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

/// Stochastic actor. For the squashed Gaussian the network emits the mean and
/// a log-std offset for every action dimension; the likelihood is evaluated on
/// the pre-squash sample, which leaves PPO ratios unchanged.
class Policy {
 public:
  struct Sample {
    ActionVec env_action;
    /// Discrete: {index}. Continuous: the pre-squash sample u.
    std::vector<double> raw;
    double logp = 0.0;
  };

  Policy() = default;
  Policy(std::size_t obs_dim, envs::ActionSpace space, std::vector<std::size_t> hidden, Rng& rng,
         double log_std_init = -0.5);

  PolicyKind kind() const { return kind_; }
  const envs::ActionSpace& space() const { return space_; }
  const nn::Mlp& net() const { return net_; }
  nn::Mlp& net() { return net_; }
  double log_std_init() const { return log_std_init_; }
  std::size_t action_dim() const { return space_.is_discrete() ? 1 : space_.low.size(); }

  Sample sample(const StateVec& s, Rng& rng) const;
  ActionVec greedy(const StateVec& s) const;
  /// Maps a raw sample to the environment action.
  ActionVec to_env_action(std::span<const double> raw) const;

  /// log pi(raw | network output column).
  double log_prob(const Eigen::Ref<const Eigen::VectorXd>& out, std::span<const double> raw) const;
  double entropy(const Eigen::Ref<const Eigen::VectorXd>& out) const;
  /// Adds w * d log_prob / d out and c * d entropy / d out to `d_out`.
  void accumulate_grad(const Eigen::Ref<const Eigen::VectorXd>& out, std::span<const double> raw, double w, double c,
                       Eigen::Ref<Eigen::VectorXd> d_out) const;

  /// Action probabilities (categorical only).
  Eigen::VectorXd probabilities(const StateVec& s) const;

 private:
  PolicyKind kind_ = PolicyKind::categorical;
  envs::ActionSpace space_;
  nn::Mlp net_;
  double log_std_init_ = -0.5;
};

/// Scalar state-value network.
class Critic {
 public:
  Critic() = default;
  Critic(std::size_t obs_dim, std::vector<std::size_t> hidden, Rng& rng);

  const nn::Mlp& net() const { return net_; }
  nn::Mlp& net() { return net_; }

  double value(const StateVec& s) const;
  Eigen::VectorXd values(const Eigen::MatrixXd& obs, nn::ExecutionPolicy policy = nn::ExecutionPolicy::parallel) const;

 private:
  nn::Mlp net_;
};

/// Mean of 0.5 (V(s) - target)^2 and its parameter gradient.
nn::LossGradient critic_loss_gradient(const Critic& critic, const Eigen::MatrixXd& obs, std::span<const double> targets,
                                      nn::ExecutionPolicy policy = nn::ExecutionPolicy::parallel);

}  // namespace rlsf::trainer
