#pragma once

#include <cstdint>
#include <vector>

#include "rlsf/envs/environment.hpp"
#include "rlsf/nn/batch_kernels.hpp"
#include "rlsf/trainer/policy.hpp"

namespace rlsf::trainer {

/// One episode with the bookkeeping PPO needs. Ground-truth costs travel
/// alongside for metrics and the scripted evaluator only.
struct Rollout {
  Trajectory traj;
  std::vector<int> gt_costs;
  std::vector<std::vector<double>> raw_actions;
  std::vector<double> logp;
  /// Observation after the last step (bootstrap input when truncated).
  StateVec final_obs;
  /// Ended in a terminal state rather than at the horizon.
  bool terminated = false;
  /// Environment-side reward total, kept separately from the transitions.
  double env_return = 0.0;
  std::vector<std::vector<double>> poses;

  std::size_t size() const { return traj.size(); }
  int gt_cost_total() const;
};

struct RolloutOptions {
  /// Minimum number of environment steps; the episode that crosses it is kept whole.
  std::int64_t n_steps = 1000;
  std::uint64_t seed = 0;
  std::int64_t policy_version = 0;
  bool greedy = false;
  bool record_poses = false;
  /// Caps the episode count regardless of n_steps (0 = no cap).
  int max_episodes = 0;
};

/// Episode i runs on its own clone of `env` with seeds derived from
/// (seed, i), so results do not depend on scheduling.
std::vector<Rollout> collect_rollouts_serial(const Policy& policy, const envs::Environment& env,
                                             const RolloutOptions& options);
std::vector<Rollout> collect_rollouts_parallel(const Policy& policy, const envs::Environment& env,
                                               const RolloutOptions& options);
std::vector<Rollout> collect_rollouts(const Policy& policy, const envs::Environment& env, const RolloutOptions& options,
                                      nn::ExecutionPolicy exec = nn::ExecutionPolicy::parallel);

/// Single episode; exposed for tests.
Rollout run_episode(const Policy& policy, envs::Environment& env, std::uint64_t env_seed, std::uint64_t action_seed,
                    std::int64_t policy_version, bool greedy, bool record_poses);

struct EvalReport {
  int episodes = 0;
  double mean_return = 0.0;
  /// Ground-truth cost events per episode.
  double mean_gt_cost = 0.0;
  /// Percentage of visited states that violate the ground-truth constraint.
  double cv_rate = 0.0;
  double mean_length = 0.0;
};

EvalReport summarize(const std::vector<Rollout>& rollouts);

EvalReport evaluate_policy(const Policy& policy, const envs::Environment& env, int episodes, std::uint64_t seed,
                           bool greedy = true);

}  // namespace rlsf::trainer
