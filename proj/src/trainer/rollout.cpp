#include "rlsf/trainer/rollout.hpp"

#include <limits>
#include <numeric>
#include <string>

#include "rlsf/core/errors.hpp"

namespace rlsf::trainer {
namespace {

std::uint64_t episode_env_seed(std::uint64_t seed, std::size_t i) { return derive_seed(seed, {0, i}); }
std::uint64_t episode_action_seed(std::uint64_t seed, std::size_t i) { return derive_seed(seed, {1, i}); }

void check_options(const RolloutOptions& o) {
  if (o.n_steps < 1) throw ValidationError("rollout step budget must be positive");
  if (o.max_episodes < 0) throw ValidationError("max_episodes must be >= 0");
}

bool budget_reached(const RolloutOptions& o, std::int64_t steps, std::size_t episodes) {
  if (o.max_episodes > 0 && episodes >= static_cast<std::size_t>(o.max_episodes)) return true;
  return steps >= o.n_steps;
}

}  // namespace

int Rollout::gt_cost_total() const { return std::accumulate(gt_costs.begin(), gt_costs.end(), 0); }

Rollout run_episode(const Policy& policy, envs::Environment& env, std::uint64_t env_seed, std::uint64_t action_seed,
                    std::int64_t policy_version, bool greedy, bool record_poses) {
  Rng rng(action_seed);
  Rollout r;
  r.traj.env_seed = env_seed;
  r.traj.policy_version = policy_version;
  StateVec obs = env.reset(env_seed);
  for (int t = 0; t < env.horizon(); ++t) {
    if (!obs.all_finite()) throw NumericalError("environment produced a non-finite observation");
    if (record_poses) r.poses.push_back(env.pose());
    Policy::Sample smp;
    if (greedy) {
      smp.env_action = policy.greedy(obs);
      smp.raw = smp.env_action.values;
    } else {
      smp = policy.sample(obs, rng);
    }
    const auto res = env.step(smp.env_action);
    r.traj.transitions.push_back({t, std::move(obs), smp.env_action, res.reward, res.done});
    r.gt_costs.push_back(res.gt_cost);
    r.raw_actions.push_back(std::move(smp.raw));
    r.logp.push_back(smp.logp);
    r.env_return += res.reward;
    obs = res.next_obs;
    if (res.done) {
      r.terminated = true;
      break;
    }
    if (res.truncated) break;
  }
  r.final_obs = std::move(obs);
  return r;
}

std::vector<Rollout> collect_rollouts_serial(const Policy& policy, const envs::Environment& env,
                                             const RolloutOptions& options) {
  check_options(options);
  std::vector<Rollout> out;
  std::int64_t steps = 0;
  auto worker = env.clone();
  while (!budget_reached(options, steps, out.size())) {
    const std::size_t i = out.size();
    out.push_back(run_episode(policy, *worker, episode_env_seed(options.seed, i), episode_action_seed(options.seed, i),
                              options.policy_version, options.greedy, options.record_poses));
    steps += static_cast<std::int64_t>(out.back().size());
  }
  return out;
}

std::vector<Rollout> collect_rollouts_parallel(const Policy& policy, const envs::Environment& env,
                                               const RolloutOptions& options) {
  check_options(options);
  const int wave = std::max(1, nn::max_threads());
  std::vector<Rollout> out;
  std::int64_t steps = 0;
  while (!budget_reached(options, steps, out.size())) {
    const std::size_t base = out.size();
    std::vector<Rollout> batch(static_cast<std::size_t>(wave));
    std::vector<std::string> errors(static_cast<std::size_t>(wave));
#pragma omp parallel for schedule(dynamic, 1)
    for (int w = 0; w < wave; ++w) {
      try {
        auto worker = env.clone();
        const std::size_t i = base + static_cast<std::size_t>(w);
        batch[static_cast<std::size_t>(w)] =
            run_episode(policy, *worker, episode_env_seed(options.seed, i), episode_action_seed(options.seed, i),
                        options.policy_version, options.greedy, options.record_poses);
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(w)] = e.what();
      }
    }
    for (int w = 0; w < wave; ++w) {
      if (!errors[static_cast<std::size_t>(w)].empty()) {
        throw std::runtime_error("rollout worker failed: " + errors[static_cast<std::size_t>(w)]);
      }
      if (budget_reached(options, steps, out.size())) break;
      steps += static_cast<std::int64_t>(batch[static_cast<std::size_t>(w)].size());
      out.push_back(std::move(batch[static_cast<std::size_t>(w)]));
    }
  }
  return out;
}

std::vector<Rollout> collect_rollouts(const Policy& policy, const envs::Environment& env, const RolloutOptions& options,
                                      nn::ExecutionPolicy exec) {
  return exec == nn::ExecutionPolicy::parallel ? collect_rollouts_parallel(policy, env, options)
                                               : collect_rollouts_serial(policy, env, options);
}

EvalReport summarize(const std::vector<Rollout>& rollouts) {
  EvalReport rep;
  rep.episodes = static_cast<int>(rollouts.size());
  if (rollouts.empty()) return rep;
  double ret = 0.0, cost = 0.0, len = 0.0;
  for (const auto& r : rollouts) {
    ret += r.traj.total_reward();
    cost += r.gt_cost_total();
    len += static_cast<double>(r.size());
  }
  const double n = static_cast<double>(rollouts.size());
  rep.mean_return = ret / n;
  rep.mean_gt_cost = cost / n;
  rep.mean_length = len / n;
  rep.cv_rate = len > 0.0 ? 100.0 * cost / len : 0.0;
  return rep;
}

EvalReport evaluate_policy(const Policy& policy, const envs::Environment& env, int episodes, std::uint64_t seed,
                           bool greedy) {
  if (episodes < 1) throw ValidationError("evaluation needs at least one episode");
  RolloutOptions o;
  o.n_steps = std::numeric_limits<std::int64_t>::max();
  o.max_episodes = episodes;
  o.seed = seed;
  o.greedy = greedy;
  return summarize(collect_rollouts(policy, env, o));
}

}  // namespace rlsf::trainer
