#include "rlsf/trainer/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "rlsf/core/errors.hpp"

namespace rlsf::trainer {
namespace {

nlohmann::json params_json(const nn::Mlp& net) {
  return std::vector<double>(net.params().begin(), net.params().end());
}

void load_params(nn::Mlp& net, const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != net.num_params()) throw ValidationError("checkpoint parameter count mismatch");
  net.set_params(v);
}

void check_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw NumericalError("non-finite " + what);
}

}  // namespace

GaeResult gae(std::span<const double> rewards, std::span<const double> values, double bootstrap, double gamma,
              double lambda) {
  if (rewards.size() != values.size()) throw ValidationError("gae: rewards and values differ in length");
  const std::size_t n = rewards.size();
  GaeResult r;
  r.advantages.assign(n, 0.0);
  r.returns.assign(n, 0.0);
  double next_value = bootstrap;
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double delta = rewards[i] + gamma * next_value - values[i];
    running = delta + gamma * lambda * running;
    r.advantages[i] = running;
    r.returns[i] = running + values[i];
    next_value = values[i];
  }
  return r;
}

void PpoConfig::validate() const {
  if (epochs < 0) throw ValidationError("ppo epochs must be >= 0");
  if (minibatch < 0) throw ValidationError("ppo minibatch must be >= 0");
  if (!(lr_policy > 0.0) || !(lr_critic > 0.0)) throw ValidationError("learning rates must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("gamma must be in [0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ValidationError("gae_lambda must be in [0, 1]");
  if (!(clip > 0.0)) throw ValidationError("clip ratio must be positive");
  if (entropy_coef < 0.0) throw ValidationError("entropy_coef must be >= 0");
}

double LagrangeState::update(double episode_cost, double c_max) {
  if (!std::isfinite(episode_cost)) throw NumericalError("non-finite cost estimate in lambda update");
  lambda = std::max(0.0, lambda + lr * (episode_cost - c_max));
  return lambda;
}

ActorCritic::ActorCritic(Policy p, Critic vr, Critic vc, const PpoConfig& config)
    : policy(std::move(p)),
      reward_critic(std::move(vr)),
      cost_critic(std::move(vc)),
      policy_opt(policy.net().num_params(), config.lr_policy),
      reward_opt(reward_critic.net().num_params(), config.lr_critic),
      cost_opt(cost_critic.net().num_params(), config.lr_critic) {}

nlohmann::json ActorCritic::to_json() const {
  return {{"policy", params_json(policy.net())},
          {"reward_critic", params_json(reward_critic.net())},
          {"cost_critic", params_json(cost_critic.net())},
          {"policy_opt", policy_opt.to_json()},
          {"reward_opt", reward_opt.to_json()},
          {"cost_opt", cost_opt.to_json()}};
}

void ActorCritic::load_json(const nlohmann::json& j) {
  load_params(policy.net(), j.at("policy"));
  load_params(reward_critic.net(), j.at("reward_critic"));
  load_params(cost_critic.net(), j.at("cost_critic"));
  policy_opt = nn::Adam::from_json(j.at("policy_opt"));
  reward_opt = nn::Adam::from_json(j.at("reward_opt"));
  cost_opt = nn::Adam::from_json(j.at("cost_opt"));
}

Eigen::MatrixXd stack_observations(const std::vector<Rollout>& batch) {
  std::size_t n = 0;
  for (const auto& r : batch) n += r.size();
  if (n == 0) return {};
  const auto d = static_cast<Eigen::Index>(batch.front().traj.transitions.front().state.dim());
  Eigen::MatrixXd X(d, static_cast<Eigen::Index>(n));
  Eigen::Index col = 0;
  for (const auto& r : batch) {
    for (const auto& tr : r.traj.transitions) {
      if (static_cast<Eigen::Index>(tr.state.dim()) != d) throw ValidationError("inconsistent observation dimension");
      X.col(col++) = Eigen::Map<const Eigen::VectorXd>(tr.state.values.data(), d);
    }
  }
  return X;
}

nn::LossGradient policy_loss_gradient(const Policy& policy, const Eigen::MatrixXd& obs,
                                      const std::vector<std::vector<double>>& raw, std::span<const double> old_logp,
                                      std::span<const double> advantages, double clip, double entropy_coef,
                                      nn::ExecutionPolicy exec) {
  const auto n = static_cast<std::size_t>(obs.cols());
  if (raw.size() != n || old_logp.size() != n || advantages.size() != n) {
    throw ValidationError("policy batch size mismatch");
  }
  if (n == 0) throw ValidationError("policy loss on an empty batch");
  const double inv_n = 1.0 / static_cast<double>(n);
  auto head = [&](std::size_t first, const Eigen::MatrixXd& out, Eigen::MatrixXd& d_out) {
    d_out.setZero();
    double loss = 0.0;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      const std::size_t i = first + static_cast<std::size_t>(j);
      const double lp = policy.log_prob(out.col(j), raw[i]);
      const double ratio = std::exp(lp - old_logp[i]);
      const double a = advantages[i];
      const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
      const double unclipped_obj = ratio * a;
      const double clipped_obj = clipped * a;
      const double h = entropy_coef > 0.0 ? policy.entropy(out.col(j)) : 0.0;
      loss += -std::min(unclipped_obj, clipped_obj) - entropy_coef * h;
      // d(-min)/dlogp is -ratio * A while the unclipped branch is the active one.
      const bool active = unclipped_obj <= clipped_obj;
      const double w = active ? -ratio * a * inv_n : 0.0;
      policy.accumulate_grad(out.col(j), raw[i], w, -entropy_coef * inv_n, d_out.col(j));
    }
    return loss * inv_n;
  };
  return nn::loss_and_gradient(policy.net(), obs, head, exec);
}

UpdateStats ppo_lagrangian_update(ActorCritic& ac, const std::vector<Rollout>& batch,
                                  const std::vector<std::vector<int>>& costs, double lambda, const PpoConfig& config,
                                  Rng& rng, nn::ExecutionPolicy exec) {
  config.validate();
  if (lambda < 0.0) throw ValidationError("lambda must be non-negative");
  if (costs.size() != batch.size()) throw ValidationError("one cost vector per trajectory required");
  if (batch.empty()) throw ValidationError("ppo update on an empty batch");

  const Eigen::MatrixXd obs = stack_observations(batch);
  const auto n = static_cast<std::size_t>(obs.cols());
  const Eigen::VectorXd v_r = ac.reward_critic.values(obs, exec);
  const Eigen::VectorXd v_c = ac.cost_critic.values(obs, exec);

  std::vector<double> adv(n), ret_r(n), ret_c(n), old_logp(n);
  std::vector<std::vector<double>> raw(n);
  std::size_t offset = 0;
  for (std::size_t e = 0; e < batch.size(); ++e) {
    const auto& r = batch[e];
    const std::size_t len = r.size();
    if (costs[e].size() != len) throw ValidationError("cost vector length differs from trajectory length");
    std::vector<double> rewards(len), step_costs(len);
    for (std::size_t t = 0; t < len; ++t) {
      rewards[t] = r.traj.transitions[t].reward;
      step_costs[t] = costs[e][t];
    }
    const double boot_r = r.terminated ? 0.0 : ac.reward_critic.value(r.final_obs);
    const double boot_c = r.terminated ? 0.0 : ac.cost_critic.value(r.final_obs);
    const auto vr = std::span<const double>(v_r.data() + offset, len);
    const auto vc = std::span<const double>(v_c.data() + offset, len);
    const auto gr = gae(rewards, vr, boot_r, config.gamma, config.gae_lambda);
    const auto gc = gae(step_costs, vc, boot_c, config.gamma, config.gae_lambda);
    for (std::size_t t = 0; t < len; ++t) {
      adv[offset + t] = (gr.advantages[t] - lambda * gc.advantages[t]) / (1.0 + lambda);
      ret_r[offset + t] = gr.returns[t];
      ret_c[offset + t] = gc.returns[t];
      old_logp[offset + t] = r.logp[t];
      raw[offset + t] = r.raw_actions[t];
    }
    offset += len;
  }

  if (config.normalize_advantages && n > 1) {
    const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (double& a : adv) a = (a - mean) / (sd + 1e-8);
  }

  ac.policy_opt.set_learning_rate(config.lr_policy);
  ac.reward_opt.set_learning_rate(config.lr_critic);
  ac.cost_opt.set_learning_rate(config.lr_critic);

  const std::size_t mb = (config.minibatch <= 0 || static_cast<std::size_t>(config.minibatch) >= n)
                             ? n
                             : static_cast<std::size_t>(config.minibatch);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  UpdateStats stats;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (mb < n) std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += mb) {
      const std::size_t cnt = std::min(mb, n - start);
      Eigen::MatrixXd o(obs.rows(), static_cast<Eigen::Index>(cnt));
      std::vector<std::vector<double>> rw(cnt);
      std::vector<double> lp(cnt), a(cnt), tr(cnt), tc(cnt);
      for (std::size_t i = 0; i < cnt; ++i) {
        const std::size_t k = order[start + i];
        o.col(static_cast<Eigen::Index>(i)) = obs.col(static_cast<Eigen::Index>(k));
        rw[i] = raw[k];
        lp[i] = old_logp[k];
        a[i] = adv[k];
        tr[i] = ret_r[k];
        tc[i] = ret_c[k];
      }
      const auto pg = policy_loss_gradient(ac.policy, o, rw, lp, a, config.clip, config.entropy_coef, exec);
      const auto rg = critic_loss_gradient(ac.reward_critic, o, tr, exec);
      const auto cg = critic_loss_gradient(ac.cost_critic, o, tc, exec);
      check_finite(pg.loss, "policy loss");
      check_finite(rg.loss, "reward critic loss");
      check_finite(cg.loss, "cost critic loss");
      ac.policy_opt.step(ac.policy.net().params(), pg.grad);
      ac.reward_opt.step(ac.reward_critic.net().params(), rg.grad);
      ac.cost_opt.step(ac.cost_critic.net().params(), cg.grad);
      stats.policy_loss = pg.loss;
      stats.reward_critic_loss = rg.loss;
      stats.cost_critic_loss = cg.loss;
    }
  }
  return stats;
}

}  // namespace rlsf::trainer
