#include "rlsf/trainer/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rlsf/core/errors.hpp"

namespace rlsf::trainer {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

std::size_t output_size(const envs::ActionSpace& space) {
  return space.is_discrete() ? static_cast<std::size_t>(space.n_discrete) : 2 * space.low.size();
}

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd p = (logits.array() - m).exp();
  return p / p.sum();
}

}  // namespace

Policy::Policy(std::size_t obs_dim, envs::ActionSpace space, std::vector<std::size_t> hidden, Rng& rng,
               double log_std_init)
    : space_(std::move(space)), log_std_init_(log_std_init) {
  if (!space_.is_discrete()) {
    if (space_.low.empty() || space_.low.size() != space_.high.size()) throw ValidationError("bad action bounds");
    kind_ = PolicyKind::squashed_gaussian;
  }
  net_ = nn::Mlp({obs_dim, std::move(hidden), output_size(space_)}, rng, 0.01);
}

ActionVec Policy::to_env_action(std::span<const double> raw) const {
  if (kind_ == PolicyKind::categorical) return ActionVec::discrete(static_cast<int>(raw[0]));
  std::vector<double> a(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double unit = 0.5 * (std::tanh(raw[i]) + 1.0);
    a[i] = std::clamp(space_.low[i] + unit * (space_.high[i] - space_.low[i]), space_.low[i], space_.high[i]);
  }
  return ActionVec(std::move(a));
}

Policy::Sample Policy::sample(const StateVec& s, Rng& rng) const {
  const Eigen::VectorXd out = net_.forward(s.view());
  Sample smp;
  if (kind_ == PolicyKind::categorical) {
    const Eigen::VectorXd p = softmax(out);
    const double u = uniform01(rng);
    double acc = 0.0;
    int a = static_cast<int>(p.size()) - 1;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      acc += p(i);
      if (u < acc) {
        a = static_cast<int>(i);
        break;
      }
    }
    smp.raw = {static_cast<double>(a)};
  } else {
    const std::size_t m = action_dim();
    smp.raw.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double ls = std::clamp(out(static_cast<Eigen::Index>(m + i)) + log_std_init_, kLogStdMin, kLogStdMax);
      smp.raw[i] = out(static_cast<Eigen::Index>(i)) + std::exp(ls) * standard_normal(rng);
    }
  }
  smp.logp = log_prob(out, smp.raw);
  smp.env_action = to_env_action(smp.raw);
  return smp;
}

ActionVec Policy::greedy(const StateVec& s) const {
  const Eigen::VectorXd out = net_.forward(s.view());
  if (kind_ == PolicyKind::categorical) {
    Eigen::Index best = 0;
    out.maxCoeff(&best);
    return ActionVec::discrete(static_cast<int>(best));
  }
  const std::vector<double> mean(out.data(), out.data() + action_dim());
  return to_env_action(mean);
}

double Policy::log_prob(const Eigen::Ref<const Eigen::VectorXd>& out, std::span<const double> raw) const {
  if (kind_ == PolicyKind::categorical) {
    const auto a = static_cast<Eigen::Index>(raw[0]);
    if (a < 0 || a >= out.size()) throw ValidationError("action index out of range");
    const double m = out.maxCoeff();
    return out(a) - m - std::log((out.array() - m).exp().sum());
  }
  const std::size_t m = action_dim();
  double lp = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double mu = out(static_cast<Eigen::Index>(i));
    const double ls = std::clamp(out(static_cast<Eigen::Index>(m + i)) + log_std_init_, kLogStdMin, kLogStdMax);
    const double z = (raw[i] - mu) / std::exp(ls);
    lp += -0.5 * z * z - ls - kHalfLog2Pi;
  }
  return lp;
}

double Policy::entropy(const Eigen::Ref<const Eigen::VectorXd>& out) const {
  if (kind_ == PolicyKind::categorical) {
    const Eigen::VectorXd p = softmax(out);
    double h = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      if (p(i) > 0.0) h -= p(i) * std::log(p(i));
    }
    return h;
  }
  const std::size_t m = action_dim();
  double h = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    h += std::clamp(out(static_cast<Eigen::Index>(m + i)) + log_std_init_, kLogStdMin, kLogStdMax) + 0.5 +
         kHalfLog2Pi;
  }
  return h;
}

void Policy::accumulate_grad(const Eigen::Ref<const Eigen::VectorXd>& out, std::span<const double> raw, double w,
                             double c, Eigen::Ref<Eigen::VectorXd> d_out) const {
  if (kind_ == PolicyKind::categorical) {
    const Eigen::VectorXd p = softmax(out);
    const auto a = static_cast<Eigen::Index>(raw[0]);
    double h = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      if (p(i) > 0.0) h -= p(i) * std::log(p(i));
    }
    for (Eigen::Index j = 0; j < p.size(); ++j) {
      d_out(j) += w * ((j == a ? 1.0 : 0.0) - p(j));
      if (c != 0.0 && p(j) > 0.0) d_out(j) += c * (-p(j) * (std::log(p(j)) + h));
    }
    return;
  }
  const std::size_t m = action_dim();
  for (std::size_t i = 0; i < m; ++i) {
    const auto im = static_cast<Eigen::Index>(i);
    const auto is = static_cast<Eigen::Index>(m + i);
    const double pre = out(is) + log_std_init_;
    const bool inside = pre > kLogStdMin && pre < kLogStdMax;
    const double ls = std::clamp(pre, kLogStdMin, kLogStdMax);
    const double inv_var = std::exp(-2.0 * ls);
    const double diff = raw[i] - out(im);
    d_out(im) += w * diff * inv_var;
    if (inside) d_out(is) += w * (diff * diff * inv_var - 1.0) + c;
  }
}

Eigen::VectorXd Policy::probabilities(const StateVec& s) const {
  if (kind_ != PolicyKind::categorical) throw UnsupportedError("probabilities() needs a categorical policy");
  return softmax(net_.forward(s.view()));
}

Critic::Critic(std::size_t obs_dim, std::vector<std::size_t> hidden, Rng& rng)
    : net_({obs_dim, std::move(hidden), 1}, rng) {}

double Critic::value(const StateVec& s) const { return net_.forward(s.view())(0); }

Eigen::VectorXd Critic::values(const Eigen::MatrixXd& obs, nn::ExecutionPolicy policy) const {
  return nn::forward_all(net_, obs, policy).row(0).transpose();
}

nn::LossGradient critic_loss_gradient(const Critic& critic, const Eigen::MatrixXd& obs, std::span<const double> targets,
                                      nn::ExecutionPolicy policy) {
  if (static_cast<std::size_t>(obs.cols()) != targets.size()) throw ValidationError("critic batch size mismatch");
  if (targets.empty()) throw ValidationError("critic loss on an empty batch");
  const double inv_n = 1.0 / static_cast<double>(targets.size());
  auto head = [&](std::size_t first, const Eigen::MatrixXd& out, Eigen::MatrixXd& d_out) {
    double loss = 0.0;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      const double diff = out(0, j) - targets[first + static_cast<std::size_t>(j)];
      loss += 0.5 * diff * diff;
      d_out(0, j) = diff * inv_n;
    }
    return loss * inv_n;
  };
  return nn::loss_and_gradient(critic.net(), obs, head, policy);
}

}  // namespace rlsf::trainer
