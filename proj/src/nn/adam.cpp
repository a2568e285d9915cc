#include "rlsf/nn/adam.hpp"

#include <cmath>

#include "rlsf/core/errors.hpp"

namespace rlsf::nn {

Adam::Adam(std::size_t n_params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n_params, 0.0), v_(n_params, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw ValidationError("Adam: size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    if (!std::isfinite(g)) throw NumericalError("non-finite gradient entry");
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

nlohmann::json Adam::to_json() const {
  return {{"lr", lr_}, {"beta1", beta1_}, {"beta2", beta2_}, {"eps", eps_}, {"t", t_}, {"m", m_}, {"v", v_}};
}

Adam Adam::from_json(const nlohmann::json& j) {
  Adam a;
  a.lr_ = j.at("lr").get<double>();
  a.beta1_ = j.at("beta1").get<double>();
  a.beta2_ = j.at("beta2").get<double>();
  a.eps_ = j.at("eps").get<double>();
  a.t_ = j.at("t").get<std::int64_t>();
  a.m_ = j.at("m").get<std::vector<double>>();
  a.v_ = j.at("v").get<std::vector<double>>();
  return a;
}

}  // namespace rlsf::nn
