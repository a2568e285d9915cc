#include "rlsf/nn/mlp.hpp"

#include <cmath>

#include "rlsf/core/errors.hpp"

namespace rlsf::nn {

std::size_t MlpShape::num_params() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < num_layers(); ++l) n += layer_out(l) * (layer_in(l) + 1);
  return n;
}

Mlp::Mlp(MlpShape shape) : shape_(std::move(shape)) {
  if (shape_.input == 0 || shape_.output == 0) throw ValidationError("MLP needs non-empty input and output");
  for (auto h : shape_.hidden) {
    if (h == 0) throw ValidationError("MLP hidden layers must be non-empty");
  }
  std::size_t offset = 0;
  for (std::size_t l = 0; l < shape_.num_layers(); ++l) {
    offsets_.push_back(offset);
    offset += shape_.layer_out(l) * (shape_.layer_in(l) + 1);
  }
  params_.assign(offset, 0.0);
}

Mlp::Mlp(MlpShape shape, Rng& rng, double output_gain) : Mlp(std::move(shape)) {
  for (std::size_t l = 0; l < shape_.num_layers(); ++l) {
    const auto in = shape_.layer_in(l);
    const auto out = shape_.layer_out(l);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    const double gain = l + 1 == shape_.num_layers() ? output_gain : 1.0;
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < in * out; ++i) params_[weight_offset(l) + i] = gain * dist(rng);
  }
}

void Mlp::set_params(std::span<const double> values) {
  if (values.size() != params_.size()) throw ValidationError("parameter vector size mismatch");
  params_.assign(values.begin(), values.end());
}

Eigen::VectorXd Mlp::forward(std::span<const double> x) const {
  if (x.size() != shape_.input) throw ValidationError("MLP input dimension mismatch");
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  for (std::size_t l = 0; l < shape_.num_layers(); ++l) {
    const auto in = static_cast<Eigen::Index>(shape_.layer_in(l));
    const auto out = static_cast<Eigen::Index>(shape_.layer_out(l));
    Eigen::Map<const Eigen::MatrixXd> W(params_.data() + weight_offset(l), out, in);
    Eigen::Map<const Eigen::VectorXd> b(params_.data() + bias_offset(l), out);
    Eigen::VectorXd z = W * a + b;
    if (l + 1 < shape_.num_layers()) z = z.array().tanh();
    a = std::move(z);
  }
  return a;
}

const Eigen::MatrixXd& Mlp::forward_batch(const Eigen::Ref<const Eigen::MatrixXd>& inputs, Workspace& ws) const {
  if (static_cast<std::size_t>(inputs.rows()) != shape_.input) throw ValidationError("MLP input dimension mismatch");
  const std::size_t L = shape_.num_layers();
  ws.activations.resize(L + 1);
  ws.deltas.resize(L);
  ws.activations[0] = inputs;
  for (std::size_t l = 0; l < L; ++l) {
    const auto in = static_cast<Eigen::Index>(shape_.layer_in(l));
    const auto out = static_cast<Eigen::Index>(shape_.layer_out(l));
    Eigen::Map<const Eigen::MatrixXd> W(params_.data() + weight_offset(l), out, in);
    Eigen::Map<const Eigen::VectorXd> b(params_.data() + bias_offset(l), out);
    auto& next = ws.activations[l + 1];
    next.noalias() = W * ws.activations[l];
    next.colwise() += b;
    if (l + 1 < L) next = next.array().tanh();
  }
  return ws.activations[L];
}

void Mlp::backward_batch(Workspace& ws, const Eigen::Ref<const Eigen::MatrixXd>& d_output, std::span<double> grad) const {
  if (grad.size() != params_.size()) throw ValidationError("gradient buffer size mismatch");
  const std::size_t L = shape_.num_layers();
  if (ws.activations.size() != L + 1) throw StateError("backward_batch without a preceding forward_batch");
  ws.deltas[L - 1] = d_output;
  for (std::size_t l = L; l-- > 0;) {
    const auto in = static_cast<Eigen::Index>(shape_.layer_in(l));
    const auto out = static_cast<Eigen::Index>(shape_.layer_out(l));
    Eigen::Map<const Eigen::MatrixXd> W(params_.data() + weight_offset(l), out, in);
    Eigen::Map<Eigen::MatrixXd> gW(grad.data() + weight_offset(l), out, in);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + bias_offset(l), out);
    const auto& delta = ws.deltas[l];
    gW.noalias() += delta * ws.activations[l].transpose();
    gb.noalias() += delta.rowwise().sum();
    if (l > 0) {
      // tanh'(z) = 1 - a^2 for the hidden activation a feeding this layer.
      const auto& a = ws.activations[l];
      ws.deltas[l - 1] = (W.transpose() * delta).cwiseProduct((1.0 - a.array().square()).matrix());
    }
  }
}

}  // namespace rlsf::nn
