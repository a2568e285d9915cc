#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rlsf/core/rng.hpp"

namespace rlsf::nn {

struct MlpShape {
  std::size_t input = 0;
  std::vector<std::size_t> hidden;
  std::size_t output = 1;

  std::size_t num_layers() const { return hidden.size() + 1; }
  std::size_t layer_in(std::size_t l) const { return l == 0 ? input : hidden[l - 1]; }
  std::size_t layer_out(std::size_t l) const { return l == hidden.size() ? output : hidden[l]; }
  std::size_t num_params() const;

  friend bool operator==(const MlpShape&, const MlpShape&) = default;
};

/// Fully connected network, tanh hidden units, linear output. Parameters live
/// in one flat vector (per layer: weights column-major out x in, then bias) so
/// optimizers, checkpoints and finite-difference checks see a single buffer.
class Mlp {
 public:
  struct Workspace {
    /// activations[0] is the input block, activations[L] the output block.
    std::vector<Eigen::MatrixXd> activations;
    std::vector<Eigen::MatrixXd> deltas;
  };

  Mlp() = default;
  explicit Mlp(MlpShape shape);
  /// Uniform Glorot initialization; the output layer is scaled by `output_gain`.
  Mlp(MlpShape shape, Rng& rng, double output_gain = 1.0);

  const MlpShape& shape() const { return shape_; }
  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }
  std::size_t num_params() const { return params_.size(); }
  void set_params(std::span<const double> values);

  /// Single sample.
  Eigen::VectorXd forward(std::span<const double> x) const;

  /// Column block forward pass; inputs are (input x B).
  const Eigen::MatrixXd& forward_batch(const Eigen::Ref<const Eigen::MatrixXd>& inputs, Workspace& ws) const;

  /// Adds dLoss/dparams to `grad` given dLoss/doutput (output x B) for the
  /// block most recently passed through forward_batch with `ws`.
  void backward_batch(Workspace& ws, const Eigen::Ref<const Eigen::MatrixXd>& d_output, std::span<double> grad) const;

 private:
  std::size_t weight_offset(std::size_t l) const { return offsets_[l]; }
  std::size_t bias_offset(std::size_t l) const { return offsets_[l] + shape_.layer_out(l) * shape_.layer_in(l); }

  MlpShape shape_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

}  // namespace rlsf::nn
