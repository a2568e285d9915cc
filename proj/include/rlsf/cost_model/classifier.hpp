#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rlsf/core/rng.hpp"
#include "rlsf/core/types.hpp"
#include "rlsf/nn/adam.hpp"
#include "rlsf/nn/batch_kernels.hpp"
#include "rlsf/nn/mlp.hpp"

namespace rlsf::cost {

/// Logits are clamped to this magnitude before the sigmoid.
inline constexpr double kLogitClamp = 27.0;

struct LabeledExample {
  StateVec state;
  ActionVec action;
  int y_safe = 1;
};

enum class ActionEncoding { none, one_hot, raw };

/// Maps (observation, action) to classifier input: the masked observation
/// entries followed by the action encoding.
struct FeatureLayout {
  /// Observation dimension the layout was built for.
  std::size_t state_dim = 0;
  /// Observation indices fed to the classifier; empty means all of them.
  std::vector<std::size_t> state_mask;
  ActionEncoding action = ActionEncoding::none;
  /// Number of discrete actions (one_hot) or action dimension (raw).
  std::size_t action_size = 0;

  std::size_t input_dim() const;
  void validate() const;
  /// Throws ValidationError when observations of dimension `obs_dim` cannot be fed.
  void check_compatible(std::size_t obs_dim) const;
  void write_features(const StateVec& s, const ActionVec& a, std::span<double> out) const;

  friend bool operator==(const FeatureLayout&, const FeatureLayout&) = default;
};

/// p_safe(s, a) = sigmoid(clamp(f_theta(features(s, a))))
class SafetyClassifier {
 public:
  SafetyClassifier() = default;
  SafetyClassifier(FeatureLayout layout, std::vector<std::size_t> hidden, Rng& rng);
  SafetyClassifier(FeatureLayout layout, nn::Mlp net);

  const FeatureLayout& layout() const { return layout_; }
  const nn::Mlp& net() const { return net_; }
  nn::Mlp& net() { return net_; }

  Eigen::VectorXd features(const StateVec& s, const ActionVec& a) const;
  /// One column per example.
  Eigen::MatrixXd feature_matrix(std::span<const LabeledExample> examples) const;
  Eigen::MatrixXd feature_matrix(const Trajectory& traj) const;

  double logit(const StateVec& s, const ActionVec& a) const;
  double p_safe(const StateVec& s, const ActionVec& a) const;
  Eigen::VectorXd p_safe_batch(const Eigen::MatrixXd& features,
                               nn::ExecutionPolicy policy = nn::ExecutionPolicy::parallel) const;

 private:
  FeatureLayout layout_;
  nn::Mlp net_;
};

double clamped_sigmoid(double logit);

/// Mean surrogate (per-state BCE) loss of `clf` on a feature batch and its
/// gradient with respect to the classifier parameters.
nn::LossGradient surrogate_loss_gradient(const SafetyClassifier& clf, const Eigen::MatrixXd& features,
                                         std::span<const int> labels,
                                         nn::ExecutionPolicy policy = nn::ExecutionPolicy::parallel);

struct TrainConfig {
  /// Gradient steps per call.
  int epochs = 5000;
  std::size_t batch_size = 4096;
  double lr = 1e-4;
};

struct TrainReport {
  std::vector<double> losses;
  bool single_class = false;
};

/// Minibatch Adam on the surrogate loss. Minibatches are drawn uniformly
/// from the buffer; a batch size >= buffer size means full-batch steps.
/// `optimizer` carries Adam state across calls (warm start); it is
/// (re)created when its size does not match.
TrainReport train_classifier(SafetyClassifier& clf, std::span<const LabeledExample> buffer, const TrainConfig& config,
                             Rng& rng, nn::Adam* optimizer = nullptr);

/// Thresholded cost c(s, a) = 1[p_safe(s, a) < threshold].
struct CostModel {
  SafetyClassifier classifier;
  double threshold = 0.5;
  bool trained = false;

  int cost(const StateVec& s, const ActionVec& a) const;
};

/// Per-step inferred costs for a trajectory. Throws StateError on an
/// untrained model and ValidationError on a feature-dimension mismatch.
std::vector<int> infer_cost(const CostModel& model, const Trajectory& traj);

/// Binary checkpoint: text header (format version, feature layout, layer
/// sizes, threshold, config hash) followed by the raw little-endian
/// parameter payload.
void save_cost_model(const CostModel& model, const std::filesystem::path& path, std::string_view config_text = {});

/// Loads a checkpoint. When `target_obs_dim` is given, the stored mask must
/// address that observation layout.
CostModel load_cost_model(const std::filesystem::path& path, std::optional<std::size_t> target_obs_dim = std::nullopt);

std::uint64_t fnv1a64(std::string_view text);

}  // namespace rlsf::cost
