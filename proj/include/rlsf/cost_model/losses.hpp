#pragma once

// Segment-level likelihood and state-level surrogate objectives for learning
// p_safe from safe/unsafe segment labels. Both are negative log-likelihoods:
// smaller is better.

#include <cstddef>
#include <span>
#include <vector>

namespace rlsf::cost {

/// Log arguments are floored here so every term stays finite.
inline constexpr double kLogFloor = 1e-12;

struct LossValue {
  double value = 0.0;
  /// Number of log arguments that hit kLogFloor.
  std::size_t clamped = 0;
};

/// A labeled segment together with the model's per-step p_safe values.
struct ScoredSegment {
  int y_safe = 1;
  std::vector<double> probs;
};

/// Probability that a whole segment is labeled safe: the product of the
/// per-step safety probabilities.
double segment_safe_prob(std::span<const double> probs);

/// -mean_seg[ y * sum_t log p_t + (1 - y) * log(1 - prod_t p_t) ]
LossValue mle_loss(std::span<const ScoredSegment> batch);

/// Surrogate with the same per-segment normalization as mle_loss:
/// -mean_seg[ y * sum_t log p_t + (1 - y) * sum_t log(1 - p_t) ].
/// Upper-bounds mle_loss on the same batch.
LossValue segment_surrogate_loss(std::span<const ScoredSegment> batch);

/// Per-state binary cross-entropy, each state carrying its segment's label,
/// averaged uniformly over states (the training objective).
LossValue surrogate_loss(std::span<const int> labels, std::span<const double> probs);

/// H(p) in nats.
double binary_entropy(double p);

}  // namespace rlsf::cost
