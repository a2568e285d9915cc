#include "rlsf/cost_model/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rlsf/core/errors.hpp"

namespace rlsf::cost {
namespace {

void check_prob(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("probability outside [0, 1]: " + std::to_string(p));
}

void check_label(int y) {
  if (y != 0 && y != 1) throw ValidationError("labels must be 0 or 1");
}

double floored_log(double x, std::size_t& clamped) {
  if (x < kLogFloor) {
    ++clamped;
    return std::log(kLogFloor);
  }
  return std::log(x);
}

void check_segment(const ScoredSegment& seg) {
  check_label(seg.y_safe);
  if (seg.probs.empty()) throw ValidationError("segment must contain at least one step");
  for (double p : seg.probs) check_prob(p);
}

}  // namespace

double segment_safe_prob(std::span<const double> probs) {
  if (probs.empty()) throw ValidationError("segment_safe_prob needs a non-empty list");
  double prod = 1.0;
  for (double p : probs) {
    check_prob(p);
    prod *= p;
  }
  return prod;
}

LossValue mle_loss(std::span<const ScoredSegment> batch) {
  if (batch.empty()) throw ValidationError("mle_loss on an empty batch");
  LossValue out;
  double total = 0.0;
  for (const auto& seg : batch) {
    check_segment(seg);
    if (seg.y_safe == 1) {
      for (double p : seg.probs) total += floored_log(p, out.clamped);
    } else {
      total += floored_log(1.0 - segment_safe_prob(seg.probs), out.clamped);
    }
  }
  if (out.clamped > 0) {
    log_warn("mle_loss: " + std::to_string(out.clamped) + " log argument(s) floored at 1e-12");
  }
  out.value = -total / static_cast<double>(batch.size());
  return out;
}

LossValue segment_surrogate_loss(std::span<const ScoredSegment> batch) {
  if (batch.empty()) throw ValidationError("surrogate loss on an empty batch");
  LossValue out;
  double total = 0.0;
  for (const auto& seg : batch) {
    check_segment(seg);
    for (double p : seg.probs) total += floored_log(seg.y_safe == 1 ? p : 1.0 - p, out.clamped);
  }
  out.value = -total / static_cast<double>(batch.size());
  return out;
}

LossValue surrogate_loss(std::span<const int> labels, std::span<const double> probs) {
  if (labels.size() != probs.size()) throw ValidationError("labels and probabilities differ in length");
  if (labels.empty()) throw ValidationError("surrogate loss on an empty batch");
  LossValue out;
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    check_label(labels[i]);
    check_prob(probs[i]);
    total += floored_log(labels[i] == 1 ? probs[i] : 1.0 - probs[i], out.clamped);
  }
  out.value = -total / static_cast<double>(labels.size());
  return out;
}

double binary_entropy(double p) {
  check_prob(p);
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log1p(-p);
  return h;
}

}  // namespace rlsf::cost
