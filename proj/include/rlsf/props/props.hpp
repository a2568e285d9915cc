#pragma once

// Randomized property suites for the cost-inference theory, SimHash and the
// analytic gradients.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlsf/cost_model/losses.hpp"

namespace rlsf::props {

struct PropertyResult {
  std::string name;
  bool passed = true;
  std::int64_t trials = 0;
  double seconds = 0.0;
  /// Worst observed slack or error, suite specific.
  double worst = 0.0;
  std::string detail;
  /// Empty on success.
  std::string counterexample;
};

using SegmentLoss = std::function<cost::LossValue(std::span<const cost::ScoredSegment>)>;

/// Same loss with its sign flipped; used to check the suites catch a broken objective.
SegmentLoss sign_flipped(SegmentLoss loss);

/// surrogate >= mle - 1e-9 on random batches; equality to 1e-12 on
/// all-safe batches and on length-1 batches.
PropertyResult surrogate_upper_bound(std::uint64_t seed, std::int64_t trials,
                                 const SegmentLoss& surrogate = cost::segment_surrogate_loss);

/// 1 - prod x_i >= prod (1 - x_i) - 1e-12 for x_i in [0, 1], n <= 50.
PropertyResult product_complement_bound(std::uint64_t seed, std::int64_t trials);

/// Table classifier trained by Adam matches d_g / (d_g + d_b) within 1e-2
/// per cell, and the analytic gradient vanishes (1e-9) at the closed form.
PropertyResult closed_form_minimizer(std::uint64_t seed, std::int64_t datasets);

/// On random 5-state/3-action CMDPs with sufficient densities: the bias
/// identity (1e-9), bias >= 0, and c_*-feasible => c_gt-feasible over
/// `policies` random policies per instance.
PropertyResult bias_identity_and_safety(std::uint64_t seed, std::int64_t instances, int policies = 200);

/// Per-bit collision rate of sign random projections vs 1 - theta / pi
/// (within 0.02, or 4 standard errors if larger) and exact invariance under positive scaling.
PropertyResult simhash_lsh(std::uint64_t seed, std::int64_t pairs);

/// Classifier, reward critic and cost critic gradients against central
/// differences (relative 1e-4) on random small networks.
PropertyResult gradient_checks(std::uint64_t seed, std::int64_t networks);

struct PropsOptions {
  std::uint64_t seed = 0;
  /// Overrides every suite's trial count; 0 yields an empty report.
  std::optional<std::int64_t> trials;
  SegmentLoss surrogate = cost::segment_surrogate_loss;
};

std::vector<PropertyResult> run_all(const PropsOptions& options);

nlohmann::json report_json(const std::vector<PropertyResult>& results);
bool all_passed(const std::vector<PropertyResult>& results);

/// max |a - n| / max(|a|, |n|, floor) over the entries.
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor = 1e-6);

/// ||a - n|| / max(||a||, ||n||), Euclidean. Entries that are zero up to
/// finite-difference rounding do not dominate the way they do per entry.
double relative_error_norm(std::span<const double> analytic, std::span<const double> numeric);

/// Central-difference gradient of `f` with respect to `params` (restored on exit).
std::vector<double> numeric_gradient(const std::function<double()>& f, std::span<double> params, double h = 1e-5);

}  // namespace rlsf::props
