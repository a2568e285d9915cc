#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rlsf/core/rng.hpp"
#include "rlsf/core/types.hpp"
#include "rlsf/cost_model/classifier.hpp"
#include "rlsf/sampler/simhash.hpp"

namespace rlsf::sampler {

enum class SelectionMode { novelty, random, entropy };

enum class ScheduleKind {
  /// No explicit budget; novelty decides (implicitly decreasing).
  implicit,
  /// Same count every round.
  uniform,
  /// Total budget spread over the rounds proportionally to 1/t.
  decreasing,
};

std::string to_string(SelectionMode m);
SelectionMode parse_selection_mode(const std::string& s);
std::string to_string(ScheduleKind k);
ScheduleKind parse_schedule_kind(const std::string& s);

struct QuerySchedule {
  ScheduleKind kind = ScheduleKind::implicit;
  /// uniform: queries per round.
  int per_round = 0;
  /// decreasing: total budget over `total_rounds` rounds.
  int total_budget = 0;
  int total_rounds = 0;

  void validate() const;
  bool bounded() const { return kind != ScheduleKind::implicit; }
  /// Budget for 1-based round t; -1 when unbounded.
  int budget_for_round(int t) const;
};

/// Largest-remainder allocation of `total` over `rounds` rounds with weights 1/t.
/// Sums to exactly `total` and is non-increasing in t.
std::vector<int> decreasing_allocation(int total, int rounds);

struct SelectionContext {
  const DensityMap* density = nullptr;
  const SimHashProjector* projector = nullptr;
  int e = 1;
  /// Mean per-step score for entropy mode (higher = queried first).
  std::function<double(const Trajectory&)> scorer;
  /// 1-based round index used for bounded schedules.
  int round = 1;
  Rng* rng = nullptr;
};

/// Indices (ascending for novelty/entropy ties, sampled order for random)
/// of the trajectories to query. Never returns duplicates; bounded schedules
/// never exceed their round budget. A budget above the candidate count
/// returns all candidates with a warning.
std::vector<std::size_t> select_queries(const std::vector<Trajectory>& trajs, SelectionMode mode,
                                        const QuerySchedule& schedule, const SelectionContext& ctx);

/// Mean binary entropy of p_safe over the steps of a trajectory.
double mean_entropy(const cost::SafetyClassifier& clf, const Trajectory& traj);

}  // namespace rlsf::sampler
