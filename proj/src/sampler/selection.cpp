#include "rlsf/sampler/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rlsf/core/errors.hpp"
#include "rlsf/cost_model/losses.hpp"

namespace rlsf::sampler {

std::string to_string(SelectionMode m) {
  switch (m) {
    case SelectionMode::novelty: return "novelty";
    case SelectionMode::random: return "random";
    case SelectionMode::entropy: return "entropy";
  }
  return "?";
}

SelectionMode parse_selection_mode(const std::string& s) {
  if (s == "novelty") return SelectionMode::novelty;
  if (s == "random") return SelectionMode::random;
  if (s == "entropy") return SelectionMode::entropy;
  throw ValidationError("unknown sampler '" + s + "' (expected novelty, random or entropy)");
}

std::string to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::implicit: return "implicit";
    case ScheduleKind::uniform: return "uniform";
    case ScheduleKind::decreasing: return "decreasing";
  }
  return "?";
}

ScheduleKind parse_schedule_kind(const std::string& s) {
  if (s == "implicit") return ScheduleKind::implicit;
  if (s == "uniform") return ScheduleKind::uniform;
  if (s == "decreasing") return ScheduleKind::decreasing;
  throw ValidationError("unknown schedule '" + s + "' (expected implicit, uniform or decreasing)");
}

void QuerySchedule::validate() const {
  switch (kind) {
    case ScheduleKind::implicit: break;
    case ScheduleKind::uniform:
      if (per_round < 0) throw ValidationError("uniform schedule needs per_round >= 0");
      break;
    case ScheduleKind::decreasing:
      if (total_budget < 0 || total_rounds < 1) {
        throw ValidationError("decreasing schedule needs total_budget >= 0 and total_rounds >= 1");
      }
      break;
  }
}

int QuerySchedule::budget_for_round(int t) const {
  if (t < 1) throw ValidationError("rounds are 1-based");
  switch (kind) {
    case ScheduleKind::implicit: return -1;
    case ScheduleKind::uniform: return per_round;
    case ScheduleKind::decreasing: {
      if (t > total_rounds) return 0;
      return decreasing_allocation(total_budget, total_rounds)[static_cast<std::size_t>(t - 1)];
    }
  }
  return 0;
}

std::vector<int> decreasing_allocation(int total, int rounds) {
  if (total < 0 || rounds < 1) throw ValidationError("decreasing allocation needs total >= 0 and rounds >= 1");
  double harmonic = 0.0;
  for (int t = 1; t <= rounds; ++t) harmonic += 1.0 / t;
  std::vector<int> alloc(static_cast<std::size_t>(rounds));
  std::vector<double> remainder(static_cast<std::size_t>(rounds));
  int assigned = 0;
  for (int t = 1; t <= rounds; ++t) {
    const double exact = total * (1.0 / t) / harmonic;
    alloc[t - 1] = static_cast<int>(std::floor(exact));
    remainder[t - 1] = exact - alloc[t - 1];
    assigned += alloc[t - 1];
  }
  std::vector<std::size_t> order(static_cast<std::size_t>(rounds));
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Ties go to the earlier round so the allocation stays non-increasing.
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return remainder[a] > remainder[b]; });
  for (int i = 0; i < total - assigned; ++i) ++alloc[order[static_cast<std::size_t>(i)]];
  return alloc;
}

std::vector<std::size_t> select_queries(const std::vector<Trajectory>& trajs, SelectionMode mode,
                                        const QuerySchedule& schedule, const SelectionContext& ctx) {
  schedule.validate();
  const int budget = schedule.budget_for_round(ctx.round);
  std::vector<std::size_t> out;

  if (mode == SelectionMode::novelty) {
    if (!ctx.density || !ctx.projector) throw ValidationError("novelty selection needs a density map and projector");
    for (std::size_t i = 0; i < trajs.size(); ++i) {
      if (budget >= 0 && out.size() >= static_cast<std::size_t>(budget)) break;
      if (is_novel(trajs[i], *ctx.density, *ctx.projector, ctx.e)) out.push_back(i);
    }
    return out;
  }

  if (budget < 0) throw ValidationError(to_string(mode) + " sampling needs a bounded (uniform or decreasing) schedule");
  std::size_t take = static_cast<std::size_t>(budget);
  if (take > trajs.size()) {
    log_warn("select_queries: budget " + std::to_string(budget) + " exceeds the " + std::to_string(trajs.size()) +
             " available trajectories; returning all");
    take = trajs.size();
  }

  if (mode == SelectionMode::random) {
    if (!ctx.rng) throw ValidationError("random selection needs an RNG");
    std::vector<std::size_t> idx(trajs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < take; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(*ctx.rng)]);
    }
    out.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    return out;
  }

  if (!ctx.scorer) throw ValidationError("entropy selection needs a scorer");
  std::vector<double> score(trajs.size());
  for (std::size_t i = 0; i < trajs.size(); ++i) score[i] = ctx.scorer(trajs[i]);
  std::vector<std::size_t> idx(trajs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return score[a] > score[b]; });
  out.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
  return out;
}

double mean_entropy(const cost::SafetyClassifier& clf, const Trajectory& traj) {
  if (traj.empty()) return 0.0;
  const Eigen::VectorXd p = clf.p_safe_batch(clf.feature_matrix(traj));
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) h += cost::binary_entropy(p(i));
  return h / static_cast<double>(p.size());
}

}  // namespace rlsf::sampler
