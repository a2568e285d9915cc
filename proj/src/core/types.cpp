#include "rlsf/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rlsf/core/errors.hpp"

namespace rlsf {

bool StateVec::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

int ActionVec::index() const {
  if (values.size() != 1) throw ValidationError("discrete action must have exactly one entry");
  return static_cast<int>(values[0]);
}

double Trajectory::total_reward() const {
  double sum = 0.0;
  for (const auto& tr : transitions) sum += tr.reward;
  return sum;
}

void Trajectory::validate() const {
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const auto& tr = transitions[i];
    if (tr.t != static_cast<std::int64_t>(i)) {
      throw ValidationError("trajectory timesteps must be consecutive from 0 (index " + std::to_string(i) +
                            " has t=" + std::to_string(tr.t) + ")");
    }
    if (tr.done && i + 1 != transitions.size()) {
      throw ValidationError("only the final transition may be done");
    }
    if (!std::isfinite(tr.reward)) throw ValidationError("non-finite reward at t=" + std::to_string(i));
  }
}

std::vector<Segment> split_length(std::int64_t length, std::int64_t k, std::uint64_t trajectory_id) {
  if (k < 1) throw ValidationError("segment length k must be >= 1");
  if (length <= 0) throw ValidationError("cannot split an empty trajectory");
  std::vector<Segment> out;
  out.reserve(static_cast<std::size_t>((length + k - 1) / k));
  for (std::int64_t start = 0; start < length; start += k) {
    out.push_back({trajectory_id, start, std::min(start + k, length) - 1});
  }
  return out;
}

std::vector<Segment> split_into_segments(const Trajectory& traj, std::int64_t k, std::uint64_t trajectory_id) {
  return split_length(static_cast<std::int64_t>(traj.size()), k, trajectory_id);
}

}  // namespace rlsf
