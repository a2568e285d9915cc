#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace rlsf {

/// Dense observation vector. Dimension is fixed per environment instance.
struct StateVec {
  std::vector<double> values;

  StateVec() = default;
  explicit StateVec(std::vector<double> v) : values(std::move(v)) {}

  std::size_t dim() const { return values.size(); }
  std::span<const double> view() const { return values; }
  bool all_finite() const;

  friend bool operator==(const StateVec&, const StateVec&) = default;
};

/// Action as a dense vector. Discrete actions store their index as the single entry.
struct ActionVec {
  std::vector<double> values;

  ActionVec() = default;
  explicit ActionVec(std::vector<double> v) : values(std::move(v)) {}

  static ActionVec discrete(int index) { return ActionVec({static_cast<double>(index)}); }
  int index() const;

  std::size_t dim() const { return values.size(); }

  friend bool operator==(const ActionVec&, const ActionVec&) = default;
};

struct Transition {
  std::int64_t t = 0;
  StateVec state;
  ActionVec action;
  double reward = 0.0;
  bool done = false;

  friend bool operator==(const Transition&, const Transition&) = default;
};

/// Ordered record of one episode. Timesteps are consecutive from 0 and only
/// the final transition may carry done = true.
struct Trajectory {
  std::vector<Transition> transitions;
  std::uint64_t env_seed = 0;
  std::int64_t policy_version = 0;

  std::size_t size() const { return transitions.size(); }
  bool empty() const { return transitions.empty(); }
  double total_reward() const;

  /// Throws ValidationError when the timestep/done invariants do not hold.
  void validate() const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Inclusive timestep range [start, end] of one trajectory.
struct Segment {
  std::uint64_t trajectory_id = 0;
  std::int64_t start = 0;
  std::int64_t end = 0;

  std::int64_t length() const { return end - start + 1; }

  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Contiguous, non-overlapping segments of length k covering the trajectory;
/// only the last one may be shorter.
std::vector<Segment> split_into_segments(const Trajectory& traj, std::int64_t k,
                                         std::uint64_t trajectory_id = 0);

/// Same partition computed from a length alone.
std::vector<Segment> split_length(std::int64_t length, std::int64_t k, std::uint64_t trajectory_id = 0);

}  // namespace rlsf
