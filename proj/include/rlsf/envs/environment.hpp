#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rlsf/core/types.hpp"

namespace rlsf::envs {

struct StepResult {
  StateVec next_obs;
  double reward = 0.0;
  /// Episode reached a terminal condition (goal, collision, road top).
  bool done = false;
  /// Episode hit its horizon without terminating.
  bool truncated = false;
  /// Ground-truth cost of the state-action just taken. Metrics and scripted
  /// evaluators only; never routed to the learner.
  int gt_cost = 0;
};

struct ActionSpace {
  /// Number of discrete actions, or 0 for a continuous space.
  int n_discrete = 0;
  std::vector<double> low;
  std::vector<double> high;

  bool is_discrete() const { return n_discrete > 0; }
  std::size_t dim() const { return is_discrete() ? 1 : low.size(); }
};

/// Reset/step interface used by rollout workers. One instance per worker.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual std::size_t observation_dim() const = 0;
  virtual ActionSpace action_space() const = 0;
  virtual int horizon() const = 0;

  virtual StateVec reset(std::uint64_t seed) = 0;
  virtual StepResult step(const ActionVec& action) = 0;

  /// Ground-truth cost of the current state (before acting).
  virtual int current_gt_cost() const = 0;
  /// Render pose of the current state for trajectory export.
  virtual std::vector<double> pose() const = 0;

  virtual std::unique_ptr<Environment> clone() const = 0;
};

}  // namespace rlsf::envs
