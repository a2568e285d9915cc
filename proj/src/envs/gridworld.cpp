#include "rlsf/envs/gridworld.hpp"

#include <algorithm>
#include <deque>
#include <string>

#include "rlsf/core/errors.hpp"

namespace rlsf::envs {
namespace {

Cell delta(GridAction a) {
  switch (a) {
    case GridAction::up: return {-1, 0};
    case GridAction::right: return {0, 1};
    case GridAction::down: return {1, 0};
    case GridAction::left: return {0, -1};
  }
  return {0, 0};
}

// The two directions perpendicular to `a`.
std::pair<GridAction, GridAction> lateral(GridAction a) {
  if (a == GridAction::up || a == GridAction::down) return {GridAction::left, GridAction::right};
  return {GridAction::up, GridAction::down};
}

}  // namespace

void GridworldSpec::validate() const {
  if (width < 2 || height < 2) throw ValidationError("gridworld dimensions must be >= 2");
  if (!in_bounds(goal_cell) || !in_bounds(start_cell)) throw ValidationError("start/goal cell outside the grid");
  if (!(slip_prob >= 0.0 && slip_prob < 1.0)) throw ValidationError("slip_prob must lie in [0, 1)");
  if (is_unsafe(goal_cell)) throw ValidationError("goal cell cannot be unsafe");
  for (const auto& c : unsafe_cells) {
    if (!in_bounds(c)) throw ValidationError("unsafe cell outside the grid");
  }
  if (horizon < 1) throw ValidationError("horizon must be >= 1");
  if (extra_features < 0) throw ValidationError("extra_features must be >= 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("gamma must lie in [0, 1]");
  if (!(c_max >= 0.0)) throw ValidationError("c_max must be >= 0");
}

bool GridworldSpec::is_unsafe(Cell c) const {
  return std::find(unsafe_cells.begin(), unsafe_cells.end(), c) != unsafe_cells.end();
}

GridworldSpec benchmark_gridworld() {
  GridworldSpec spec;
  spec.width = 5;
  spec.height = 5;
  spec.start_cell = {0, 0};
  spec.goal_cell = {0, 4};
  spec.unsafe_cells = {{0, 2}, {2, 1}, {2, 2}, {2, 3}};
  spec.slip_prob = 0.0;
  spec.gamma = 0.99;
  spec.c_max = 0.0;
  spec.horizon = 30;
  return spec;
}

Cell grid_move(const GridworldSpec& spec, Cell from, GridAction action) {
  const Cell d = delta(action);
  const Cell to{from.row + d.row, from.col + d.col};
  return spec.in_bounds(to) ? to : from;
}

TabularCMDP gridworld_build(const GridworldSpec& spec) {
  spec.validate();
  const int n_cells = spec.n_cells();
  const int absorbing = n_cells;
  TabularCMDP m(static_cast<std::size_t>(n_cells + 1), kGridActions);
  m.gamma = spec.gamma;
  m.c_max = spec.c_max;
  m.terminal[static_cast<std::size_t>(absorbing)] = true;
  m.mu(spec.index(spec.start_cell)) = 1.0;

  const int goal = spec.index(spec.goal_cell);
  for (int s = 0; s < n_cells; ++s) {
    const Cell c = spec.cell(s);
    const double cost = spec.is_unsafe(c) ? 1.0 : 0.0;
    for (int a = 0; a < kGridActions; ++a) {
      m.cost_gt(s, a) = cost;
      if (s == goal) {
        m.reward(s, a) = spec.goal_reward;
        m.transition[static_cast<std::size_t>(a)](s, absorbing) = 1.0;
        continue;
      }
      m.reward(s, a) = spec.step_reward;
      const auto act = static_cast<GridAction>(a);
      const auto [l1, l2] = lateral(act);
      auto& P = m.transition[static_cast<std::size_t>(a)];
      P(s, spec.index(grid_move(spec, c, act))) += 1.0 - spec.slip_prob;
      P(s, spec.index(grid_move(spec, c, l1))) += 0.5 * spec.slip_prob;
      P(s, spec.index(grid_move(spec, c, l2))) += 0.5 * spec.slip_prob;
    }
  }
  for (int a = 0; a < kGridActions; ++a) m.transition[static_cast<std::size_t>(a)](absorbing, absorbing) = 1.0;

  // Reachability of the goal from the start.
  std::vector<bool> seen(static_cast<std::size_t>(n_cells + 1), false);
  std::deque<int> frontier{spec.index(spec.start_cell)};
  seen[static_cast<std::size_t>(frontier.front())] = true;
  while (!frontier.empty()) {
    const int s = frontier.front();
    frontier.pop_front();
    for (int a = 0; a < kGridActions; ++a) {
      for (int t = 0; t <= n_cells; ++t) {
        if (m.transition[static_cast<std::size_t>(a)](s, t) > 0.0 && !seen[static_cast<std::size_t>(t)]) {
          seen[static_cast<std::size_t>(t)] = true;
          frontier.push_back(t);
        }
      }
    }
  }
  if (!seen[static_cast<std::size_t>(goal)]) log_warn("gridworld goal cell is unreachable from the start cell");

  m.validate();
  return m;
}

GridworldEnv::GridworldEnv(GridworldSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

std::size_t GridworldEnv::observation_dim() const {
  return static_cast<std::size_t>(spec_.n_cells() + spec_.extra_features);
}

StateVec GridworldEnv::observe() const {
  std::vector<double> obs(observation_dim(), 0.0);
  obs[static_cast<std::size_t>(spec_.index(pos_))] = 1.0;
  if (spec_.extra_features >= 1) obs[static_cast<std::size_t>(spec_.n_cells())] = last_move_.row;
  if (spec_.extra_features >= 2) obs[static_cast<std::size_t>(spec_.n_cells() + 1)] = last_move_.col;
  return StateVec(std::move(obs));
}

StateVec GridworldEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  pos_ = spec_.start_cell;
  last_move_ = {0, 0};
  steps_ = 0;
  finished_ = false;
  return observe();
}

int GridworldEnv::current_gt_cost() const { return spec_.is_unsafe(pos_) ? 1 : 0; }

StepResult GridworldEnv::step(const ActionVec& action) {
  if (finished_) throw StateError("step() on a finished gridworld episode; call reset()");
  const int a = action.index();
  if (a < 0 || a >= kGridActions) throw ValidationError("gridworld action out of range: " + std::to_string(a));

  StepResult res;
  res.gt_cost = current_gt_cost();
  if (pos_ == spec_.goal_cell) {
    res.reward = spec_.goal_reward;
    res.done = true;
    finished_ = true;
    ++steps_;
    res.next_obs = observe();
    return res;
  }

  auto act = static_cast<GridAction>(a);
  if (spec_.slip_prob > 0.0) {
    const double u = uniform01(rng_);
    const auto [l1, l2] = lateral(act);
    if (u < 0.5 * spec_.slip_prob) {
      act = l1;
    } else if (u < spec_.slip_prob) {
      act = l2;
    }
  }
  const Cell next = grid_move(spec_, pos_, act);
  last_move_ = {next.row - pos_.row, next.col - pos_.col};
  pos_ = next;
  res.reward = spec_.step_reward;
  ++steps_;
  if (steps_ >= spec_.horizon) {
    res.truncated = true;
    finished_ = true;
  }
  res.next_obs = observe();
  return res;
}

std::vector<double> GridworldEnv::pose() const {
  return {static_cast<double>(pos_.row), static_cast<double>(pos_.col)};
}

std::unique_ptr<Environment> GridworldEnv::clone() const { return std::make_unique<GridworldEnv>(*this); }

int GridworldEnv::cell_index_of(const StateVec& obs) const {
  if (obs.dim() != observation_dim()) throw ValidationError("observation dimension mismatch");
  const auto first = obs.values.begin();
  return static_cast<int>(std::max_element(first, first + spec_.n_cells()) - first);
}

}  // namespace rlsf::envs
