#pragma once

#include <cstdint>
#include <vector>

#include "rlsf/core/rng.hpp"
#include "rlsf/core/tabular_cmdp.hpp"
#include "rlsf/envs/environment.hpp"

namespace rlsf::envs {

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

enum class GridAction : int { up = 0, right = 1, down = 2, left = 3 };
inline constexpr int kGridActions = 4;

struct GridworldSpec {
  int width = 5;
  int height = 5;
  std::vector<Cell> unsafe_cells;
  Cell start_cell{0, 0};
  Cell goal_cell{0, 4};
  /// Probability mass moved to the two perpendicular directions (half each).
  double slip_prob = 0.0;
  double gamma = 0.99;
  double c_max = 0.0;
  int horizon = 50;
  double step_reward = -1.0;
  double goal_reward = 10.0;
  /// Extra non-positional features appended to the observation (last move
  /// displacement row/col, then zeros). Used to build transfer variants.
  int extra_features = 0;

  void validate() const;
  int n_cells() const { return width * height; }
  int index(Cell c) const { return c.row * width + c.col; }
  Cell cell(int index) const { return {index / width, index % width}; }
  bool in_bounds(Cell c) const { return c.row >= 0 && c.row < height && c.col >= 0 && c.col < width; }
  bool is_unsafe(Cell c) const;
};

/// 5x5 grid whose shortest route crosses an unsafe cell; the safe route
/// detours one row down.
GridworldSpec benchmark_gridworld();

/// Tabular model: one state per cell plus one absorbing terminal state
/// (index n_cells) entered after acting in the goal cell.
TabularCMDP gridworld_build(const GridworldSpec& spec);

/// Cell reached by an intended move, staying in place at walls.
Cell grid_move(const GridworldSpec& spec, Cell from, GridAction action);

class GridworldEnv final : public Environment {
 public:
  explicit GridworldEnv(GridworldSpec spec);

  std::string name() const override { return "gridworld"; }
  std::size_t observation_dim() const override;
  ActionSpace action_space() const override { return {kGridActions, {}, {}}; }
  int horizon() const override { return spec_.horizon; }

  StateVec reset(std::uint64_t seed) override;
  StepResult step(const ActionVec& action) override;
  int current_gt_cost() const override;
  std::vector<double> pose() const override;
  std::unique_ptr<Environment> clone() const override;

  const GridworldSpec& spec() const { return spec_; }
  Cell position() const { return pos_; }
  /// Maps an observation back to its cell (argmax of the one-hot block).
  int cell_index_of(const StateVec& obs) const;

 private:
  StateVec observe() const;

  GridworldSpec spec_;
  Cell pos_{};
  Cell last_move_{0, 0};
  int steps_ = 0;
  bool finished_ = true;
  Rng rng_;
};

}  // namespace rlsf::envs
