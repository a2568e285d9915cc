#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rlsf/core/rng.hpp"
#include "rlsf/envs/environment.hpp"

namespace rlsf::envs {

/// Point-mass vehicle: lateral x, longitudinal y, heading phi, speed v.
struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double phi = 0.0;
  double v = 0.0;
  friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

enum class DriverScenario { blocked, lane_change, two_lane_overtake };

enum class RewardMode {
  /// Every penalty stays in the reward (plain PPO baseline).
  ppo_shaped,
  /// Off-road and backward penalties are carried by the cost instead.
  cmdp_split,
};

std::string to_string(DriverScenario s);
DriverScenario parse_scenario(const std::string& name);
std::string to_string(RewardMode m);
RewardMode parse_reward_mode(const std::string& name);

// Proximity cost constants.
inline constexpr double kProximityA = 0.01;
inline constexpr double kProximityB = 30.0;
inline constexpr double kProximityC1 = 10.0;
inline constexpr double kProximityC2 = 2.0;
inline constexpr double kProximityThreshold = 0.4;
inline constexpr int kDriverEpisodeLength = 100;
inline constexpr int kDriverSegmentLength = 1;

struct DriverConfig {
  DriverScenario scenario = DriverScenario::blocked;
  double alpha = 0.1;
  double v_max = 0.6;
  double lane_width = 0.13;
  double road_length = 30.0;
  /// Distance from the nearest lane center beyond which the lane penalty applies.
  double lane_center_tol = 0.03;
  /// Extra lateral room beyond the outermost lane edges before "off-road".
  double offroad_margin = 0.0;
  double collision_dx = 0.05;
  double collision_dy = 0.1;
  double noise_scale = 0.05;
  double steer_limit = 0.3;
  double accel_limit = 1.0;
  int horizon = kDriverEpisodeLength;
  std::uint64_t seed = 0;
  RewardMode reward_mode = RewardMode::cmdp_split;

  void validate() const;
};

/// Scripted vehicle: lane keeping toward `lane_x` at `target_speed`.
struct ScriptedVehicle {
  VehicleState state;
  double lane_x = 0.0;
  double heading = 1.5707963267948966;
  double target_speed = 0.0;
};

struct DriverWorld {
  DriverConfig config;
  VehicleState ego;
  std::vector<ScriptedVehicle> others;
  std::vector<double> lane_centers;
  int step_count = 0;
  bool terminated = false;
  Rng rng;

  std::size_t observation_dim() const { return 4 * (1 + others.size()); }
  StateVec observation() const;
  double road_half_width() const;
};

/// Builds the scenario layout and seeds the traffic noise stream.
DriverWorld make_driver_world(const DriverConfig& config, std::uint64_t seed);

/// One simulation step for the ego action (steering a1, acceleration a2).
/// The returned gt_cost is the cost of the state the action was taken from.
StepResult driver_step(DriverWorld& world, const std::array<double, 2>& action);

/// Point-mass update shared by ego and scripted vehicles.
VehicleState advance_vehicle(const VehicleState& s, double steering, double accel, double alpha);

/// exp(-b (c1 dx^2 + c2 dy^2) + b a)
double proximity_term(double dx, double dy);

/// Longitudinal gap at which the proximity term equals the threshold (dx = 0).
double proximity_threshold_dy();

bool driver_offroad(const DriverWorld& world);
bool driver_backward(const DriverWorld& world);
bool driver_off_lane_center(const DriverWorld& world);

/// 1 iff the ego is off-road, driving backward, above v_max, or too close to
/// any other vehicle.
int driver_gt_cost(const DriverWorld& world);

class DriverEnv final : public Environment {
 public:
  explicit DriverEnv(DriverConfig config);

  std::string name() const override { return "driver"; }
  std::size_t observation_dim() const override;
  ActionSpace action_space() const override;
  int horizon() const override { return config_.horizon; }

  StateVec reset(std::uint64_t seed) override;
  StepResult step(const ActionVec& action) override;
  int current_gt_cost() const override;
  std::vector<double> pose() const override;
  std::unique_ptr<Environment> clone() const override;

  const DriverWorld& world() const { return world_; }

 private:
  DriverConfig config_;
  DriverWorld world_;
};

}  // namespace rlsf::envs
