#include "rlsf/envs/driver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "rlsf/core/errors.hpp"

namespace rlsf::envs {
namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;
constexpr double kLaneGain = 2.0;
constexpr double kSpeedGain = 0.5;

double noise(DriverWorld& w) {
  return std::uniform_real_distribution<double>(-w.config.noise_scale, w.config.noise_scale)(w.rng);
}

ScriptedVehicle scripted(double lane_x, double y, double speed, double heading = kHalfPi) {
  ScriptedVehicle v;
  v.state = {lane_x, y, heading, speed};
  v.lane_x = lane_x;
  v.heading = heading;
  v.target_speed = speed;
  return v;
}

std::vector<double> lane_layout(int n_lanes, double width) {
  std::vector<double> centers;
  const double offset = 0.5 * (n_lanes - 1) * width;
  for (int i = 0; i < n_lanes; ++i) centers.push_back(i * width - offset);
  return centers;
}

bool collides(const DriverConfig& cfg, const VehicleState& before_ego, const VehicleState& ego,
              const VehicleState& before_other, const VehicleState& other) {
  const double dx = other.x - ego.x;
  const double dy = other.y - ego.y;
  if (std::abs(dx) < cfg.collision_dx && std::abs(dy) < cfg.collision_dy) return true;
  // Vehicles that swapped longitudinal order while laterally overlapping passed through each other.
  const double dy_before = before_other.y - before_ego.y;
  const double dx_before = before_other.x - before_ego.x;
  const bool lateral_overlap = std::abs(dx) < cfg.collision_dx || std::abs(dx_before) < cfg.collision_dx;
  return lateral_overlap && std::signbit(dy) != std::signbit(dy_before);
}

}  // namespace

std::string to_string(DriverScenario s) {
  switch (s) {
    case DriverScenario::blocked: return "blocked";
    case DriverScenario::lane_change: return "lane_change";
    case DriverScenario::two_lane_overtake: return "two_lane_overtake";
  }
  return "?";
}

DriverScenario parse_scenario(const std::string& name) {
  if (name == "blocked") return DriverScenario::blocked;
  if (name == "lane_change") return DriverScenario::lane_change;
  if (name == "two_lane_overtake") return DriverScenario::two_lane_overtake;
  throw ValidationError("unknown driver scenario '" + name + "'");
}

std::string to_string(RewardMode m) { return m == RewardMode::ppo_shaped ? "ppo_shaped" : "cmdp_split"; }

RewardMode parse_reward_mode(const std::string& name) {
  if (name == "ppo_shaped") return RewardMode::ppo_shaped;
  if (name == "cmdp_split") return RewardMode::cmdp_split;
  throw ValidationError("unknown reward mode '" + name + "'");
}

void DriverConfig::validate() const {
  if (!(alpha >= 0.0)) throw ValidationError("alpha must be >= 0");
  if (!(v_max > 0.0 && v_max <= 1.0)) throw ValidationError("v_max must lie in (0, 1]");
  if (!(lane_width > 0.0)) throw ValidationError("lane_width must be > 0");
  if (!(road_length > 0.0)) throw ValidationError("road_length must be > 0");
  if (!(noise_scale >= 0.0)) throw ValidationError("noise_scale must be >= 0");
  if (!(steer_limit > 0.0) || !(accel_limit > 0.0)) throw ValidationError("action limits must be > 0");
  if (horizon < 1) throw ValidationError("horizon must be >= 1");
}

StateVec DriverWorld::observation() const {
  std::vector<double> obs;
  obs.reserve(observation_dim());
  auto push = [&](const VehicleState& s) {
    obs.push_back(s.x);
    obs.push_back(s.y);
    obs.push_back(s.phi);
    obs.push_back(s.v);
  };
  push(ego);
  for (const auto& o : others) push(o.state);
  return StateVec(std::move(obs));
}

double DriverWorld::road_half_width() const {
  return 0.5 * static_cast<double>(lane_centers.size()) * config.lane_width + config.offroad_margin;
}

DriverWorld make_driver_world(const DriverConfig& config, std::uint64_t seed) {
  config.validate();
  DriverWorld w;
  w.config = config;
  w.rng.seed(seed);
  const double lw = config.lane_width;
  switch (config.scenario) {
    case DriverScenario::blocked: {
      // Three lanes; the ego lane is blocked by a stopped car.
      w.lane_centers = lane_layout(3, lw);
      w.ego = {w.lane_centers[1], 0.0, kHalfPi, 0.3};
      w.others.push_back(scripted(w.lane_centers[1], 6.0, 0.0));
      w.others.push_back(scripted(w.lane_centers[0], 2.0, 0.3));
      w.others.push_back(scripted(w.lane_centers[2], 9.0, 0.35));
      break;
    }
    case DriverScenario::lane_change: {
      // Slow car ahead in the ego lane, faster traffic approaching in the target lane.
      w.lane_centers = lane_layout(2, lw);
      w.ego = {w.lane_centers[1], 0.0, kHalfPi, 0.3};
      w.others.push_back(scripted(w.lane_centers[1], 4.0, 0.2));
      w.others.push_back(scripted(w.lane_centers[0], -2.0, 0.5));
      break;
    }
    case DriverScenario::two_lane_overtake: {
      // Slower car ahead; oncoming traffic in the passing lane.
      w.lane_centers = lane_layout(2, lw);
      w.ego = {w.lane_centers[1], 0.0, kHalfPi, 0.3};
      w.others.push_back(scripted(w.lane_centers[1], 3.0, 0.25));
      w.others.push_back(scripted(w.lane_centers[0], 25.0, 0.3, -kHalfPi));
      break;
    }
  }
  return w;
}

VehicleState advance_vehicle(const VehicleState& s, double steering, double accel, double alpha) {
  VehicleState n;
  n.x = s.x + s.v * std::cos(s.phi);
  n.y = s.y + s.v * std::sin(s.phi);
  n.phi = s.phi + steering;
  n.v = std::clamp(s.v + accel - alpha * s.v, -1.0, 1.0);
  return n;
}

double proximity_term(double dx, double dy) {
  return std::exp(-kProximityB * (kProximityC1 * dx * dx + kProximityC2 * dy * dy) + kProximityB * kProximityA);
}

double proximity_threshold_dy() {
  return std::sqrt((kProximityA + std::log(kProximityThreshold) / (-kProximityB)) / kProximityC2);
}

bool driver_offroad(const DriverWorld& world) { return std::abs(world.ego.x) > world.road_half_width(); }

bool driver_backward(const DriverWorld& world) { return world.ego.v * std::sin(world.ego.phi) < 0.0; }

bool driver_off_lane_center(const DriverWorld& world) {
  double best = std::numeric_limits<double>::infinity();
  for (double c : world.lane_centers) best = std::min(best, std::abs(world.ego.x - c));
  return best > world.config.lane_center_tol;
}

int driver_gt_cost(const DriverWorld& world) {
  if (driver_offroad(world) || driver_backward(world) || world.ego.v > world.config.v_max) return 1;
  for (const auto& o : world.others) {
    if (proximity_term(o.state.x - world.ego.x, o.state.y - world.ego.y) >= kProximityThreshold) return 1;
  }
  return 0;
}

StepResult driver_step(DriverWorld& world, const std::array<double, 2>& action) {
  if (world.terminated) throw StateError("step() on a terminated driver world; call reset()");
  const auto& cfg = world.config;
  constexpr double kTol = 1e-12;
  if (!std::isfinite(action[0]) || !std::isfinite(action[1]) || std::abs(action[0]) > cfg.steer_limit + kTol ||
      std::abs(action[1]) > cfg.accel_limit + kTol) {
    throw ValidationError("driver action outside declared bounds");
  }

  StepResult res;
  res.gt_cost = driver_gt_cost(world);

  const VehicleState ego_before = world.ego;
  std::vector<VehicleState> others_before;
  others_before.reserve(world.others.size());
  for (const auto& o : world.others) others_before.push_back(o.state);

  world.ego = advance_vehicle(world.ego, action[0], action[1], cfg.alpha);
  for (auto& o : world.others) {
    const double dir = std::sin(o.heading) >= 0.0 ? 1.0 : -1.0;
    const double desired = o.heading + dir * std::clamp(kLaneGain * (o.state.x - o.lane_x), -0.3, 0.3);
    const double steer = std::clamp(desired - o.state.phi, -cfg.steer_limit, cfg.steer_limit) + noise(world);
    const double accel = cfg.alpha * o.state.v + kSpeedGain * (o.target_speed - o.state.v) + noise(world);
    o.state = advance_vehicle(o.state, steer, accel, cfg.alpha);
  }
  ++world.step_count;

  bool collision = false;
  for (std::size_t i = 0; i < world.others.size(); ++i) {
    if (collides(cfg, ego_before, world.ego, others_before[i], world.others[i].state)) collision = true;
  }

  double reward = 10.0 * (world.ego.y - ego_before.y);
  const bool shaped = cfg.reward_mode == RewardMode::ppo_shaped;
  if (shaped && driver_offroad(world)) reward -= 1.0;
  if (shaped && driver_backward(world)) reward -= 1.0;
  if (driver_off_lane_center(world)) reward -= 1.0;
  if (collision) reward -= 100.0;
  res.reward = reward;

  if (collision || world.ego.y >= cfg.road_length) {
    res.done = true;
    world.terminated = true;
  } else if (world.step_count >= cfg.horizon) {
    res.truncated = true;
    world.terminated = true;
  }
  res.next_obs = world.observation();
  return res;
}

DriverEnv::DriverEnv(DriverConfig config) : config_(config), world_(make_driver_world(config, config.seed)) {
  world_.terminated = true;
}

std::size_t DriverEnv::observation_dim() const { return world_.observation_dim(); }

ActionSpace DriverEnv::action_space() const {
  return {0, {-config_.steer_limit, -config_.accel_limit}, {config_.steer_limit, config_.accel_limit}};
}

StateVec DriverEnv::reset(std::uint64_t seed) {
  world_ = make_driver_world(config_, seed);
  return world_.observation();
}

StepResult DriverEnv::step(const ActionVec& action) {
  if (action.dim() != 2) throw ValidationError("driver action must have two components");
  return driver_step(world_, {action.values[0], action.values[1]});
}

int DriverEnv::current_gt_cost() const { return driver_gt_cost(world_); }

std::vector<double> DriverEnv::pose() const { return world_.observation().values; }

std::unique_ptr<Environment> DriverEnv::clone() const { return std::make_unique<DriverEnv>(*this); }

}  // namespace rlsf::envs
