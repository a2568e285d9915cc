#include "rlsf/trainer/config.hpp"

#include <fstream>
#include <set>

#include "rlsf/core/errors.hpp"

namespace rlsf::trainer {
namespace {

using nlohmann::json;

/// Visits the keys of one JSON object; anything not consumed is an error.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(where() + " must be a JSON object");
  }

  template <class T>
  void opt(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ValidationError("key '" + path_ + key + "': " + e.what());
    }
  }

  template <class T>
  void req(const char* key, T& out) {
    if (!j_.contains(key)) throw ValidationError("missing key '" + path_ + key + "'");
    opt(key, out);
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string child_path(const char* key) const { return path_ + key + "."; }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ValidationError("unknown key '" + path_ + k + "'");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : "'" + path_.substr(0, path_.size() - 1) + "'"; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

envs::Cell parse_cell(const json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 2) throw ValidationError("key '" + key + "' must be [row, col]");
  return {j[0].get<int>(), j[1].get<int>()};
}

json cell_json(envs::Cell c) { return json::array({c.row, c.col}); }

void parse_gridworld(const json& j, const std::string& path, envs::GridworldSpec& g) {
  ObjectReader r(j, path);
  r.opt("width", g.width);
  r.opt("height", g.height);
  r.opt("slip_prob", g.slip_prob);
  r.opt("horizon", g.horizon);
  r.opt("step_reward", g.step_reward);
  r.opt("goal_reward", g.goal_reward);
  r.opt("extra_features", g.extra_features);
  if (const json* c = r.child("start_cell")) g.start_cell = parse_cell(*c, path + "start_cell");
  if (const json* c = r.child("goal_cell")) g.goal_cell = parse_cell(*c, path + "goal_cell");
  if (const json* cells = r.child("unsafe_cells")) {
    if (!cells->is_array()) throw ValidationError("key '" + path + "unsafe_cells' must be a list of [row, col]");
    g.unsafe_cells.clear();
    for (const auto& c : *cells) g.unsafe_cells.push_back(parse_cell(c, path + "unsafe_cells"));
  }
  r.finish();
}

void parse_driver(const json& j, const std::string& path, envs::DriverConfig& d) {
  ObjectReader r(j, path);
  std::string scenario = envs::to_string(d.scenario);
  std::string reward_mode = envs::to_string(d.reward_mode);
  r.opt("scenario", scenario);
  r.opt("reward_mode", reward_mode);
  r.opt("alpha", d.alpha);
  r.opt("v_max", d.v_max);
  r.opt("lane_width", d.lane_width);
  r.opt("road_length", d.road_length);
  r.opt("lane_center_tol", d.lane_center_tol);
  r.opt("offroad_margin", d.offroad_margin);
  r.opt("collision_dx", d.collision_dx);
  r.opt("collision_dy", d.collision_dy);
  r.opt("noise_scale", d.noise_scale);
  r.opt("steer_limit", d.steer_limit);
  r.opt("accel_limit", d.accel_limit);
  r.opt("horizon", d.horizon);
  r.finish();
  d.scenario = envs::parse_scenario(scenario);
  d.reward_mode = envs::parse_reward_mode(reward_mode);
}

}  // namespace

RunConfig gridworld_defaults() {
  RunConfig c;
  c.env = "gridworld";
  c.gridworld = envs::benchmark_gridworld();
  c.total_steps = 40000;
  c.steps_per_round = 2000;
  c.k = 1;
  c.policy_hidden = {32};
  c.critic_hidden = {32};
  c.classifier_hidden = {};
  c.classifier_input = "state_action";
  c.classifier = {500, 512, 0.05};
  c.simhash_bits = 16;
  c.ppo.epochs = 10;
  c.ppo.minibatch = 256;
  c.ppo.lr_policy = 3e-3;
  c.ppo.lr_critic = 3e-3;
  c.lr_lambda = 0.5;
  c.eval_episodes = 5;
  return c;
}

std::string to_string(CostSource s) {
  switch (s) {
    case CostSource::inferred: return "inferred";
    case CostSource::ground_truth: return "ground_truth";
    case CostSource::none: return "none";
  }
  return "?";
}

CostSource parse_cost_source(const std::string& s) {
  if (s == "inferred") return CostSource::inferred;
  if (s == "ground_truth") return CostSource::ground_truth;
  if (s == "none") return CostSource::none;
  throw ValidationError("unknown cost_source '" + s + "' (expected inferred, ground_truth or none)");
}

void RunConfig::validate() const {
  if (env != "gridworld" && env != "driver") throw ValidationError("env must be 'gridworld' or 'driver'");
  if (env == "gridworld") gridworld.validate();
  if (env == "driver") driver.validate();
  if (total_steps < 1 || steps_per_round < 1) throw ValidationError("total_steps and steps_per_round must be positive");
  if (k < 1) throw ValidationError("segment length k must be >= 1");
  if (e < 1) throw ValidationError("novelty criterion e must be >= 1");
  if (!(c_max >= 0.0)) throw ValidationError("c_max must be >= 0");
  schedule.validate();
  if (sampler != sampler::SelectionMode::novelty && !schedule.bounded()) {
    throw ValidationError(sampler::to_string(sampler) + " sampling needs a uniform or decreasing schedule");
  }
  if (evaluator != "scripted" && evaluator != "human") throw ValidationError("evaluator must be 'scripted' or 'human'");
  if (!(feedback_timeout_s > 0.0)) throw ValidationError("feedback timeout must be positive");
  if (classifier_input != "state" && classifier_input != "state_action") {
    throw ValidationError("classifier input must be 'state' or 'state_action'");
  }
  if (classifier.epochs < 0 || classifier.batch_size == 0 || !(classifier.lr > 0.0)) {
    throw ValidationError("invalid classifier training settings");
  }
  if (simhash_bits < 1 || simhash_bits > sampler::kMaxCodeBits) throw ValidationError("simhash_bits must be in [1, 64]");
  ppo.validate();
  if (!(lr_lambda >= 0.0) || !(lambda_init >= 0.0)) throw ValidationError("lr_lambda and lambda_init must be >= 0");
  if (eval_episodes < 1) throw ValidationError("eval_episodes must be >= 1");
  if (log_level != "debug" && log_level != "info" && log_level != "warn" && log_level != "error") {
    throw ValidationError("log_level must be debug, info, warn or error");
  }
}

int RunConfig::total_rounds() const {
  return static_cast<int>((total_steps + steps_per_round - 1) / steps_per_round);
}

std::unique_ptr<envs::Environment> RunConfig::make_env() const {
  if (env == "gridworld") {
    auto spec = gridworld;
    spec.gamma = ppo.gamma;
    spec.c_max = c_max;
    return std::make_unique<envs::GridworldEnv>(spec);
  }
  return std::make_unique<envs::DriverEnv>(driver);
}

cost::FeatureLayout RunConfig::feature_layout(const envs::Environment& e) const {
  cost::FeatureLayout layout;
  layout.state_dim = e.observation_dim();
  layout.state_mask = classifier_mask;
  if (classifier_input == "state_action") {
    const auto space = e.action_space();
    layout.action = space.is_discrete() ? cost::ActionEncoding::one_hot : cost::ActionEncoding::raw;
    layout.action_size = space.is_discrete() ? static_cast<std::size_t>(space.n_discrete) : space.low.size();
  }
  layout.validate();
  return layout;
}

RunConfig parse_run_config(const json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  if (!j.contains("env")) throw ValidationError("missing key 'env'");
  const auto env = j.at("env").get<std::string>();
  RunConfig c = env == "gridworld" ? gridworld_defaults() : RunConfig{};
  ObjectReader r(j, "");
  r.req("env", c.env);
  r.req("c_max", c.c_max);
  r.opt("seed", c.seed);
  r.opt("total_steps", c.total_steps);
  r.opt("steps_per_round", c.steps_per_round);
  r.opt("k", c.k);
  r.opt("e", c.e);
  std::string cost_source = to_string(c.cost_source);
  std::string sampler_mode = sampler::to_string(c.sampler);
  r.opt("cost_source", cost_source);
  r.opt("sampler", sampler_mode);
  r.opt("evaluator", c.evaluator);
  r.opt("policy_hidden", c.policy_hidden);
  r.opt("critic_hidden", c.critic_hidden);
  r.opt("simhash_bits", c.simhash_bits);
  r.opt("gamma", c.ppo.gamma);
  r.opt("lr_lambda", c.lr_lambda);
  r.opt("lambda_init", c.lambda_init);
  r.opt("log_std_init", c.log_std_init);
  r.opt("eval_episodes", c.eval_episodes);
  r.opt("parallel", c.parallel);
  r.opt("log_trajectories", c.log_trajectories);
  r.opt("output_dir", c.output_dir);
  r.opt("log_level", c.log_level);

  if (const json* s = r.child("schedule")) {
    ObjectReader sr(*s, r.child_path("schedule"));
    std::string kind = sampler::to_string(c.schedule.kind);
    sr.opt("kind", kind);
    sr.opt("per_round", c.schedule.per_round);
    sr.opt("total_budget", c.schedule.total_budget);
    sr.opt("total_rounds", c.schedule.total_rounds);
    sr.finish();
    c.schedule.kind = sampler::parse_schedule_kind(kind);
  }
  if (const json* f = r.child("feedback")) {
    ObjectReader fr(*f, r.child_path("feedback"));
    fr.opt("timeout_s", c.feedback_timeout_s);
    fr.opt("fallback", c.feedback_fallback);
    fr.opt("host", c.feedback_host);
    fr.opt("port", c.feedback_port);
    fr.finish();
  }
  if (const json* cl = r.child("classifier")) {
    ObjectReader cr(*cl, r.child_path("classifier"));
    cr.opt("hidden", c.classifier_hidden);
    cr.opt("input", c.classifier_input);
    cr.opt("mask", c.classifier_mask);
    cr.opt("epochs", c.classifier.epochs);
    cr.opt("batch_size", c.classifier.batch_size);
    cr.opt("lr", c.classifier.lr);
    cr.finish();
  }
  if (const json* p = r.child("ppo")) {
    ObjectReader pr(*p, r.child_path("ppo"));
    pr.opt("epochs", c.ppo.epochs);
    pr.opt("minibatch", c.ppo.minibatch);
    pr.opt("lr_policy", c.ppo.lr_policy);
    pr.opt("lr_critic", c.ppo.lr_critic);
    pr.opt("gae_lambda", c.ppo.gae_lambda);
    pr.opt("clip", c.ppo.clip);
    pr.opt("entropy_coef", c.ppo.entropy_coef);
    pr.opt("normalize_advantages", c.ppo.normalize_advantages);
    pr.finish();
  }
  if (const json* g = r.child("gridworld")) parse_gridworld(*g, r.child_path("gridworld"), c.gridworld);
  if (const json* d = r.child("driver")) parse_driver(*d, r.child_path("driver"), c.driver);
  r.finish();

  c.cost_source = parse_cost_source(cost_source);
  c.sampler = sampler::parse_selection_mode(sampler_mode);
  if (c.schedule.kind == sampler::ScheduleKind::decreasing && c.schedule.total_rounds == 0) {
    c.schedule.total_rounds = c.total_rounds();
  }
  c.driver.seed = c.seed;
  c.gridworld.gamma = c.ppo.gamma;
  c.gridworld.c_max = c.c_max;
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

json to_json(const RunConfig& c) {
  json unsafe = json::array();
  for (const auto& cell : c.gridworld.unsafe_cells) unsafe.push_back(cell_json(cell));
  return {
      {"env", c.env},
      {"seed", c.seed},
      {"total_steps", c.total_steps},
      {"steps_per_round", c.steps_per_round},
      {"k", c.k},
      {"e", c.e},
      {"c_max", c.c_max},
      {"cost_source", to_string(c.cost_source)},
      {"sampler", sampler::to_string(c.sampler)},
      {"schedule",
       {{"kind", sampler::to_string(c.schedule.kind)},
        {"per_round", c.schedule.per_round},
        {"total_budget", c.schedule.total_budget},
        {"total_rounds", c.schedule.total_rounds}}},
      {"evaluator", c.evaluator},
      {"feedback",
       {{"timeout_s", c.feedback_timeout_s},
        {"fallback", c.feedback_fallback},
        {"host", c.feedback_host},
        {"port", c.feedback_port}}},
      {"policy_hidden", c.policy_hidden},
      {"critic_hidden", c.critic_hidden},
      {"classifier",
       {{"hidden", c.classifier_hidden},
        {"input", c.classifier_input},
        {"mask", c.classifier_mask},
        {"epochs", c.classifier.epochs},
        {"batch_size", c.classifier.batch_size},
        {"lr", c.classifier.lr}}},
      {"simhash_bits", c.simhash_bits},
      {"gamma", c.ppo.gamma},
      {"ppo",
       {{"epochs", c.ppo.epochs},
        {"minibatch", c.ppo.minibatch},
        {"lr_policy", c.ppo.lr_policy},
        {"lr_critic", c.ppo.lr_critic},
        {"gae_lambda", c.ppo.gae_lambda},
        {"clip", c.ppo.clip},
        {"entropy_coef", c.ppo.entropy_coef},
        {"normalize_advantages", c.ppo.normalize_advantages}}},
      {"lr_lambda", c.lr_lambda},
      {"lambda_init", c.lambda_init},
      {"log_std_init", c.log_std_init},
      {"eval_episodes", c.eval_episodes},
      {"parallel", c.parallel},
      {"log_trajectories", c.log_trajectories},
      {"output_dir", c.output_dir},
      {"log_level", c.log_level},
      {"gridworld",
       {{"width", c.gridworld.width},
        {"height", c.gridworld.height},
        {"unsafe_cells", unsafe},
        {"start_cell", cell_json(c.gridworld.start_cell)},
        {"goal_cell", cell_json(c.gridworld.goal_cell)},
        {"slip_prob", c.gridworld.slip_prob},
        {"horizon", c.gridworld.horizon},
        {"step_reward", c.gridworld.step_reward},
        {"goal_reward", c.gridworld.goal_reward},
        {"extra_features", c.gridworld.extra_features}}},
      {"driver",
       {{"scenario", envs::to_string(c.driver.scenario)},
        {"reward_mode", envs::to_string(c.driver.reward_mode)},
        {"alpha", c.driver.alpha},
        {"v_max", c.driver.v_max},
        {"lane_width", c.driver.lane_width},
        {"road_length", c.driver.road_length},
        {"lane_center_tol", c.driver.lane_center_tol},
        {"offroad_margin", c.driver.offroad_margin},
        {"collision_dx", c.driver.collision_dx},
        {"collision_dy", c.driver.collision_dy},
        {"noise_scale", c.driver.noise_scale},
        {"steer_limit", c.driver.steer_limit},
        {"accel_limit", c.driver.accel_limit},
        {"horizon", c.driver.horizon}}},
  };
}

}  // namespace rlsf::trainer
