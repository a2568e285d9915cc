#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlsf/cost_model/classifier.hpp"
#include "rlsf/envs/driver.hpp"
#include "rlsf/envs/gridworld.hpp"
#include "rlsf/sampler/selection.hpp"
#include "rlsf/trainer/ppo.hpp"

namespace rlsf::trainer {

enum class CostSource {
  /// Classifier trained from evaluator feedback (RLSF).
  inferred,
  /// Environment cost handed to the learner (known-cost PPO-Lagrangian baseline).
  ground_truth,
  /// No cost signal at all (plain PPO).
  none,
};

std::string to_string(CostSource s);
CostSource parse_cost_source(const std::string& s);

struct RunConfig {
  std::string env = "gridworld";
  envs::GridworldSpec gridworld = envs::benchmark_gridworld();
  envs::DriverConfig driver;

  std::uint64_t seed = 0;
  std::int64_t total_steps = 20000;
  std::int64_t steps_per_round = 1000;
  /// Segment length.
  std::int64_t k = 1;
  /// Novelty criterion (number of unseen states).
  int e = 1;
  double c_max = 0.0;

  CostSource cost_source = CostSource::inferred;
  sampler::SelectionMode sampler = sampler::SelectionMode::novelty;
  sampler::QuerySchedule schedule;

  std::string evaluator = "scripted";
  double feedback_timeout_s = 1800.0;
  bool feedback_fallback = false;
  std::string feedback_host = "127.0.0.1";
  int feedback_port = 0;

  std::vector<std::size_t> policy_hidden{64};
  std::vector<std::size_t> critic_hidden{64};
  std::vector<std::size_t> classifier_hidden{64};
  /// "state" or "state_action".
  std::string classifier_input = "state";
  std::vector<std::size_t> classifier_mask;
  cost::TrainConfig classifier;
  int simhash_bits = 24;

  PpoConfig ppo;
  double lr_lambda = 0.01;
  double lambda_init = 0.0;
  double log_std_init = -0.5;

  int eval_episodes = 10;
  bool parallel = true;
  bool log_trajectories = true;
  std::string output_dir = "runs/run";
  std::string log_level = "info";

  void validate() const;
  int total_rounds() const;
  std::unique_ptr<envs::Environment> make_env() const;
  cost::FeatureLayout feature_layout(const envs::Environment& env) const;
};

/// Scaled-down settings for the 5x5 benchmark gridworld.
RunConfig gridworld_defaults();

/// Strict parse: unknown keys are rejected with their path, and `env` and
/// `c_max` are required. Library defaults fill unspecified keys, with per-env
/// overrides for the gridworld (see configs/).
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

}  // namespace rlsf::trainer
