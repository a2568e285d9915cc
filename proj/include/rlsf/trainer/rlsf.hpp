#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlsf/cost_model/classifier.hpp"
#include "rlsf/feedback/feedback.hpp"
#include "rlsf/feedback/service.hpp"
#include "rlsf/sampler/simhash.hpp"
#include "rlsf/trainer/config.hpp"
#include "rlsf/trainer/ppo.hpp"
#include "rlsf/trainer/rollout.hpp"

namespace rlsf::trainer {

struct RoundReport {
  int round = 0;
  int episodes = 0;
  std::int64_t steps = 0;
  double mean_return = 0.0;
  /// Ground-truth cost events per episode (telemetry only).
  double gt_cost = 0.0;
  double cv_rate = 0.0;
  /// Cost per episode as seen by the learner.
  double inferred_cost = 0.0;
  /// Multiplier after this round's update.
  double lambda = 0.0;
  int queries = 0;
  std::size_t buffer_size = 0;

  friend bool operator==(const RoundReport&, const RoundReport&) = default;
};

std::string metrics_header();
std::string metrics_row(const RoundReport& r);

/// Training loop state. One call to run_round() performs rollouts,
/// novelty selection, evaluator labeling, buffer and density updates,
/// classifier refit, cost inference, the lambda step and the PPO update.
class RlsfTrainer {
 public:
  explicit RlsfTrainer(RunConfig config, feedback::FeedbackChannel* channel = nullptr);

  RoundReport run_round();
  bool done() const { return round_ >= config_.total_rounds(); }
  int round() const { return round_; }

  const RunConfig& config() const { return config_; }
  const envs::Environment& env() const { return *env_; }
  const Policy& policy() const { return ac_.policy; }
  const ActorCritic& actor_critic() const { return ac_; }
  const cost::CostModel& cost_model() const { return cost_model_; }
  double lambda() const { return lagrange_.lambda; }
  const feedback::FeedbackBuffer& buffer() const { return buffer_; }
  const sampler::DensityMap& density() const { return density_; }
  const sampler::SimHashProjector& projector() const { return projector_; }
  const std::vector<Rollout>& last_rollouts() const { return last_rollouts_; }
  /// (episode index, query id) for every trajectory queried last round.
  const std::vector<std::pair<std::size_t, std::uint64_t>>& last_queries() const { return last_queries_; }
  std::uint64_t trajectory_id(int round, std::size_t episode) const;

  void set_channel(feedback::FeedbackChannel* channel) { channel_ = channel; }
  void attach_feedback_log(const std::filesystem::path& path) { buffer_.attach_log_file(path); }

  EvalReport evaluate(int episodes, std::uint64_t seed, bool greedy = true) const;

  nlohmann::json checkpoint_json() const;
  void restore(const nlohmann::json& j);
  void save_checkpoint(const std::filesystem::path& path) const;
  void load_checkpoint(const std::filesystem::path& path);

 private:
  std::vector<std::vector<int>> learner_costs(const std::vector<Rollout>& rollouts) const;
  int collect_feedback(const std::vector<Rollout>& rollouts);

  RunConfig config_;
  std::unique_ptr<envs::Environment> env_;
  ActorCritic ac_;
  cost::CostModel cost_model_;
  nn::Adam classifier_opt_;
  LagrangeState lagrange_;
  sampler::SimHashProjector projector_;
  sampler::DensityMap density_;
  feedback::FeedbackBuffer buffer_;
  std::unique_ptr<feedback::ScriptedChannel> scripted_;
  feedback::FeedbackChannel* channel_ = nullptr;
  std::uint64_t next_query_id_ = 1;
  int round_ = 0;
  std::vector<Rollout> last_rollouts_;
  std::vector<std::pair<std::size_t, std::uint64_t>> last_queries_;
};

struct RunOptions {
  /// Empty: nothing is written to disk.
  std::filesystem::path run_dir;
  bool resume = false;
  /// Overrides the backend named in the config.
  feedback::FeedbackChannel* channel = nullptr;
  std::function<void(const RoundReport&)> on_round;
  /// Stop after this many rounds in this call (-1 = until the step budget is spent).
  int max_rounds = -1;
};

struct RunResult {
  std::vector<RoundReport> reports;
  EvalReport final_eval;
};

/// Runs (or resumes) a full experiment. With a run directory it writes
/// config.json, metrics.csv, feedback.log, trajectories.rec, checkpoint.json,
/// cost_model.bin and eval.json.
RunResult rlsf_run(const RunConfig& config, const RunOptions& options = {});

/// Seed used for the end-of-run greedy evaluation.
std::uint64_t eval_seed(const RunConfig& config);

}  // namespace rlsf::trainer
