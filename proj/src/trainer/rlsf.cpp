#include "rlsf/trainer/rlsf.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "rlsf/core/errors.hpp"
#include "rlsf/core/record_format.hpp"

namespace rlsf::trainer {
namespace {

enum Stream : std::uint64_t {
  kInit = 0,
  kRollout = 1,
  kSelect = 2,
  kClassifier = 3,
  kPpo = 4,
  kEval = 9,
};

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void append_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + path.string());
  out << text;
}

LogLevel parse_level(const std::string& s) {
  if (s == "debug") return LogLevel::debug;
  if (s == "warn") return LogLevel::warn;
  if (s == "error") return LogLevel::error;
  return LogLevel::info;
}

}  // namespace

std::string metrics_header() { return "round,return,gt_cost,cv_rate,inferred_cost,lambda,queries,buffer_size"; }

std::string metrics_row(const RoundReport& r) {
  return std::to_string(r.round) + "," + fixed(r.mean_return) + "," + fixed(r.gt_cost) + "," + fixed(r.cv_rate) + "," +
         fixed(r.inferred_cost) + "," + fixed(r.lambda) + "," + std::to_string(r.queries) + "," +
         std::to_string(r.buffer_size);
}

std::uint64_t eval_seed(const RunConfig& config) { return derive_seed(config.seed, {kEval}); }

RlsfTrainer::RlsfTrainer(RunConfig config, feedback::FeedbackChannel* channel)
    : config_(std::move(config)), channel_(channel) {
  config_.validate();
  env_ = config_.make_env();
  Rng rng(derive_seed(config_.seed, {kInit}));
  const auto obs_dim = env_->observation_dim();
  Policy policy(obs_dim, env_->action_space(), config_.policy_hidden, rng, config_.log_std_init);
  Critic vr(obs_dim, config_.critic_hidden, rng);
  Critic vc(obs_dim, config_.critic_hidden, rng);
  ac_ = ActorCritic(std::move(policy), std::move(vr), std::move(vc), config_.ppo);
  cost_model_.classifier = cost::SafetyClassifier(config_.feature_layout(*env_), config_.classifier_hidden, rng);
  cost_model_.trained = false;
  classifier_opt_ = nn::Adam(cost_model_.classifier.net().num_params(), config_.classifier.lr);
  lagrange_ = {config_.lambda_init, config_.lr_lambda};
  projector_ = sampler::SimHashProjector(config_.simhash_bits, obs_dim, derive_seed(config_.seed, {kInit, 1}));
  if (!channel_) {
    scripted_ = std::make_unique<feedback::ScriptedChannel>();
    channel_ = scripted_.get();
  }
}

std::uint64_t RlsfTrainer::trajectory_id(int round, std::size_t episode) const {
  return static_cast<std::uint64_t>(round) * 1000000ull + episode;
}

int RlsfTrainer::collect_feedback(const std::vector<Rollout>& rollouts) {
  last_queries_.clear();
  if (config_.cost_source != CostSource::inferred) return 0;

  std::vector<Trajectory> trajs;
  trajs.reserve(rollouts.size());
  for (const auto& r : rollouts) trajs.push_back(r.traj);

  Rng select_rng(derive_seed(config_.seed, {kSelect, static_cast<std::uint64_t>(round_)}));
  sampler::SelectionContext ctx;
  ctx.density = &density_;
  ctx.projector = &projector_;
  ctx.e = config_.e;
  ctx.round = round_;
  ctx.rng = &select_rng;
  ctx.scorer = [this](const Trajectory& t) { return sampler::mean_entropy(cost_model_.classifier, t); };
  const auto picked = sampler::select_queries(trajs, config_.sampler, config_.schedule, ctx);
  if (picked.empty()) return 0;

  std::vector<feedback::FeedbackQuery> queries;
  queries.reserve(picked.size());
  for (auto i : picked) {
    const auto& r = rollouts[i];
    queries.push_back(feedback::make_query(next_query_id_++, round_, trajectory_id(round_, i), r.traj, config_.k,
                                           r.gt_costs, r.poses));
    last_queries_.emplace_back(i, queries.back().query_id);
  }
  for (const auto& q : queries) buffer_.add_query(q);
  const auto answers = channel_->collect(queries, round_);
  if (answers.size() != queries.size()) throw StateError("evaluator returned the wrong number of answers");
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (answers[i].query_id != queries[i].query_id) throw StateError("evaluator answers out of order");
    buffer_.add_answer(answers[i]);
    sampler::record_feedback_densities(density_, projector_, queries[i].record.trajectory, queries[i].record.segments);
  }
  return static_cast<int>(queries.size());
}

std::vector<std::vector<int>> RlsfTrainer::learner_costs(const std::vector<Rollout>& rollouts) const {
  std::vector<std::vector<int>> costs;
  costs.reserve(rollouts.size());
  for (const auto& r : rollouts) {
    switch (config_.cost_source) {
      case CostSource::ground_truth: costs.push_back(r.gt_costs); break;
      case CostSource::none: costs.emplace_back(r.size(), 0); break;
      case CostSource::inferred:
        costs.push_back(cost_model_.trained ? cost::infer_cost(cost_model_, r.traj) : std::vector<int>(r.size(), 0));
        break;
    }
  }
  return costs;
}

RoundReport RlsfTrainer::run_round() {
  if (done()) throw StateError("step budget exhausted");
  ++round_;
  const auto exec = config_.parallel ? nn::ExecutionPolicy::parallel : nn::ExecutionPolicy::serial;

  RolloutOptions ro;
  ro.n_steps = std::min(config_.steps_per_round, config_.total_steps - (round_ - 1) * config_.steps_per_round);
  ro.seed = derive_seed(config_.seed, {kRollout, static_cast<std::uint64_t>(round_)});
  ro.policy_version = round_;
  ro.record_poses = true;
  last_rollouts_ = collect_rollouts(ac_.policy, *env_, ro, exec);

  RoundReport rep;
  rep.round = round_;
  rep.queries = collect_feedback(last_rollouts_);

  if (config_.cost_source == CostSource::inferred && !buffer_.empty()) {
    Rng crng(derive_seed(config_.seed, {kClassifier, static_cast<std::uint64_t>(round_)}));
    cost::train_classifier(cost_model_.classifier, buffer_.examples(), config_.classifier, crng, &classifier_opt_);
    cost_model_.trained = true;
  }

  const auto costs = learner_costs(last_rollouts_);
  double cost_sum = 0.0;
  for (const auto& c : costs) cost_sum += std::accumulate(c.begin(), c.end(), 0.0);
  const double episode_cost = cost_sum / static_cast<double>(last_rollouts_.size());
  if (config_.cost_source != CostSource::none) lagrange_.update(episode_cost, config_.c_max);

  Rng prng(derive_seed(config_.seed, {kPpo, static_cast<std::uint64_t>(round_)}));
  ppo_lagrangian_update(ac_, last_rollouts_, costs, lagrange_.lambda, config_.ppo, prng, exec);

  const auto summary = summarize(last_rollouts_);
  rep.episodes = summary.episodes;
  for (const auto& r : last_rollouts_) rep.steps += static_cast<std::int64_t>(r.size());
  rep.mean_return = summary.mean_return;
  rep.gt_cost = summary.mean_gt_cost;
  rep.cv_rate = summary.cv_rate;
  rep.inferred_cost = episode_cost;
  rep.lambda = lagrange_.lambda;
  rep.buffer_size = buffer_.size();
  return rep;
}

EvalReport RlsfTrainer::evaluate(int episodes, std::uint64_t seed, bool greedy) const {
  return evaluate_policy(ac_.policy, *env_, episodes, seed, greedy);
}

nlohmann::json RlsfTrainer::checkpoint_json() const {
  const auto& net = cost_model_.classifier.net();
  return {{"format", "rlsf-checkpoint"},
          {"version", 1},
          {"config", to_json(config_)},
          {"round", round_},
          {"lambda", lagrange_.lambda},
          {"actor_critic", ac_.to_json()},
          {"classifier", std::vector<double>(net.params().begin(), net.params().end())},
          {"classifier_trained", cost_model_.trained},
          {"classifier_opt", classifier_opt_.to_json()},
          {"projector_seed", projector_.seed()},
          {"projector_bits", projector_.n_bits()},
          {"density", density_.to_json()},
          {"next_query_id", next_query_id_},
          {"feedback_log", buffer_.log_text()}};
}

void RlsfTrainer::restore(const nlohmann::json& j) {
  if (j.value("format", "") != "rlsf-checkpoint") throw ValidationError("not an rlsf checkpoint");
  if (j.at("projector_seed").get<std::uint64_t>() != projector_.seed() ||
      j.at("projector_bits").get<int>() != projector_.n_bits()) {
    throw ValidationError("checkpoint was written with a different hash projector");
  }
  round_ = j.at("round").get<int>();
  lagrange_.lambda = j.at("lambda").get<double>();
  ac_.load_json(j.at("actor_critic"));
  const auto params = j.at("classifier").get<std::vector<double>>();
  if (params.size() != cost_model_.classifier.net().num_params()) {
    throw ValidationError("checkpoint classifier size mismatch");
  }
  cost_model_.classifier.net().set_params(params);
  cost_model_.trained = j.at("classifier_trained").get<bool>();
  classifier_opt_ = nn::Adam::from_json(j.at("classifier_opt"));
  density_ = sampler::DensityMap::from_json(j.at("density"));
  next_query_id_ = j.at("next_query_id").get<std::uint64_t>();
  buffer_ = feedback::FeedbackBuffer::rebuild(j.at("feedback_log").get<std::string>());
  last_rollouts_.clear();
  last_queries_.clear();
}

void RlsfTrainer::save_checkpoint(const std::filesystem::path& path) const {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  write_text(tmp, checkpoint_json().dump());
  std::filesystem::rename(tmp, path);
}

void RlsfTrainer::load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  restore(nlohmann::json::parse(in));
}

RunResult rlsf_run(const RunConfig& config, const RunOptions& options) {
  set_log_level(parse_level(config.log_level));
  const bool on_disk = !options.run_dir.empty();
  const auto& dir = options.run_dir;

  std::unique_ptr<feedback::FeedbackService> service;
  std::unique_ptr<feedback::ServiceChannel> human;
  feedback::FeedbackChannel* channel = options.channel;
  if (!channel && config.evaluator == "human" && config.cost_source == CostSource::inferred) {
    service = std::make_unique<feedback::FeedbackService>();
    const int port = service->start(config.feedback_host, config.feedback_port);
    log(LogLevel::warn, "feedback service listening on http://" + config.feedback_host + ":" + std::to_string(port));
    feedback::CollectOptions co;
    co.timeout = std::chrono::milliseconds(static_cast<std::int64_t>(config.feedback_timeout_s * 1000.0));
    co.on_timeout = config.feedback_fallback ? feedback::TimeoutPolicy::fallback : feedback::TimeoutPolicy::abort;
    human = std::make_unique<feedback::ServiceChannel>(*service, co);
    channel = human.get();
  }

  RlsfTrainer trainer(config, channel);
  if (on_disk) {
    std::filesystem::create_directories(dir);
    if (options.resume) {
      trainer.load_checkpoint(dir / "checkpoint.json");
      write_text(dir / "feedback.log", trainer.buffer().log_text());
    } else {
      write_text(dir / "config.json", to_json(config).dump(2) + "\n");
      write_text(dir / "metrics.csv", metrics_header() + "\n");
      write_text(dir / "feedback.log", "");
      write_text(dir / "trajectories.rec", "");
    }
    trainer.attach_feedback_log(dir / "feedback.log");
  }

  RunResult result;
  int rounds_this_call = 0;
  while (!trainer.done() && (options.max_rounds < 0 || rounds_this_call < options.max_rounds)) {
    RoundReport rep;
    try {
      rep = trainer.run_round();
    } catch (const NumericalError& e) {
      if (on_disk) {
        auto dump = trainer.checkpoint_json();
        dump["error"] = e.what();
        write_text(dir / "nan_dump.json", dump.dump());
      }
      throw;
    }
    ++rounds_this_call;
    result.reports.push_back(rep);
    if (on_disk) {
      append_text(dir / "metrics.csv", metrics_row(rep) + "\n");
      if (config.log_trajectories) {
        std::ostringstream os;
        const auto& rollouts = trainer.last_rollouts();
        std::map<std::size_t, std::uint64_t> queried(trainer.last_queries().begin(), trainer.last_queries().end());
        for (std::size_t i = 0; i < rollouts.size(); ++i) {
          TrajectoryRecord rec;
          rec.trajectory_id = trainer.trajectory_id(rep.round, i);
          rec.trajectory = rollouts[i].traj;
          rec.round = rep.round;
          rec.poses = rollouts[i].poses;
          rec.segments = split_into_segments(rec.trajectory, config.k, rec.trajectory_id);
          rec.labels.assign(rec.segments.size(), std::nullopt);
          if (auto it = queried.find(i); it != queried.end()) {
            rec.query_id = it->second;
            if (auto ans = trainer.buffer().answer(it->second)) {
              for (std::size_t s = 0; s < ans->labels.size(); ++s) rec.labels[s] = ans->labels[s];
            }
          }
          write_record(os, rec);
        }
        append_text(dir / "trajectories.rec", os.str());
      }
      trainer.save_checkpoint(dir / "checkpoint.json");
      if (trainer.cost_model().trained) {
        cost::save_cost_model(trainer.cost_model(), dir / "cost_model.bin", to_json(config).dump());
      }
    }
    if (options.on_round) options.on_round(rep);
    log_info(metrics_row(rep));
  }

  result.final_eval = trainer.evaluate(config.eval_episodes, eval_seed(config));
  if (on_disk) {
    const auto& ev = result.final_eval;
    write_text(dir / "eval.json", nlohmann::json{{"episodes", ev.episodes},
                                                 {"mean_return", ev.mean_return},
                                                 {"mean_gt_cost", ev.mean_gt_cost},
                                                 {"cv_rate", ev.cv_rate},
                                                 {"mean_length", ev.mean_length},
                                                 {"greedy", true}}
                                          .dump(2) +
                                      "\n");
  }
  return result;
}

}  // namespace rlsf::trainer
