#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rlsf/core/errors.hpp"
#include "rlsf/core/record_format.hpp"
#include "rlsf/props/props.hpp"
#include "rlsf/trainer/rlsf.hpp"

namespace rlsf::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Relative run directories live under $RLSF_RUN_ROOT when it is set.
fs::path resolve_run_dir(const std::string& dir) {
  fs::path p(dir);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("RLSF_RUN_ROOT"); root && *root) return fs::path(root) / p;
  return p;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct TrainArgs {
  std::string config;
  std::string run_dir;
  bool resume = false;
  std::optional<std::string> evaluator;
  std::optional<std::uint64_t> seed;
  std::optional<int> e;
  std::optional<std::string> cost_source;
  std::optional<std::string> sampler;
  std::optional<std::string> host;
  std::optional<int> port;
  std::optional<double> timeout_s;
  bool fallback = false;
  int max_rounds = -1;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  json j = read_json(a.config);
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  // Flags override the file before validation so the same checks apply.
  if (a.evaluator) j["evaluator"] = *a.evaluator;
  if (a.seed) j["seed"] = *a.seed;
  if (a.e) j["e"] = *a.e;
  if (a.cost_source) j["cost_source"] = *a.cost_source;
  if (a.sampler) j["sampler"] = *a.sampler;
  if (a.host) j["feedback"]["host"] = *a.host;
  if (a.port) j["feedback"]["port"] = *a.port;
  if (a.timeout_s) j["feedback"]["timeout_s"] = *a.timeout_s;
  if (a.fallback) j["feedback"]["fallback"] = true;

  trainer::RunConfig config;
  fs::path dir;
  trainer::RunOptions opts;
  if (a.resume) {
    dir = resolve_run_dir(a.run_dir.empty() ? j.value("output_dir", std::string("runs/run")) : a.run_dir);
    // The snapshot is authoritative on resume; flags may only change the evaluator backend.
    json snap = read_json(dir / "config.json");
    for (const char* key : {"evaluator", "feedback", "log_level"}) {
      if (j.contains(key)) snap[key] = j[key];
    }
    config = trainer::parse_run_config(snap);
  } else {
    config = trainer::parse_run_config(j);
    dir = resolve_run_dir(a.run_dir.empty() ? config.output_dir : a.run_dir);
  }
  opts.run_dir = dir;
  opts.resume = a.resume;
  opts.max_rounds = a.max_rounds;
  const auto res = trainer::rlsf_run(config, opts);
  out << json{{"run_dir", dir.string()},
              {"rounds", res.reports.size()},
              {"final_return", res.final_eval.mean_return},
              {"final_cv_rate", res.final_eval.cv_rate},
              {"final_gt_cost", res.final_eval.mean_gt_cost}}
             .dump()
      << "\n";
  return kOk;
}

int cmd_props(std::uint64_t seed, std::optional<std::int64_t> trials, const std::string& fault, bool json_only,
              std::ostream& out, std::ostream& err) {
  props::PropsOptions o;
  o.seed = seed;
  o.trials = trials;
  if (trials && *trials < 0) throw ValidationError("trials must be non-negative");
  if (fault == "sign-flip") {
    o.surrogate = props::sign_flipped(cost::segment_surrogate_loss);
  } else if (!fault.empty()) {
    throw ValidationError("unknown fault '" + fault + "' (expected sign-flip)");
  }
  const auto results = props::run_all(o);
  if (!json_only) {
    for (const auto& r : results) {
      err << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.trials << " trials, " << r.seconds << " s) "
          << r.detail << "\n";
    }
  }
  out << props::report_json(results).dump(2) << "\n";
  return props::all_passed(results) ? kOk : kFault;
}

int cmd_replay(const std::string& run_dir, std::uint64_t id, const std::string& out_path, std::ostream& out) {
  const fs::path dir = resolve_run_dir(run_dir);
  const auto records = parse_records(read_text(dir / "trajectories.rec"));
  for (const auto& rec : records) {
    if (rec.trajectory_id != id) continue;
    const std::string text = to_record_string(rec);
    if (out_path.empty() || out_path == "-") {
      out << text;
    } else {
      std::ofstream f(out_path, std::ios::binary);
      if (!f) throw ValidationError("cannot write " + out_path);
      f << text;
    }
    return kOk;
  }
  throw ValidationError("trajectory " + std::to_string(id) + " not found in " + (dir / "trajectories.rec").string());
}

int cmd_eval(const std::string& run_dir, std::optional<int> episodes, std::optional<std::uint64_t> seed,
             bool stochastic, std::ostream& out) {
  const fs::path dir = resolve_run_dir(run_dir);
  const auto config = trainer::parse_run_config(read_json(dir / "config.json"));
  trainer::RlsfTrainer t(config);
  t.load_checkpoint(dir / "checkpoint.json");
  const int n = episodes.value_or(config.eval_episodes);
  if (n < 1) throw ValidationError("episodes must be positive");
  const auto ev = t.evaluate(n, seed.value_or(trainer::eval_seed(config)), !stochastic);
  out << json{{"round", t.round()},
              {"episodes", ev.episodes},
              {"mean_return", ev.mean_return},
              {"mean_gt_cost", ev.mean_gt_cost},
              {"cv_rate", ev.cv_rate},
              {"mean_length", ev.mean_length},
              {"greedy", !stochastic}}
             .dump(2)
      << "\n";
  return kOk;
}

void add_train_flags(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("--config", a.config, "run config (JSON)")->required();
  cmd->add_option("--run-dir", a.run_dir, "output directory (default: config output_dir)");
  cmd->add_flag("--resume", a.resume, "continue from the run directory checkpoint");
  cmd->add_option("--seed", a.seed);
  cmd->add_option("--e", a.e, "novelty criterion");
  cmd->add_option("--cost-source", a.cost_source, "inferred | ground_truth | none");
  cmd->add_option("--sampler", a.sampler, "novelty | random | entropy");
  cmd->add_option("--max-rounds", a.max_rounds, "stop after this many rounds");
  cmd->add_option("--timeout", a.timeout_s, "seconds to wait for human labels per round");
  cmd->add_flag("--fallback", a.fallback, "fill unanswered queries with scripted labels on timeout");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"RLSF: safe RL from evaluator segment feedback"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "run RLSF (or a baseline) on a config");
  add_train_flags(c_train, train);
  c_train->add_option("--evaluator", train.evaluator, "scripted | human");

  TrainArgs serve;
  auto* c_serve = app.add_subcommand("serve-feedback", "train with a human evaluator behind the HTTP feedback service");
  add_train_flags(c_serve, serve);
  c_serve->add_option("--host", serve.host);
  c_serve->add_option("--port", serve.port, "0 picks a free port");

  std::uint64_t props_seed = 0;
  std::optional<std::int64_t> props_trials;
  std::string fault;
  bool json_only = false;
  auto* c_props = app.add_subcommand("props", "run the property suites");
  c_props->add_option("--seed", props_seed);
  c_props->add_option("--trials", props_trials, "override every suite's trial count");
  c_props->add_option("--inject-fault", fault, "sign-flip");
  c_props->add_flag("--json", json_only, "suppress the text summary");

  std::string run_dir, out_path;
  std::uint64_t traj_id = 0;
  auto* c_replay = app.add_subcommand("replay", "export one logged trajectory as a record");
  c_replay->add_option("--run-dir", run_dir)->required();
  c_replay->add_option("--trajectory", traj_id)->required();
  c_replay->add_option("--out", out_path, "file (default stdout)");

  std::optional<int> episodes;
  std::optional<std::uint64_t> eval_seed;
  bool stochastic = false;
  auto* c_eval = app.add_subcommand("eval", "evaluate the checkpointed policy on ground-truth metrics");
  c_eval->add_option("--run-dir", run_dir)->required();
  c_eval->add_option("--episodes", episodes);
  c_eval->add_option("--seed", eval_seed);
  c_eval->add_flag("--stochastic", stochastic, "sample actions instead of acting greedily");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }

  try {
    if (*c_train) return cmd_train(train, out);
    if (*c_serve) {
      serve.evaluator = "human";
      return cmd_train(serve, out);
    }
    if (*c_props) return cmd_props(props_seed, props_trials, fault, json_only, out, err);
    if (*c_replay) return cmd_replay(run_dir, traj_id, out_path, out);
    if (*c_eval) return cmd_eval(run_dir, episodes, eval_seed, stochastic, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    err << "fault: " << e.what() << "\n";
    return kFault;
  }
  return kFault;
}

}  // namespace rlsf::cli
