// One PASS/FAIL line per primary acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "rlsf/core/rng.hpp"
#include "rlsf/cost_model/classifier.hpp"
#include "rlsf/envs/driver.hpp"
#include "rlsf/envs/gridworld.hpp"
#include "rlsf/props/props.hpp"
#include "rlsf/trainer/rlsf.hpp"

using namespace rlsf;
namespace fs = std::filesystem;

namespace {

struct Line {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<Line> g_lines;

void report(const std::string& name, bool passed, const std::string& detail) {
  g_lines.push_back({name, passed, detail});
  std::printf("%s %s: %s\n", passed ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void property(const std::string& name, const props::PropertyResult& r, double max_seconds = -1.0) {
  const bool fast = max_seconds < 0.0 || r.seconds < max_seconds;
  report(name, r.passed && fast,
         fmt("%lld trials in %.3g s; %s", static_cast<long long>(r.trials), r.seconds, r.detail.c_str()));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

trainer::RunConfig gridworld(std::uint64_t seed) {
  auto c = trainer::gridworld_defaults();
  c.seed = seed;
  c.log_level = "error";
  return c;
}

struct Run {
  trainer::RunResult result;
  double seconds = 0.0;
  int total_queries = 0;
};

Run run(const trainer::RunConfig& c, const fs::path& dir = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  Run r;
  trainer::RunOptions o;
  o.run_dir = dir;
  r.result = trainer::rlsf_run(c, o);
  r.seconds = seconds_since(t0);
  for (const auto& rep : r.result.reports) r.total_queries += rep.queries;
  return r;
}

// Cells flagged unsafe for every action, from one-hot positions plus `extra`.
std::vector<int> flagged_cells(const cost::CostModel& m, const envs::GridworldSpec& spec, std::vector<double> extra) {
  std::vector<int> out;
  for (int c = 0; c < spec.n_cells(); ++c) {
    std::vector<double> obs(static_cast<std::size_t>(spec.n_cells()), 0.0);
    obs[static_cast<std::size_t>(c)] = 1.0;
    obs.insert(obs.end(), extra.begin(), extra.end());
    int n = 0;
    for (int a = 0; a < envs::kGridActions; ++a) n += m.cost(StateVec(obs), ActionVec::discrete(a));
    if (n == envs::kGridActions) out.push_back(c);
  }
  return out;
}

bool driver_fixtures(std::string& detail) {
  using namespace envs;
  std::vector<std::string> bad;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) bad.push_back(what);
  };

  expect(kDriverEpisodeLength == 100, "episode length");
  expect(kDriverSegmentLength == 1, "segment length");
  expect(kProximityA == 0.01 && kProximityB == 30.0 && kProximityC1 == 10.0 && kProximityC2 == 2.0,
         "proximity constants");
  expect(kProximityThreshold == 0.4, "proximity threshold");
  expect(DriverEnv(DriverConfig{}).horizon() == 100, "env horizon");

  // Dynamics: the point-mass update written out directly.
  Rng rng(2024);
  for (int i = 0; i < 10000; ++i) {
    VehicleState s{standard_normal(rng), standard_normal(rng), 2 * std::numbers::pi * uniform01(rng),
                   2 * uniform01(rng) - 1};
    const double a1 = 0.6 * uniform01(rng) - 0.3, a2 = 2 * uniform01(rng) - 1, alpha = uniform01(rng);
    const auto n = advance_vehicle(s, a1, a2, alpha);
    const double v = std::min(1.0, std::max(-1.0, s.v + (a2 - alpha * s.v)));
    if (std::abs(n.x - (s.x + s.v * std::cos(s.phi))) > 1e-15 || std::abs(n.y - (s.y + s.v * std::sin(s.phi))) > 1e-15 ||
        std::abs(n.phi - (s.phi + a1)) > 1e-15 || std::abs(n.v - v) > 1e-15) {
      bad.push_back("dynamics step");
      break;
    }
  }

  DriverConfig cfg;
  cfg.alpha = 0.0;
  cfg.noise_scale = 0.0;
  auto w = make_driver_world(cfg, 1);
  w.others.clear();
  w.ego = {w.lane_centers[0], 0.0, std::numbers::pi / 2, 1.0};
  driver_step(w, {0.0, 0.0});
  expect(std::abs(w.ego.x - w.lane_centers[0]) < 1e-15 && w.ego.y == 1.0 && w.ego.phi == std::numbers::pi / 2,
         "forward motion");
  w.ego = {w.lane_centers[0], 0.0, std::numbers::pi / 2, 1.0};
  driver_step(w, {0.0, 1.0});
  expect(w.ego.v == 1.0, "clip at +1");
  expect(advance_vehicle({0, 0, 0, -1.0}, 0.0, -1.0, 0.0).v == -1.0, "clip at -1");

  // Threshold inversion against bisection on the raw formula.
  auto term = [](double dy) { return std::exp(-30.0 * 2.0 * dy * dy + 30.0 * 0.01); };
  double lo = 0.0, hi = 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (term(mid) >= 0.4 ? lo : hi) = mid;
  }
  const double closed = std::sqrt((0.01 + std::log(0.4) / -30.0) / 2.0);
  const double dy = proximity_threshold_dy();
  expect(std::abs(dy - lo) <= 1e-12 * lo && std::abs(dy - closed) <= 1e-15 * closed, "threshold inversion");
  expect(std::abs(proximity_term(0.0, 0.0) - std::exp(0.3)) <= 1e-15, "proximity at contact");

  w.ego = {w.lane_centers[0], 0.0, std::numbers::pi / 2, 0.3};
  ScriptedVehicle other;
  other.state = {w.lane_centers[0], dy * (1 - 1e-9), std::numbers::pi / 2, 0.0};
  w.others = {other};
  const int inside = driver_gt_cost(w);
  w.others[0].state.y = dy * (1 + 1e-9);
  const int outside = driver_gt_cost(w);
  expect(inside == 1 && outside == 0, "cost flips at the threshold");

  detail = fmt("dy*=%.15g (bisection %.15g)", dy, lo);
  for (const auto& b : bad) detail += "; mismatch: " + b;
  return bad.empty();
}

}  // namespace

int main() {
  const std::uint64_t seed = 0;
  const auto scratch = fs::temp_directory_path() / "rlsf_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  property("surrogate_upper_bound", props::surrogate_upper_bound(seed, 10000), 10.0);
  property("product_complement_bound", props::product_complement_bound(seed, 10000));
  property("closed_form_minimizer", props::closed_form_minimizer(seed, 20));
  property("bias_identity_and_safety", props::bias_identity_and_safety(seed, 50, 200));
  property("simhash_angular_lsh", props::simhash_lsh(seed, 100000));
  property("gradient_checks", props::gradient_checks(seed, 20));

  // End-to-end: RLSF vs known-cost PPO-Lagrangian, 3 seeds.
  const std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::vector<Run> rlsf_runs, known_runs;
  double rlsf_cv = 0, known_cv = 0, rlsf_ret = 0, known_ret = 0, slowest = 0;
  std::string per_seed;
  for (auto s : seeds) {
    rlsf_runs.push_back(run(gridworld(s)));
    auto k = gridworld(s);
    k.cost_source = trainer::CostSource::ground_truth;
    known_runs.push_back(run(k));
    const auto& a = rlsf_runs.back();
    const auto& b = known_runs.back();
    rlsf_cv += a.result.final_eval.cv_rate / 3;
    known_cv += b.result.final_eval.cv_rate / 3;
    rlsf_ret += a.result.final_eval.mean_return / 3;
    known_ret += b.result.final_eval.mean_return / 3;
    slowest = std::max({slowest, a.seconds, b.seconds});
    per_seed += fmt(" [seed %llu rlsf %.3g/%.3g%% ppo-lag %.3g/%.3g%%]", static_cast<unsigned long long>(s),
                    a.result.final_eval.mean_return, a.result.final_eval.cv_rate, b.result.final_eval.mean_return,
                    b.result.final_eval.cv_rate);
  }
  const bool e2e = rlsf_cv <= 2.0 * known_cv && rlsf_ret >= 0.7 * known_ret && slowest <= 600.0;
  report("end_to_end_gridworld", e2e,
         fmt("mean return %.4g vs %.4g (ratio %.3g), mean CV %.4g%% vs %.4g%%, slowest run %.3g s;", rlsf_ret,
             known_ret, known_ret != 0 ? rlsf_ret / known_ret : 0.0, rlsf_cv, known_cv, slowest) +
             per_seed);

  // Novelty trend on the seed-0 run.
  {
    const auto& reps = rlsf_runs[0].result.reports;
    int early = 0, late = 0;
    std::string counts;
    for (const auto& r : reps) {
      (r.round <= 10 ? early : late) += r.queries;
      counts += (counts.empty() ? "" : ",") + std::to_string(r.queries);
    }
    report("novelty_schedule_trend", reps.size() == 20 && late < early,
           fmt("rounds 1-10: %d queries, rounds 11-20: %d (per round %s)", early, late, counts.c_str()));
  }

  // Sampler ablation at equal budget: the baselines spread each novelty run's
  // total over the same rounds with a decreasing schedule.
  {
    double cv_nov = 0, cv_ent = 0, cv_rnd = 0;
    std::string budgets;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const auto& nov = rlsf_runs[i];
      const int rounds = gridworld(seeds[i]).total_rounds();
      auto ent = gridworld(seeds[i]);
      ent.sampler = sampler::SelectionMode::entropy;
      ent.schedule = {sampler::ScheduleKind::decreasing, 0, nov.total_queries, rounds};
      auto rnd = ent;
      rnd.sampler = sampler::SelectionMode::random;
      const auto re = run(ent), rr = run(rnd);
      cv_nov += nov.result.final_eval.cv_rate / 3;
      cv_ent += re.result.final_eval.cv_rate / 3;
      cv_rnd += rr.result.final_eval.cv_rate / 3;
      budgets += fmt(" [seed %llu budget %d/%d/%d]", static_cast<unsigned long long>(seeds[i]), nov.total_queries,
                     re.total_queries, rr.total_queries);
    }
    report("sampler_ablation_ordering", cv_nov <= cv_ent && cv_ent <= cv_rnd,
           fmt("mean CV novelty %.4g%% <= entropy %.4g%% <= random %.4g%%;", cv_nov, cv_ent, cv_rnd) + budgets);
  }

  {
    std::string detail;
    const bool ok = driver_fixtures(detail);
    report("driver_formula_fixtures", ok, detail);
  }

  // Cost transfer: mask the positional block on A, reuse on A' with two extra features.
  {
    auto c = gridworld(seed);
    for (std::size_t i = 0; i < 25; ++i) c.classifier_mask.push_back(i);
    const auto dir = scratch / "transfer";
    const auto r = run(c, dir);
    const auto on_a = cost::load_cost_model(dir / "cost_model.bin", 25);
    const auto on_b = cost::load_cost_model(dir / "cost_model.bin", 27);
    auto spec_b = envs::benchmark_gridworld();
    spec_b.extra_features = 2;
    const auto base = flagged_cells(on_a, envs::benchmark_gridworld(), {});
    bool identical = true;
    for (double ex : {-1.0, 0.0, 1.0})
      for (double ey : {-1.0, 0.0, 1.0}) identical = identical && flagged_cells(on_b, spec_b, {ex, ey}) == base;
    bool covers = true;
    const auto spec = envs::benchmark_gridworld();
    for (const auto& cell : spec.unsafe_cells)
      covers = covers && std::find(base.begin(), base.end(), spec.index(cell)) != base.end();
    std::string cells;
    for (int x : base) cells += (cells.empty() ? "" : ",") + std::to_string(x);
    report("cost_transfer", identical && covers,
           fmt("%d queries on A; flagged cells {%s}; identical on A' for all extra values: %s; covers true unsafe set: %s",
               r.total_queries, cells.c_str(), identical ? "yes" : "no", covers ? "yes" : "no"));
  }

  int failed = 0;
  for (const auto& l : g_lines) failed += !l.passed;
  std::printf("%zu criteria, %d failed\n", g_lines.size(), failed);
  fs::remove_all(scratch);
  return failed == 0 ? 0 : 1;
}
