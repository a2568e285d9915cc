#include <doctest.h>

#include <bit>
#include <cmath>
#include <numbers>
#include <set>

#include "rlsf/core/errors.hpp"
#include "rlsf/cost_model/classifier.hpp"
#include "rlsf/envs/gridworld.hpp"
#include "rlsf/sampler/selection.hpp"
#include "rlsf/sampler/simhash.hpp"
#include "test_util.hpp"

using namespace rlsf;
using namespace rlsf::sampler;

namespace {

Trajectory traj_from_states(const std::vector<std::vector<double>>& states) {
  Trajectory tr;
  for (std::size_t t = 0; t < states.size(); ++t)
    tr.transitions.push_back({static_cast<std::int64_t>(t), StateVec(states[t]), ActionVec::discrete(0), 0.0,
                              t + 1 == states.size()});
  return tr;
}

Trajectory random_traj(Rng& rng, std::size_t dim, int len) {
  std::vector<std::vector<double>> s(static_cast<std::size_t>(len), std::vector<double>(dim));
  for (auto& v : s)
    for (double& x : v) x = standard_normal(rng);
  return traj_from_states(s);
}

Trajectory gridworld_walk(const envs::GridworldSpec& spec, std::uint64_t seed) {
  envs::GridworldEnv env(spec);
  Rng rng(seed);
  Trajectory tr;
  auto obs = env.reset(seed);
  for (int t = 0; t < spec.horizon; ++t) {
    const int a = std::uniform_int_distribution<int>(0, 3)(rng);
    const auto r = env.step(ActionVec::discrete(a));
    tr.transitions.push_back({t, obs, ActionVec::discrete(a), r.reward, r.done});
    obs = r.next_obs;
    if (r.done || r.truncated) break;
  }
  return tr;
}

}  // namespace

TEST_SUITE("sampler") {
  TEST_CASE("simhash sign fixtures") {
    const SimHashProjector id(Eigen::MatrixXd::Identity(2, 2));
    const std::vector<double> s = {1.0, -2.0};
    CHECK(id.code(s) == 0b01u);
    const std::vector<double> z = {0.0, 0.0};
    CHECK(id.code(z) == 0b11u);
    const std::vector<double> wrong = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS(id.code(wrong), ValidationError);
    CHECK_THROWS_AS(SimHashProjector(65, 3, 1), ValidationError);
    CHECK_THROWS_AS(SimHashProjector(0, 3, 1), ValidationError);
  }

  TEST_CASE("simhash is invariant to positive scaling and reproducible from its seed") {
    Rng rng(2);
    const SimHashProjector a(24, 7, 99), b(24, 7, 99);
    CHECK(a.matrix() == b.matrix());
    for (int i = 0; i < 2000; ++i) {
      std::vector<double> s(7);
      for (double& x : s) x = standard_normal(rng);
      auto t = s;
      const double k = std::exp(6.0 * (uniform01(rng) - 0.5));
      for (double& x : t) x *= k;
      CHECK(a.code(s) == a.code(t));
      for (double& x : t) x = 2.0 * (x / k);
      CHECK(a.code(s) == a.code(t));
    }
  }

  TEST_CASE("simhash angular collision rate") {
    Rng rng(3);
    const double theta = std::numbers::pi / 3;
    std::int64_t agree = 0, total = 0;
    for (int p = 0; p < 20000; ++p) {
      Eigen::VectorXd u(5), w(5);
      for (int i = 0; i < 5; ++i) {
        u(i) = standard_normal(rng);
        w(i) = standard_normal(rng);
      }
      u.normalize();
      w -= w.dot(u) * u;
      w.normalize();
      const Eigen::VectorXd v = std::cos(theta) * u + std::sin(theta) * w;
      const SimHashProjector proj(16, 5, rng());
      agree += 16 - std::popcount(proj.code({u.data(), 5}) ^ proj.code({v.data(), 5}));
      total += 16;
    }
    CHECK(std::abs(static_cast<double>(agree) / total - (1.0 - theta / std::numbers::pi)) <= 0.02);
  }

  TEST_CASE("serial and parallel batch codes agree") {
    Rng rng(4);
    const SimHashProjector proj(20, 9, 5);
    Eigen::MatrixXd X(9, 5000);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = standard_normal(rng);
    const auto a = simhash_codes_serial(proj, X);
    CHECK(a == simhash_codes_parallel(proj, X));
    for (Eigen::Index j = 0; j < X.cols(); j += 97) CHECK(a[static_cast<std::size_t>(j)] == proj.code({X.col(j).data(), 9}));
  }

  TEST_CASE("novelty") {
    Rng rng(5);
    const SimHashProjector proj(12, 4, 6);
    DensityMap empty;
    const auto tr = random_traj(rng, 4, 6);
    CHECK(is_novel(tr, empty, proj, 1));
    CHECK(is_novel(tr, empty, proj, 6));
    CHECK_FALSE(is_novel(tr, empty, proj, 7));
    CHECK_THROWS_AS(is_novel(tr, empty, proj, 0), ValidationError);

    DensityMap seen;
    record_feedback_densities(seen, proj, tr);
    CHECK(novel_state_count(tr, seen, proj) == 0);
    CHECK_FALSE(is_novel(tr, seen, proj, 1));

    // One unseen state repeated three times counts three times.
    std::vector<std::vector<double>> states;
    for (const auto& x : tr.transitions) states.push_back(x.state.values);
    const std::vector<double> fresh = {-9.0, 8.0, -7.0, 6.0};
    REQUIRE(seen.count(proj.code(fresh)) == 0);
    states.insert(states.begin() + 2, 3, fresh);
    const auto rep = traj_from_states(states);
    CHECK(novel_state_count(rep, seen, proj) == 3);
    CHECK(is_novel(rep, seen, proj, 3));
    CHECK_FALSE(is_novel(rep, seen, proj, 4));
  }

  TEST_CASE("novelty is monotone in the density map") {
    Rng rng(6);
    const SimHashProjector proj(6, 3, 7);
    for (int trial = 0; trial < 200; ++trial) {
      DensityMap d;
      for (int i = 0; i < 3; ++i) record_feedback_densities(d, proj, random_traj(rng, 3, 4));
      DensityMap bigger = d;
      record_feedback_densities(bigger, proj, random_traj(rng, 3, 5));
      CHECK(bigger.dominates(d));
      const auto tr = random_traj(rng, 3, 5);
      for (int e = 1; e <= 5; ++e)
        if (!is_novel(tr, d, proj, e)) CHECK_FALSE(is_novel(tr, bigger, proj, e));
    }
  }

  TEST_CASE("density updates") {
    Rng rng(7);
    const SimHashProjector proj(10, 3, 8);
    const auto tr = random_traj(rng, 3, 10);
    DensityMap d;
    record_feedback_densities(d, proj, tr);
    CHECK(d.total() == 10);
    DensityMap twice;
    record_feedback_densities(twice, proj, tr);
    record_feedback_densities(twice, proj, tr);
    for (const auto& [code, n] : d.counts()) CHECK(twice.count(code) == 2 * n);

    // Only the shown segments count.
    const std::vector<Segment> shown = {{0, 2, 4}};
    DensityMap partial;
    record_feedback_densities(partial, proj, tr, shown);
    CHECK(partial.total() == 3);

    // Histogram oracle on a fixed-seed gridworld stream.
    const auto spec = envs::benchmark_gridworld();
    const SimHashProjector gp(16, 25, 9);
    DensityMap g;
    std::map<std::vector<double>, std::uint64_t> visits;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto w = gridworld_walk(spec, s);
      record_feedback_densities(g, gp, w);
      for (const auto& x : w.transitions) ++visits[x.state.values];
    }
    std::map<HashCode, std::uint64_t> hist;
    for (const auto& [state, n] : visits) hist[gp.code(state)] += n;
    CHECK(hist.size() == g.distinct());
    for (const auto& [code, n] : hist) CHECK(g.count(code) == n);

    CHECK(DensityMap::from_json(g.to_json()) == g);
    CHECK(g.to_json().dump() == DensityMap::from_json(g.to_json()).to_json().dump());
  }

  TEST_CASE("novel fraction decays on a fixed-policy stream") {
    const auto spec = envs::benchmark_gridworld();
    const SimHashProjector proj(16, 25, 11);
    DensityMap d;
    std::vector<double> rate;
    std::uint64_t seed = 0;
    for (int round = 0; round < 10; ++round) {
      std::vector<Trajectory> batch;
      for (int i = 0; i < 20; ++i) batch.push_back(gridworld_walk(spec, seed++));
      int novel = 0;
      std::vector<std::size_t> picked;
      for (std::size_t i = 0; i < batch.size(); ++i)
        if (is_novel(batch[i], d, proj)) {
          ++novel;
          picked.push_back(i);
        }
      for (auto i : picked) record_feedback_densities(d, proj, batch[i]);
      rate.push_back(novel / 20.0);
    }
    CHECK(rate.back() <= rate.front());
  }

  TEST_CASE("schedules") {
    const auto alloc = decreasing_allocation(100, 10);
    CHECK(alloc.size() == 10);
    int sum = 0;
    for (std::size_t t = 0; t < alloc.size(); ++t) {
      sum += alloc[t];
      if (t > 0) CHECK(alloc[t] <= alloc[t - 1]);
    }
    CHECK(sum == 100);
    // Independent check: every entry is within one of the exact 1/t share.
    double h = 0.0;
    for (int t = 1; t <= 10; ++t) h += 1.0 / t;
    for (int t = 1; t <= 10; ++t) CHECK(std::abs(alloc[static_cast<std::size_t>(t - 1)] - 100.0 / (t * h)) < 1.0);
    CHECK(decreasing_allocation(0, 5) == std::vector<int>(5, 0));
    CHECK(decreasing_allocation(3, 5) == std::vector<int>{1, 1, 1, 0, 0});

    QuerySchedule u{ScheduleKind::uniform, 4, 0, 0};
    CHECK(u.budget_for_round(1) == 4);
    CHECK(u.budget_for_round(9) == 4);
    QuerySchedule d{ScheduleKind::decreasing, 0, 100, 10};
    CHECK(d.budget_for_round(1) == alloc[0]);
    CHECK(d.budget_for_round(11) == 0);
    CHECK(QuerySchedule{}.budget_for_round(3) == -1);
    CHECK_THROWS_AS((QuerySchedule{ScheduleKind::decreasing, 0, 10, 0}).validate(), ValidationError);
    CHECK_THROWS_AS((QuerySchedule{ScheduleKind::uniform, -1, 0, 0}).validate(), ValidationError);
    CHECK(parse_schedule_kind(to_string(ScheduleKind::decreasing)) == ScheduleKind::decreasing);
    CHECK(parse_selection_mode("entropy") == SelectionMode::entropy);
    CHECK_THROWS_AS(parse_selection_mode("greedy"), ValidationError);
  }

  TEST_CASE("select_queries") {
    Rng rng(12);
    std::vector<Trajectory> trajs;
    for (int i = 0; i < 10; ++i) trajs.push_back(random_traj(rng, 3, 4));
    const SimHashProjector proj(16, 3, 13);
    DensityMap d;
    SelectionContext ctx{&d, &proj, 1, nullptr, 1, &rng};

    SUBCASE("novelty returns every novel trajectory, and nothing once all are stale") {
      auto picked = select_queries(trajs, SelectionMode::novelty, {}, ctx);
      CHECK(picked.size() == 10);
      for (const auto& t : trajs) record_feedback_densities(d, proj, t);
      CHECK(select_queries(trajs, SelectionMode::novelty, {}, ctx).empty());
    }
    SUBCASE("entropy with constant probabilities keeps the first budgeted trajectories") {
      ctx.scorer = [](const Trajectory&) { return std::log(2.0); };
      const auto picked = select_queries(trajs, SelectionMode::entropy, {ScheduleKind::uniform, 3, 0, 0}, ctx);
      CHECK(picked == std::vector<std::size_t>{0, 1, 2});
    }
    SUBCASE("entropy sorts by descending score") {
      ctx.scorer = [&](const Trajectory& t) { return t.transitions[0].state.values[0]; };
      const auto picked = select_queries(trajs, SelectionMode::entropy, {ScheduleKind::uniform, 4, 0, 0}, ctx);
      REQUIRE(picked.size() == 4);
      for (std::size_t i = 1; i < picked.size(); ++i)
        CHECK(trajs[picked[i - 1]].transitions[0].state.values[0] >= trajs[picked[i]].transitions[0].state.values[0]);
    }
    SUBCASE("random samples without replacement within budget") {
      for (int r = 1; r <= 30; ++r) {
        ctx.round = r;
        const QuerySchedule sched{ScheduleKind::decreasing, 0, 40, 30};
        const auto picked = select_queries(trajs, SelectionMode::random, sched, ctx);
        CHECK(static_cast<int>(picked.size()) <= sched.budget_for_round(r));
        CHECK(std::set<std::size_t>(picked.begin(), picked.end()).size() == picked.size());
        for (auto i : picked) CHECK(i < trajs.size());
      }
    }
    SUBCASE("budget above the candidate count returns all with a warning") {
      int warnings = 0;
      set_log_sink([&](LogLevel l, std::string_view) { warnings += l == LogLevel::warn; });
      const auto picked = select_queries(trajs, SelectionMode::random, {ScheduleKind::uniform, 50, 0, 0}, ctx);
      set_log_sink(nullptr);
      CHECK(picked.size() == 10);
      CHECK(warnings == 1);
    }
    SUBCASE("budgeted modes need a bounded schedule") {
      CHECK_THROWS_AS(select_queries(trajs, SelectionMode::random, {}, ctx), ValidationError);
    }
  }

  TEST_CASE("mean entropy") {
    cost::FeatureLayout layout;
    layout.state_dim = 2;
    nn::Mlp net({2, {}, 1});
    const cost::SafetyClassifier flat(layout, net);
    Rng rng(14);
    const auto tr = random_traj(rng, 2, 5);
    CHECK(mean_entropy(flat, tr) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
}
