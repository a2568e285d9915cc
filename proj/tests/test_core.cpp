#include <doctest.h>

#include <sstream>

#include "rlsf/core/errors.hpp"
#include "rlsf/core/record_format.hpp"
#include "rlsf/core/tabular_cmdp.hpp"
#include "rlsf/core/types.hpp"
#include "test_util.hpp"

using namespace rlsf;

namespace {

Trajectory make_traj(int n, int state_dim = 2) {
  Trajectory tr;
  for (int t = 0; t < n; ++t) {
    Transition x;
    x.t = t;
    x.state = StateVec(std::vector<double>(static_cast<std::size_t>(state_dim), 0.1 * t));
    x.action = ActionVec::discrete(t % 3);
    x.reward = -1.0 + 0.25 * t;
    x.done = t == n - 1;
    tr.transitions.push_back(x);
  }
  return tr;
}

TabularCMDP chain3(double gamma) {
  TabularCMDP m(3, 2);
  m.gamma = gamma;
  m.mu << 1.0, 0.0, 0.0;
  // action 0 stays or advances, action 1 resets.
  m.transition[0] << 0.3, 0.7, 0.0,  //
      0.0, 0.4, 0.6,                 //
      0.5, 0.0, 0.5;
  m.transition[1] << 1.0, 0.0, 0.0,  //
      0.8, 0.2, 0.0,                 //
      0.9, 0.0, 0.1;
  m.reward << 0.0, 1.0, 2.0, 0.5, -1.0, 3.0;
  m.cost_gt << 0, 0, 1, 0, 1, 1;
  return m;
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("split_into_segments examples") {
    auto seg = [](int len, int k) { return split_into_segments(make_traj(len), k); };
    auto s = seg(10, 5);
    REQUIRE(s.size() == 2);
    CHECK(s[0] == Segment{0, 0, 4});
    CHECK(s[1] == Segment{0, 5, 9});
    s = seg(10, 10);
    REQUIRE(s.size() == 1);
    CHECK(s[0] == Segment{0, 0, 9});
    s = seg(7, 3);
    REQUIRE(s.size() == 3);
    CHECK(s[0] == Segment{0, 0, 2});
    CHECK(s[1] == Segment{0, 3, 5});
    CHECK(s[2] == Segment{0, 6, 6});
    CHECK_THROWS_AS(split_into_segments(Trajectory{}, 3), ValidationError);
    CHECK_THROWS_AS(split_into_segments(make_traj(4), 0), ValidationError);
  }

  TEST_CASE("segments partition the timesteps") {
    Rng rng(7);
    for (int trial = 0; trial < 500; ++trial) {
      const int len = std::uniform_int_distribution<int>(1, 120)(rng);
      const int k = std::uniform_int_distribution<int>(1, 130)(rng);
      const auto segs = split_length(len, k);
      std::vector<int> hits(static_cast<std::size_t>(len), 0);
      for (std::size_t i = 0; i < segs.size(); ++i) {
        CHECK(segs[i].length() >= 1);
        CHECK(segs[i].length() <= k);
        if (i + 1 < segs.size()) CHECK(segs[i].length() == k);
        for (auto t = segs[i].start; t <= segs[i].end; ++t) ++hits[static_cast<std::size_t>(t)];
      }
      for (int h : hits) REQUIRE(h == 1);
    }
  }

  TEST_CASE("trajectory invariants") {
    auto tr = make_traj(5);
    CHECK_NOTHROW(tr.validate());
    tr.transitions[2].t = 7;
    CHECK_THROWS_AS(tr.validate(), ValidationError);
    tr = make_traj(5);
    tr.transitions[1].done = true;
    CHECK_THROWS_AS(tr.validate(), ValidationError);
    CHECK(make_traj(4).total_reward() == doctest::Approx(-4.0 + 0.25 * 6));
  }

  TEST_CASE("discounted_value closed cases") {
    Rng rng(1);
    auto m = random_cmdp(4, 3, 0.9, rng);
    const auto pi = random_policy(m, rng);
    CHECK(discounted_value(m, pi, SATable::Zero(4, 3)) == 0.0);

    TabularCMDP one(1, 1);
    one.gamma = 0.5;
    one.mu << 1.0;
    one.transition[0] << 1.0;
    CHECK(discounted_value(one, uniform_policy(one), SATable::Ones(1, 1)) == doctest::Approx(2.0).epsilon(1e-12));

    PolicyTable bad = pi;
    bad(0, 0) += 0.5;
    CHECK_THROWS_AS(discounted_value(m, bad, m.cost_gt), ValidationError);
  }

  TEST_CASE("discounted_value matches Monte-Carlo on a 3-state chain") {
    const auto m = chain3(0.8);
    PolicyTable pi(3, 2);
    pi << 0.7, 0.3, 0.6, 0.4, 0.2, 0.8;
    Rng rng(2024);
    const auto mc = test::mc_discounted(m, pi, m.cost_gt, 100000, 120, rng);
    const double exact = discounted_value(m, pi, m.cost_gt);
    CHECK(std::abs(exact - mc.mean) <= 3.0 * mc.stderr_);
  }

  TEST_CASE("occupancy measure") {
    SUBCASE("gamma 0 is the initial state-action distribution") {
      Rng rng(3);
      auto m = random_cmdp(5, 2, 0.0, rng);
      const auto pi = random_policy(m, rng);
      const auto rho = occupancy_measure(m, pi);
      for (Eigen::Index s = 0; s < 5; ++s)
        for (Eigen::Index a = 0; a < 2; ++a) CHECK(rho(s, a) == doctest::Approx(m.mu(s) * pi(s, a)).epsilon(1e-12));
    }
    SUBCASE("symmetric two-state MDP gives symmetric occupancy") {
      TabularCMDP m(2, 2);
      m.gamma = 0.9;
      m.mu << 0.5, 0.5;
      m.transition[0] << 0.6, 0.4, 0.4, 0.6;
      m.transition[1] << 0.1, 0.9, 0.9, 0.1;
      const auto rho = occupancy_measure(m, uniform_policy(m));
      CHECK(rho(0, 0) == doctest::Approx(rho(1, 0)).epsilon(1e-12));
      CHECK(rho(0, 1) == doctest::Approx(rho(1, 1)).epsilon(1e-12));
    }
    SUBCASE("mass, non-negativity and the two value definitions agree") {
      Rng rng(4);
      for (int trial = 0; trial < 50; ++trial) {
        const double gamma = 0.1 + 0.85 * uniform01(rng);
        auto m = random_cmdp(6, 3, gamma, rng);
        const auto pi = random_policy(m, rng);
        const auto rho = occupancy_measure(m, pi);
        CHECK(rho.minCoeff() >= 0.0);
        CHECK(std::abs(rho.sum() - 1.0 / (1.0 - gamma)) <= 1e-9);
        SATable f = SATable::Random(6, 3);
        CHECK(std::abs(discounted_value(m, pi, f) - (rho.array() * f.array()).sum()) <= 1e-9);
      }
    }
    SUBCASE("random 4-state MDP matches empirical visit frequencies") {
      Rng rng(5);
      auto m = random_cmdp(4, 2, 0.7, rng);
      const auto pi = random_policy(m, rng);
      const auto rho = occupancy_measure(m, pi);
      for (Eigen::Index s = 0; s < 4; ++s) {
        for (Eigen::Index a = 0; a < 2; ++a) {
          SATable ind = SATable::Zero(4, 2);
          ind(s, a) = 1.0;
          Rng mc_rng(derive_seed(99, {static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(a)}));
          const auto mc = test::mc_discounted(m, pi, ind, 100000, 80, mc_rng);
          CHECK(std::abs(rho(s, a) - mc.mean) <= 3.0 * mc.stderr_ + 1e-12);
        }
      }
    }
    SUBCASE("undiscounted chain without absorbing states is unsupported") {
      auto m = chain3(1.0);
      CHECK_THROWS_AS(occupancy_measure(m, uniform_policy(m)), UnsupportedError);
    }
  }

  TEST_CASE("tabular CMDP validation") {
    auto m = chain3(0.9);
    CHECK_NOTHROW(m.validate());
    m.cost_gt(0, 0) = 0.5;
    CHECK_THROWS_AS(m.validate(), ValidationError);
    m = chain3(0.9);
    m.transition[0](0, 0) += 1e-6;
    CHECK_THROWS_AS(m.validate(), ValidationError);
    m = chain3(0.9);
    m.mu << 0.5, 0.5, 0.5;
    CHECK_THROWS_AS(m.validate(), ValidationError);
  }

  TEST_CASE("record format round trip") {
    TrajectoryRecord rec;
    rec.trajectory_id = 3000007;
    rec.trajectory = make_traj(5, 3);
    rec.trajectory.transitions[1].state.values[0] = 0.1 + 0.2;
    rec.trajectory.transitions[2].reward = -1.0 / 3.0;
    rec.trajectory.env_seed = 0xFFFFFFFFFFFFFFFFull;
    rec.trajectory.policy_version = 4;
    rec.query_id = 12;
    rec.round = 3;
    rec.poses = {{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 2}};
    rec.segments = split_into_segments(rec.trajectory, 2, rec.trajectory_id);
    rec.labels = {1, std::nullopt, 0};
    const auto text = to_record_string(rec);
    const auto back = parse_record(text);
    CHECK(back == rec);
    CHECK(to_record_string(back) == text);
    const auto many = parse_records(text + text);
    REQUIRE(many.size() == 2);
    CHECK(many[1] == rec);
    CHECK(parse_real(format_real(0.1 + 0.2)) == 0.1 + 0.2);
    CHECK_THROWS_AS(parse_record("garbage\n"), ValidationError);
    CHECK_THROWS_AS(parse_record(text.substr(0, text.size() / 2)), ValidationError);
  }
}
