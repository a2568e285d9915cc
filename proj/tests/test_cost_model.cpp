#include <doctest.h>

#include <cmath>
#include <fstream>
#include <utility>

#include "rlsf/core/errors.hpp"
#include "rlsf/cost_model/classifier.hpp"
#include "rlsf/cost_model/closed_form.hpp"
#include "rlsf/cost_model/losses.hpp"
#include "rlsf/envs/gridworld.hpp"
#include "rlsf/feedback/feedback.hpp"
#include "test_util.hpp"

using namespace rlsf;
using namespace rlsf::cost;

namespace {

/// Classifier on a 1-D input whose logit is exactly `logit`.
SafetyClassifier constant_classifier(double logit) {
  FeatureLayout layout;
  layout.state_dim = 1;
  nn::Mlp net({1, {}, 1});
  const std::vector<double> p = {0.0, logit};
  net.set_params(p);
  return SafetyClassifier(layout, net);
}

StateVec one_hot(std::size_t n, std::size_t i) {
  std::vector<double> v(n, 0.0);
  v[i] = 1.0;
  return StateVec(v);
}

/// Scripted segment labels for random-walk episodes on a gridworld, with
/// per-state label inheritance.
std::vector<LabeledExample> random_walk_feedback(const envs::GridworldSpec& spec, int episodes, int k,
                                                 std::uint64_t seed) {
  envs::GridworldEnv env(spec);
  Rng rng(seed);
  std::vector<LabeledExample> out;
  for (int ep = 0; ep < episodes; ++ep) {
    Trajectory tr;
    std::vector<int> costs;
    auto obs = env.reset(static_cast<std::uint64_t>(ep));
    for (int t = 0; t < spec.horizon; ++t) {
      const int a = std::uniform_int_distribution<int>(0, 3)(rng);
      const auto r = env.step(ActionVec::discrete(a));
      tr.transitions.push_back({t, obs, ActionVec::discrete(a), r.reward, r.done});
      costs.push_back(r.gt_cost);
      obs = r.next_obs;
      if (r.done || r.truncated) break;
    }
    for (const auto& seg : split_into_segments(tr, k)) {
      const int y = feedback::scripted_label(
          std::span<const int>(costs).subspan(static_cast<std::size_t>(seg.start), static_cast<std::size_t>(seg.length())));
      for (auto t = seg.start; t <= seg.end; ++t) {
        const auto& x = tr.transitions[static_cast<std::size_t>(t)];
        out.push_back({x.state, x.action, y});
      }
    }
  }
  return out;
}

std::vector<int> detected_unsafe_cells(const CostModel& m, const envs::GridworldSpec& spec,
                                       std::vector<double> extra = {}) {
  std::vector<int> cells;
  for (int c = 0; c < spec.n_cells(); ++c) {
    std::vector<double> obs(static_cast<std::size_t>(spec.n_cells()), 0.0);
    obs[static_cast<std::size_t>(c)] = 1.0;
    obs.insert(obs.end(), extra.begin(), extra.end());
    int flagged = 0;
    for (int a = 0; a < envs::kGridActions; ++a) flagged += m.cost(StateVec(obs), ActionVec::discrete(a));
    if (flagged == envs::kGridActions) cells.push_back(c);
  }
  return cells;
}

}  // namespace

TEST_SUITE("cost_model") {
  TEST_CASE("segment_safe_prob") {
    const std::vector<double> a = {1, 1, 1}, b = {0.9, 0.0, 0.7}, c = {0.5, 0.5};
    CHECK(segment_safe_prob(a) == 1.0);
    CHECK(segment_safe_prob(b) == 0.0);
    CHECK(segment_safe_prob(c) == 0.25);
    const std::vector<double> bad = {0.5, 1.5}, empty;
    CHECK_THROWS_AS(segment_safe_prob(bad), ValidationError);
    CHECK_THROWS_AS(segment_safe_prob(empty), ValidationError);
  }

  TEST_CASE("mle_loss examples") {
    std::vector<ScoredSegment> b1 = {{1, {0.5}}};
    CHECK(mle_loss(b1).value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    std::vector<ScoredSegment> b2 = {{0, {0.5}}};
    CHECK(mle_loss(b2).value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    std::vector<ScoredSegment> b3 = {{0, {0.9, 0.9}}};
    CHECK(mle_loss(b3).value == doctest::Approx(-std::log(0.19)).epsilon(1e-12));
    CHECK(mle_loss(b3).value == doctest::Approx(1.6607).epsilon(1e-4));
    std::vector<ScoredSegment> sat = {{0, {1.0, 1.0}}};
    const auto v = mle_loss(sat);
    CHECK(v.clamped == 1);
    CHECK(v.value == doctest::Approx(-std::log(kLogFloor)));
    CHECK(std::isfinite(v.value));
  }

  TEST_CASE("surrogate_loss examples") {
    const std::vector<int> y1 = {1};
    const std::vector<double> p1 = {1.0 - 1e-9};
    CHECK(surrogate_loss(y1, p1).value < 1e-8);
    const std::vector<int> y0 = {0};
    const std::vector<double> ph = {0.5};
    CHECK(surrogate_loss(y0, ph).value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    const std::vector<double> pz = {0.0};
    CHECK(surrogate_loss(y1, pz).clamped == 1);
    CHECK(std::isfinite(surrogate_loss(y1, pz).value));

    Rng rng(8);
    std::vector<ScoredSegment> batch;
    std::vector<int> labels;
    std::vector<double> probs;
    for (int i = 0; i < 100; ++i) {
      const int y = std::uniform_int_distribution<int>(0, 1)(rng);
      const double p = 0.001 + 0.998 * uniform01(rng);
      batch.push_back({y, {p}});
      labels.push_back(y);
      probs.push_back(p);
    }
    CHECK(surrogate_loss(labels, probs).value == doctest::Approx(mle_loss(batch).value).epsilon(1e-14));
    CHECK(segment_surrogate_loss(batch).value == doctest::Approx(mle_loss(batch).value).epsilon(1e-14));
  }

  TEST_CASE("closed form estimate") {
    CHECK(closed_form_estimate(DensityPair{3, 1}) == 0.75);
    CHECK(closed_form_estimate(DensityPair{0, 5}) == 0.0);
    CHECK_THROWS_AS(closed_form_estimate(DensityPair{0, 0}), ValidationError);
    SATable p(1, 3);
    p << 0.49, 0.5, 0.51;
    const auto c = inferred_cost_table(p);
    CHECK(c(0, 0) == 1.0);
    CHECK(c(0, 1) == 0.0);
    CHECK(c(0, 2) == 0.0);
  }

  TEST_CASE("estimation bias limits") {
    Rng rng(12);
    auto m = random_cmdp(5, 3, 0.9, rng);
    const auto pi = random_policy(m, rng);
    DensityTables d{SATable::Zero(5, 3), SATable::Zero(5, 3)};
    for (Eigen::Index s = 0; s < 5; ++s) {
      for (Eigen::Index a = 0; a < 3; ++a) {
        if (m.cost_gt(s, a) == 1.0) {
          d.bad(s, a) = 2.0;
        } else {
          d.good(s, a) = 3.0;
          d.bad(s, a) = 1.0;
        }
      }
    }
    CHECK(estimation_bias(m, pi, d) == doctest::Approx(0.0));
    SATable safe_mask = SATable::Ones(5, 3) - m.cost_gt;
    for (Eigen::Index s = 0; s < 5; ++s)
      for (Eigen::Index a = 0; a < 3; ++a)
        if (m.cost_gt(s, a) == 0.0) std::swap(d.good(s, a), d.bad(s, a));
    const auto rho = occupancy_measure(m, pi);
    CHECK(estimation_bias(m, pi, d) == doctest::Approx((rho.array() * safe_mask.array()).sum()).epsilon(1e-12));
    DensityTables empty{SATable::Zero(5, 3), SATable::Zero(5, 3)};
    CHECK_THROWS_AS(estimation_bias(m, pi, empty), ValidationError);
  }

  TEST_CASE("prop 3 identity on random instances") {
    Rng rng(13);
    for (int trial = 0; trial < 30; ++trial) {
      auto m = random_cmdp(5, 3, 0.3 + 0.6 * uniform01(rng), rng);
      const auto d = random_sufficient_densities(m, rng);
      const auto c_star = inferred_cost_table(closed_form_estimate(d));
      const auto pi = random_policy(m, rng);
      // Two-sided exact computation from the occupancy solve.
      const auto rho = occupancy_measure(m, pi);
      double expected = 0.0;
      for (Eigen::Index s = 0; s < 5; ++s)
        for (Eigen::Index a = 0; a < 3; ++a)
          if (m.cost_gt(s, a) == 0.0 && d.bad(s, a) > d.good(s, a)) expected += rho(s, a);
      CHECK(std::abs(estimation_bias(m, pi, d) - expected) <= 1e-9);
      CHECK(std::abs(discounted_value(m, pi, c_star) - discounted_value(m, pi, m.cost_gt) - expected) <= 1e-9);
    }
  }

  TEST_CASE("infer_cost threshold") {
    auto logit = [](double p) { return std::log(p / (1 - p)); };
    Trajectory tr;
    tr.transitions.push_back({0, StateVec({1.0}), ActionVec{}, 0.0, false});
    for (auto [p, c] : {std::pair{0.49, 1}, std::pair{0.51, 0}, std::pair{0.5, 0}}) {
      CostModel m{constant_classifier(logit(p)), 0.5, true};
      CHECK(m.classifier.p_safe(StateVec({1.0}), ActionVec{}) == doctest::Approx(p).epsilon(1e-12));
      CHECK(infer_cost(m, tr) == std::vector<int>{c});
    }
    CHECK(constant_classifier(0.0).p_safe(StateVec({3.0}), ActionVec{}) == 0.5);
    CostModel untrained{constant_classifier(0.0), 0.5, false};
    CHECK_THROWS_AS(infer_cost(untrained, tr), StateError);
    CostModel m{constant_classifier(1.0), 0.5, true};
    Trajectory wide;
    wide.transitions.push_back({0, StateVec({1.0, 2.0}), ActionVec{}, 0.0, false});
    CHECK_THROWS_AS(infer_cost(m, wide), ValidationError);
  }

  TEST_CASE("logit clamp keeps outputs strictly inside (0, 1)") {
    CHECK(constant_classifier(1e6).p_safe(StateVec({0.0}), ActionVec{}) < 1.0);
    CHECK(constant_classifier(-1e6).p_safe(StateVec({0.0}), ActionVec{}) > 0.0);
    CHECK(clamped_sigmoid(1e6) == clamped_sigmoid(kLogitClamp));
  }

  TEST_CASE("training on separable 2-D data") {
    Rng rng(21);
    std::vector<LabeledExample> data;
    for (int i = 0; i < 400; ++i) {
      const double x = 2 * uniform01(rng) - 1, y = 2 * uniform01(rng) - 1;
      if (std::abs(x + 0.5 * y) < 0.05) continue;
      data.push_back({StateVec({x, y}), ActionVec{}, x + 0.5 * y > 0 ? 1 : 0});
    }
    FeatureLayout layout;
    layout.state_dim = 2;
    SafetyClassifier clf(layout, {8}, rng);
    const auto rep = train_classifier(clf, data, {1500, 64, 0.02}, rng);
    int correct = 0;
    for (const auto& ex : data) correct += (clf.p_safe(ex.state, ex.action) >= 0.5) == (ex.y_safe == 1);
    CHECK(static_cast<double>(correct) / data.size() >= 0.99);
    // Epoch-level moving average of the loss does not increase.
    const std::size_t w = 100;
    REQUIRE(rep.losses.size() >= 2 * w);
    double prev = 1e300;
    for (std::size_t start = 0; start + w <= rep.losses.size(); start += w) {
      double avg = 0.0;
      for (std::size_t i = start; i < start + w; ++i) avg += rep.losses[i];
      avg /= w;
      CHECK(avg <= prev + 1e-9);
      prev = avg;
    }
  }

  TEST_CASE("table classifier converges to the closed form") {
    Rng rng(22);
    const std::size_t cells = 6;
    std::vector<LabeledExample> data;
    std::vector<double> expected(cells);
    for (std::size_t c = 0; c < cells; ++c) {
      const int g = static_cast<int>(c) % 4, b = (static_cast<int>(c) * 3 + 1) % 5;
      for (int i = 0; i < g; ++i) data.push_back({one_hot(cells, c), ActionVec{}, 1});
      for (int i = 0; i < b; ++i) data.push_back({one_hot(cells, c), ActionVec{}, 0});
      expected[c] = static_cast<double>(g) / (g + b);
    }
    FeatureLayout layout;
    layout.state_dim = cells;
    SafetyClassifier clf(layout, nn::Mlp({cells, {}, 1}));
    train_classifier(clf, data, {4000, 4096, 0.05}, rng);
    for (std::size_t c = 0; c < cells; ++c)
      CHECK(std::abs(clf.p_safe(one_hot(cells, c), ActionVec{}) - expected[c]) <= 1e-2);
  }

  TEST_CASE("single-class buffer saturates toward safe with a warning") {
    Rng rng(23);
    std::vector<LabeledExample> data;
    for (int i = 0; i < 50; ++i) data.push_back({StateVec({uniform01(rng), uniform01(rng)}), ActionVec{}, 1});
    FeatureLayout layout;
    layout.state_dim = 2;
    SafetyClassifier clf(layout, {4}, rng);
    int warnings = 0;
    set_log_sink([&](LogLevel l, std::string_view) { warnings += l == LogLevel::warn; });
    const auto rep = train_classifier(clf, data, {300, 16, 0.01}, rng);
    set_log_sink(nullptr);
    CHECK(rep.single_class);
    CHECK(warnings >= 1);
    for (const auto& ex : data) CHECK(clf.p_safe(ex.state, ex.action) >= 0.5);
    CHECK_THROWS_AS(train_classifier(clf, std::span<const LabeledExample>{}, {10, 4, 0.01}, rng), ValidationError);
  }

  TEST_CASE("surrogate gradient: serial and parallel agree bit for bit and match finite differences") {
    Rng rng(24);
    FeatureLayout layout;
    layout.state_dim = 3;
    layout.action = ActionEncoding::one_hot;
    layout.action_size = 4;
    SafetyClassifier clf(layout, {16, 8}, rng);
    std::vector<LabeledExample> data;
    for (int i = 0; i < 1000; ++i)
      data.push_back({StateVec({standard_normal(rng), standard_normal(rng), standard_normal(rng)}),
                      ActionVec::discrete(i % 4), i % 3 == 0 ? 0 : 1});
    const auto X = clf.feature_matrix(data);
    std::vector<int> y;
    for (const auto& ex : data) y.push_back(ex.y_safe);
    const auto a = surrogate_loss_gradient(clf, X, y, nn::ExecutionPolicy::serial);
    const auto b = surrogate_loss_gradient(clf, X, y, nn::ExecutionPolicy::parallel);
    CHECK(a.loss == b.loss);
    CHECK(a.grad == b.grad);

    // The batch loss equals surrogate_loss on the model's probabilities.
    const auto p = clf.p_safe_batch(X);
    CHECK(a.loss == doctest::Approx(surrogate_loss(y, {p.data(), static_cast<std::size_t>(p.size())}).value).epsilon(1e-12));

    auto params = clf.net().params();
    double num_sq = 0.0, diff_sq = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double orig = params[i], h = 1e-5;
      params[i] = orig + h;
      const double up = surrogate_loss_gradient(clf, X, y).loss;
      params[i] = orig - h;
      const double down = surrogate_loss_gradient(clf, X, y).loss;
      params[i] = orig;
      const double g = (up - down) / (2 * h);
      num_sq += g * g;
      diff_sq += (g - a.grad[i]) * (g - a.grad[i]);
    }
    CHECK(std::sqrt(diff_sq / num_sq) <= 1e-4);
  }

  TEST_CASE("gridworld with sufficient feedback: inferred unsafe set covers the true one") {
    const auto spec = envs::benchmark_gridworld();
    const auto data = random_walk_feedback(spec, 400, 3, 31);
    Rng rng(32);
    FeatureLayout layout;
    layout.state_dim = static_cast<std::size_t>(spec.n_cells());
    SafetyClassifier clf(layout, nn::Mlp({layout.input_dim(), {}, 1}));
    train_classifier(clf, data, {3000, 100000, 0.05}, rng);
    CostModel m{clf, 0.5, true};
    const auto flagged = detected_unsafe_cells(m, spec);
    for (const auto& c : spec.unsafe_cells)
      CHECK(std::find(flagged.begin(), flagged.end(), spec.index(c)) != flagged.end());
  }

  TEST_CASE("save and load") {
    const auto dir = test::temp_dir("cost_model");
    Rng rng(41);
    FeatureLayout layout;
    layout.state_dim = 6;
    layout.state_mask = {0, 2, 3};
    layout.action = ActionEncoding::raw;
    layout.action_size = 2;
    CostModel m{SafetyClassifier(layout, {5, 3}, rng), 0.5, true};
    save_cost_model(m, dir / "m.bin", "{\"seed\":1}");
    const auto back = load_cost_model(dir / "m.bin");
    CHECK(back.classifier.layout() == layout);
    CHECK(back.trained);
    const auto pa = std::as_const(m.classifier).net().params();
    const auto pb = back.classifier.net().params();
    CHECK(std::equal(pa.begin(), pa.end(), pb.begin(), pb.end()));
    for (int i = 0; i < 1000; ++i) {
      std::vector<double> s(6);
      for (double& v : s) v = 3 * standard_normal(rng);
      const ActionVec a({standard_normal(rng), standard_normal(rng)});
      CHECK(back.classifier.p_safe(StateVec(s), a) == m.classifier.p_safe(StateVec(s), a));
      // Masked-out entries (1, 4, 5) do not influence the output.
      auto t = s;
      t[1] += 10.0;
      t[4] = -7.0;
      t[5] *= 3.0;
      CHECK(m.classifier.p_safe(StateVec(t), a) == m.classifier.p_safe(StateVec(s), a));
    }
    CHECK_NOTHROW(load_cost_model(dir / "m.bin", 4));
    CHECK_THROWS_AS(load_cost_model(dir / "m.bin", 3), ValidationError);

    // Corrupted payload is rejected.
    {
      std::ofstream f(dir / "bad.bin", std::ios::binary);
      f << "rlsf-cost-model 7\n";
    }
    CHECK_THROWS_AS(load_cost_model(dir / "bad.bin"), ValidationError);
    CHECK_THROWS_AS(load_cost_model(dir / "missing.bin"), ValidationError);
  }

  TEST_CASE("position-masked gridworld model transfers to a variant with appended features") {
    const auto dir = test::temp_dir("transfer");
    auto spec_a = envs::benchmark_gridworld();
    const auto data = random_walk_feedback(spec_a, 400, 1, 51);
    FeatureLayout layout;
    layout.state_dim = static_cast<std::size_t>(spec_a.n_cells());
    for (std::size_t i = 0; i < layout.state_dim; ++i) layout.state_mask.push_back(i);
    layout.action = ActionEncoding::one_hot;
    layout.action_size = envs::kGridActions;
    Rng rng(52);
    SafetyClassifier clf(layout, nn::Mlp({layout.input_dim(), {}, 1}));
    train_classifier(clf, data, {2000, 100000, 0.05}, rng);
    CostModel m{clf, 0.5, true};
    const auto on_a = detected_unsafe_cells(m, spec_a);
    save_cost_model(m, dir / "a.bin");

    auto spec_b = spec_a;
    spec_b.extra_features = 2;
    const auto loaded = load_cost_model(dir / "a.bin", envs::GridworldEnv(spec_b).observation_dim());
    for (double r : {-1.0, 0.0, 1.0})
      for (double c : {-1.0, 0.0, 1.0}) CHECK(detected_unsafe_cells(loaded, spec_b, {r, c}) == on_a);
  }
}
