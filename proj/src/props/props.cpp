#include "rlsf/props/props.hpp"

#include <algorithm>
#include <chrono>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

#include "rlsf/core/errors.hpp"
#include "rlsf/core/rng.hpp"
#include "rlsf/core/tabular_cmdp.hpp"
#include "rlsf/cost_model/classifier.hpp"
#include "rlsf/cost_model/closed_form.hpp"
#include "rlsf/sampler/simhash.hpp"
#include "rlsf/trainer/policy.hpp"

namespace rlsf::props {
namespace {

using Clock = std::chrono::steady_clock;

class Timer {
 public:
  double seconds() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

 private:
  Clock::time_point start_ = Clock::now();
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}
std::string num(std::int64_t v) { return std::to_string(v); }
std::string num(int v) { return std::to_string(v); }

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

/// Uniform on the open interval (0, 1).
double open01(Rng& rng) {
  double u = 0.0;
  do {
    u = uniform01(rng);
  } while (u <= 0.0);
  return u;
}

std::string dump_batch(const std::vector<cost::ScoredSegment>& batch) {
  std::ostringstream os;
  os.precision(17);
  for (const auto& seg : batch) {
    os << "y=" << seg.y_safe << " p=[";
    for (std::size_t i = 0; i < seg.probs.size(); ++i) os << (i ? " " : "") << seg.probs[i];
    os << "]; ";
  }
  return os.str();
}

std::vector<cost::ScoredSegment> random_batch(Rng& rng, int max_len, bool all_safe) {
  std::vector<cost::ScoredSegment> batch(static_cast<std::size_t>(uniform_int(rng, 1, 8)));
  for (auto& seg : batch) {
    seg.y_safe = all_safe ? 1 : uniform_int(rng, 0, 1);
    seg.probs.resize(static_cast<std::size_t>(uniform_int(rng, 1, max_len)));
    for (double& p : seg.probs) p = open01(rng);
  }
  return batch;
}

template <class F>
void silence_warnings(F&& f) {
  const auto level = log_level();
  set_log_level(LogLevel::error);
  try {
    f();
  } catch (...) {
    set_log_level(level);
    throw;
  }
  set_log_level(level);
}

}  // namespace

SegmentLoss sign_flipped(SegmentLoss loss) {
  return [loss = std::move(loss)](std::span<const cost::ScoredSegment> b) {
    auto v = loss(b);
    v.value = -v.value;
    return v;
  };
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor) {
  if (analytic.size() != numeric.size()) throw ValidationError("gradient size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

double relative_error_norm(std::span<const double> analytic, std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) throw ValidationError("gradient size mismatch");
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double denom = std::sqrt(std::max(na, nn));
  return denom > 0.0 ? std::sqrt(diff) / denom : 0.0;
}

std::vector<double> numeric_gradient(const std::function<double()>& f, std::span<double> params, double h) {
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = params[i];
    params[i] = orig + h;
    const double up = f();
    params[i] = orig - h;
    const double down = f();
    params[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

PropertyResult surrogate_upper_bound(std::uint64_t seed, std::int64_t trials, const SegmentLoss& surrogate) {
  Timer timer;
  PropertyResult res;
  res.name = "surrogate_upper_bound";
  res.trials = trials;
  Rng rng(derive_seed(seed, {101}));
  double worst_gap = std::numeric_limits<double>::infinity();
  double worst_eq = 0.0;
  silence_warnings([&] {
    for (std::int64_t t = 0; t < trials && res.passed; ++t) {
      const auto batch = random_batch(rng, 50, false);
      const double sur = surrogate(batch).value;
      const double mle = cost::mle_loss(batch).value;
      worst_gap = std::min(worst_gap, sur - mle);
      if (!(sur >= mle - 1e-9)) {
        res.passed = false;
        res.counterexample = "surrogate=" + num(sur) + " < mle=" + num(mle) + " on " +
                             dump_batch(batch);
        break;
      }
      // Equality cases: every segment labeled safe, and single-step segments.
      const auto safe_batch = random_batch(rng, 50, true);
      const auto unit_batch = random_batch(rng, 1, false);
      for (const auto* b : {&safe_batch, &unit_batch}) {
        const double diff = std::abs(surrogate(*b).value - cost::mle_loss(*b).value);
        worst_eq = std::max(worst_eq, diff);
        if (!(diff <= 1e-12)) {
          res.passed = false;
          res.counterexample = "equality case violated by " + num(diff) + " on " + dump_batch(*b);
          break;
        }
      }
    }
  });
  res.worst = trials > 0 ? worst_gap : 0.0;
  res.detail = "min(surrogate - mle)=" + num(res.worst) + ", max equality-case gap=" + num(worst_eq);
  res.seconds = timer.seconds();
  return res;
}

PropertyResult product_complement_bound(std::uint64_t seed, std::int64_t trials) {
  Timer timer;
  PropertyResult res;
  res.name = "product_complement_bound";
  res.trials = trials;
  Rng rng(derive_seed(seed, {102}));
  double worst = std::numeric_limits<double>::infinity();
  for (std::int64_t t = 0; t < trials; ++t) {
    const int n = uniform_int(rng, 1, 50);
    std::vector<double> x(static_cast<std::size_t>(n));
    // Mix interior draws with exact endpoints.
    for (double& v : x) {
      const int kind = uniform_int(rng, 0, 9);
      v = kind == 0 ? 0.0 : kind == 1 ? 1.0 : uniform01(rng);
    }
    double prod_x = 1.0, prod_1mx = 1.0;
    for (double v : x) {
      prod_x *= v;
      prod_1mx *= 1.0 - v;
    }
    const double slack = (1.0 - prod_x) - prod_1mx;
    worst = std::min(worst, slack);
    if (!(slack >= -1e-12)) {
      res.passed = false;
      std::ostringstream os;
      os.precision(17);
      os << "x=[";
      for (std::size_t i = 0; i < x.size(); ++i) os << (i ? " " : "") << x[i];
      os << "] slack=" << slack;
      res.counterexample = os.str();
      break;
    }
  }
  res.worst = trials > 0 ? worst : 0.0;
  res.detail = "min slack=" + num(res.worst);
  res.seconds = timer.seconds();
  return res;
}

PropertyResult closed_form_minimizer(std::uint64_t seed, std::int64_t datasets) {
  Timer timer;
  PropertyResult res;
  res.name = "closed_form_minimizer";
  res.trials = datasets;
  double worst_fit = 0.0, worst_grad = 0.0;
  silence_warnings([&] {
    for (std::int64_t ds = 0; ds < datasets && res.passed; ++ds) {
      Rng rng(derive_seed(seed, {103, static_cast<std::uint64_t>(ds)}));
      const int ns = uniform_int(rng, 2, 6);
      const int na = uniform_int(rng, 1, 3);
      const int cells = ns * na;
      std::vector<int> n_good(static_cast<std::size_t>(cells)), n_bad(static_cast<std::size_t>(cells));
      std::vector<cost::LabeledExample> data;
      for (int c = 0; c < cells; ++c) {
        do {
          n_good[c] = uniform_int(rng, 0, 8);
          n_bad[c] = uniform_int(rng, 0, 8);
        } while (n_good[c] + n_bad[c] == 0);
        std::vector<double> onehot(static_cast<std::size_t>(cells), 0.0);
        onehot[static_cast<std::size_t>(c)] = 1.0;
        for (int i = 0; i < n_good[c]; ++i) data.push_back({StateVec(onehot), ActionVec{}, 1});
        for (int i = 0; i < n_bad[c]; ++i) data.push_back({StateVec(onehot), ActionVec{}, 0});
      }
      cost::FeatureLayout layout;
      layout.state_dim = static_cast<std::size_t>(cells);
      // Table lookup: one logit per cell, no shared bias.
      nn::Mlp table({static_cast<std::size_t>(cells), {}, 1});
      cost::SafetyClassifier clf(layout, table);
      Rng train_rng(derive_seed(seed, {104, static_cast<std::uint64_t>(ds)}));
      cost::train_classifier(clf, data, {5000, data.size(), 0.05}, train_rng);

      std::vector<double> closed(static_cast<std::size_t>(cells));
      for (int c = 0; c < cells; ++c) {
        closed[c] = cost::closed_form_estimate({static_cast<double>(n_good[c]), static_cast<double>(n_bad[c])});
        std::vector<double> onehot(static_cast<std::size_t>(cells), 0.0);
        onehot[static_cast<std::size_t>(c)] = 1.0;
        const double fit = std::abs(clf.p_safe(StateVec(onehot), ActionVec{}) - closed[c]);
        worst_fit = std::max(worst_fit, fit);
        if (!(fit <= 1e-2)) {
          res.passed = false;
          res.counterexample = "dataset " + num(ds) + " cell " + num(c) +
                               ": trained p differs from closed form by " + num(fit) +
                               " (d_g=" + num(n_good[c]) + ", d_b=" + num(n_bad[c]) + ")";
          return;
        }
      }

      // Place the table exactly at the closed form and check stationarity.
      // Cells with d_g = 0 or d_b = 0 sit at the logit clamp.
      std::vector<double> params(table.num_params(), 0.0);
      for (int c = 0; c < cells; ++c) {
        const double p = closed[c];
        params[static_cast<std::size_t>(c)] = p <= 0.0   ? -cost::kLogitClamp
                                              : p >= 1.0 ? cost::kLogitClamp
                                                         : std::log(p / (1.0 - p));
      }
      clf.net().set_params(params);
      std::vector<int> labels;
      for (const auto& ex : data) labels.push_back(ex.y_safe);
      const auto lg = cost::surrogate_loss_gradient(clf, clf.feature_matrix(data), labels);
      for (double g : lg.grad) worst_grad = std::max(worst_grad, std::abs(g));
      if (!(worst_grad <= 1e-9)) {
        res.passed = false;
        res.counterexample = "dataset " + num(ds) + ": gradient norm " + num(worst_grad) +
                             " at the closed form";
        return;
      }
    }
  });
  res.worst = worst_fit;
  res.detail = "max |p_trained - p_closed|=" + num(worst_fit) +
               ", max |grad| at closed form=" + num(worst_grad);
  res.seconds = timer.seconds();
  return res;
}

PropertyResult bias_identity_and_safety(std::uint64_t seed, std::int64_t instances, int policies) {
  Timer timer;
  PropertyResult res;
  res.name = "bias_identity_and_safety";
  res.trials = instances;
  double worst_identity = 0.0, min_bias = std::numeric_limits<double>::infinity();
  std::int64_t feasible = 0, checked = 0;
  for (std::int64_t inst = 0; inst < instances && res.passed; ++inst) {
    Rng rng(derive_seed(seed, {105, static_cast<std::uint64_t>(inst)}));
    const double gamma = 0.5 + 0.45 * uniform01(rng);
    auto cmdp = random_cmdp(5, 3, gamma, rng);
    const auto densities = cost::random_sufficient_densities(cmdp, rng);
    const SATable c_star = cost::inferred_cost_table(cost::closed_form_estimate(densities));
    cmdp.c_max = uniform01(rng) / (1.0 - gamma);
    for (int k = 0; k < policies; ++k) {
      const auto pi = random_policy(cmdp, rng);
      const double v_star = discounted_value(cmdp, pi, c_star);
      const double v_gt = discounted_value(cmdp, pi, cmdp.cost_gt);
      const double bias = cost::estimation_bias(cmdp, pi, densities);
      const double err = std::abs((v_star - v_gt) - bias);
      worst_identity = std::max(worst_identity, err);
      min_bias = std::min(min_bias, bias);
      ++checked;
      std::string failure;
      if (!(err <= 1e-9)) failure = "identity off by " + num(err);
      if (!(bias >= 0.0)) failure = "negative bias " + num(bias);
      if (v_star <= cmdp.c_max) {
        ++feasible;
        if (!(v_gt <= cmdp.c_max)) {
          failure = "c_*-feasible policy violates c_gt: J_gt=" + num(v_gt) +
                    " > c_max=" + num(cmdp.c_max);
        }
      }
      if (!failure.empty()) {
        res.passed = false;
        res.counterexample = "instance " + num(inst) + " policy " + num(k) + ": " + failure;
        break;
      }
    }
  }
  res.worst = worst_identity;
  res.detail = "max identity error=" + num(worst_identity) + ", min bias=" +
               num(checked ? min_bias : 0.0) + ", c_*-feasible policies=" + num(feasible) +
               "/" + num(checked);
  res.seconds = timer.seconds();
  return res;
}

PropertyResult simhash_lsh(std::uint64_t seed, std::int64_t pairs) {
  Timer timer;
  PropertyResult res;
  res.name = "simhash_angular_lsh";
  res.trials = pairs;
  constexpr int kBits = 16;
  constexpr int kDim = 8;
  const std::vector<double> angles = {std::numbers::pi / 8, std::numbers::pi / 4, std::numbers::pi / 2,
                                      3 * std::numbers::pi / 4};
  Rng rng(derive_seed(seed, {106}));
  std::vector<std::int64_t> hits(angles.size(), 0), total(angles.size(), 0);
  std::int64_t scale_mismatch = 0;
  for (std::int64_t p = 0; p < pairs; ++p) {
    const std::size_t bin = static_cast<std::size_t>(p) % angles.size();
    const double theta = angles[bin];
    Eigen::VectorXd u(kDim), w(kDim);
    for (int i = 0; i < kDim; ++i) {
      u(i) = standard_normal(rng);
      w(i) = standard_normal(rng);
    }
    u.normalize();
    w -= w.dot(u) * u;
    w.normalize();
    const Eigen::VectorXd v = std::cos(theta) * u + std::sin(theta) * w;
    const sampler::SimHashProjector proj(kBits, kDim, rng());
    const auto cu = proj.code({u.data(), kDim});
    const auto cv = proj.code({v.data(), kDim});
    hits[bin] += kBits - std::popcount(cu ^ cv);
    total[bin] += kBits;
    const double scale = std::exp(4.0 * (uniform01(rng) - 0.5));
    const Eigen::VectorXd su = scale * u;
    if (proj.code({su.data(), kDim}) != cu) ++scale_mismatch;
  }
  double worst = 0.0;
  bool within = true;
  std::ostringstream detail;
  for (std::size_t b = 0; b < angles.size(); ++b) {
    if (total[b] == 0) continue;
    const double rate = static_cast<double>(hits[b]) / static_cast<double>(total[b]);
    const double expected = 1.0 - angles[b] / std::numbers::pi;
    // 0.02, widened to 4 standard errors when the pair count is too small to resolve it.
    const double tol = std::max(0.02, 4.0 * std::sqrt(expected * (1.0 - expected) / static_cast<double>(total[b])));
    worst = std::max(worst, std::abs(rate - expected));
    within = within && std::abs(rate - expected) <= tol;
    detail << "theta=" << angles[b] << " rate=" << rate << " expected=" << expected << " tol=" << tol << "; ";
  }
  res.worst = worst;
  res.passed = within && scale_mismatch == 0;
  detail << "scale mismatches=" << scale_mismatch;
  res.detail = detail.str();
  if (!res.passed) res.counterexample = res.detail;
  res.seconds = timer.seconds();
  return res;
}

PropertyResult gradient_checks(std::uint64_t seed, std::int64_t networks) {
  Timer timer;
  PropertyResult res;
  res.name = "gradient_checks";
  res.trials = networks;
  double worst = 0.0, worst_entry = 0.0;
  std::string worst_where;
  for (std::int64_t n = 0; n < networks && res.passed; ++n) {
    Rng rng(derive_seed(seed, {107, static_cast<std::uint64_t>(n)}));
    const auto dim = static_cast<std::size_t>(uniform_int(rng, 2, 6));
    const auto batch = uniform_int(rng, 3, 40);
    std::vector<std::size_t> hidden;
    for (int l = uniform_int(rng, 0, 2); l > 0; --l) hidden.push_back(static_cast<std::size_t>(uniform_int(rng, 2, 8)));
    Eigen::MatrixXd obs(static_cast<Eigen::Index>(dim), batch);
    for (Eigen::Index j = 0; j < obs.size(); ++j) obs.data()[j] = standard_normal(rng);

    // Classifier on the surrogate loss.
    cost::FeatureLayout layout;
    layout.state_dim = dim;
    cost::SafetyClassifier clf(layout, hidden, rng);
    std::vector<int> labels(static_cast<std::size_t>(batch));
    for (int& y : labels) y = uniform_int(rng, 0, 1);
    const auto lg = cost::surrogate_loss_gradient(clf, obs, labels);
    const auto num_c = numeric_gradient([&] { return cost::surrogate_loss_gradient(clf, obs, labels).loss; },
                                        clf.net().params());
    const double err_c = relative_error_norm(lg.grad, num_c);
    worst_entry = std::max(worst_entry, max_relative_error(lg.grad, num_c));

    // Reward and cost critics on squared error.
    double err_r = 0.0, err_k = 0.0;
    for (int which = 0; which < 2; ++which) {
      trainer::Critic critic(dim, hidden, rng);
      std::vector<double> targets(static_cast<std::size_t>(batch));
      for (double& t : targets) t = which == 0 ? 5.0 * standard_normal(rng) : uniform_int(rng, 0, 3);
      const auto cg = trainer::critic_loss_gradient(critic, obs, targets);
      const auto num = numeric_gradient([&] { return trainer::critic_loss_gradient(critic, obs, targets).loss; },
                                        critic.net().params());
      (which == 0 ? err_r : err_k) = relative_error_norm(cg.grad, num);
      worst_entry = std::max(worst_entry, max_relative_error(cg.grad, num));
    }
    for (auto [err, where] : {std::pair{err_c, "classifier"}, std::pair{err_r, "reward critic"},
                              std::pair{err_k, "cost critic"}}) {
      if (err > worst) {
        worst = err;
        worst_where = where;
      }
      if (!(err <= 1e-4)) {
        res.passed = false;
        res.counterexample = std::string(where) + " network " + num(n) +
                             ": relative error " + num(err);
      }
    }
  }
  res.worst = worst;
  res.detail = "max relative error=" + num(worst) + (worst_where.empty() ? "" : " (" + worst_where + ")") +
               ", max per-entry error=" + num(worst_entry);
  res.seconds = timer.seconds();
  return res;
}

std::vector<PropertyResult> run_all(const PropsOptions& o) {
  auto n = [&](std::int64_t dflt) { return o.trials ? *o.trials : dflt; };
  if (o.trials && *o.trials == 0) return {};
  return {surrogate_upper_bound(o.seed, n(10000), o.surrogate),
          product_complement_bound(o.seed, n(10000)),
          closed_form_minimizer(o.seed, n(20)),
          bias_identity_and_safety(o.seed, n(50)),
          simhash_lsh(o.seed, n(100000)),
          gradient_checks(o.seed, n(20))};
}

nlohmann::json report_json(const std::vector<PropertyResult>& results) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : results) {
    nlohmann::json j{{"property", r.name},    {"passed", r.passed}, {"trials", r.trials},
                     {"seconds", r.seconds},  {"worst", r.worst},   {"detail", r.detail}};
    if (!r.counterexample.empty()) j["counterexample"] = r.counterexample;
    arr.push_back(std::move(j));
  }
  return {{"all_passed", all_passed(results)}, {"properties", arr}};
}

bool all_passed(const std::vector<PropertyResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
}

}  // namespace rlsf::props
