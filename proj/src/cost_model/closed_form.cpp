#include "rlsf/cost_model/closed_form.hpp"

#include <string>

#include "rlsf/core/errors.hpp"

namespace rlsf::cost {

void DensityTables::validate() const {
  if (good.rows() != bad.rows() || good.cols() != bad.cols()) throw ValidationError("density tables differ in shape");
  if ((good.array() < 0.0).any() || (bad.array() < 0.0).any()) throw ValidationError("densities must be non-negative");
}

double closed_form_estimate(DensityPair d) {
  if (d.d_g < 0.0 || d.d_b < 0.0) throw ValidationError("densities must be non-negative");
  const double total = d.d_g + d.d_b;
  if (!(total > 0.0)) throw ValidationError("undefined estimate: zero feedback density for this cell");
  return d.d_g / total;
}

SATable closed_form_estimate(const DensityTables& d) {
  d.validate();
  SATable p(d.good.rows(), d.good.cols());
  for (Eigen::Index s = 0; s < p.rows(); ++s) {
    for (Eigen::Index a = 0; a < p.cols(); ++a) {
      try {
        p(s, a) = closed_form_estimate(d.at(s, a));
      } catch (const ValidationError&) {
        throw ValidationError("undefined estimate at (s=" + std::to_string(s) + ", a=" + std::to_string(a) +
                              "): feedback is not sufficient");
      }
    }
  }
  return p;
}

SATable inferred_cost_table(const SATable& p_safe) { return (p_safe.array() < 0.5).cast<double>(); }

double estimation_bias(const TabularCMDP& cmdp, const PolicyTable& policy, const DensityTables& densities) {
  densities.validate();
  if (densities.good.rows() != static_cast<Eigen::Index>(cmdp.n_states) ||
      densities.good.cols() != static_cast<Eigen::Index>(cmdp.n_actions)) {
    throw ValidationError("density tables do not match the CMDP shape");
  }
  const SATable rho = occupancy_measure(cmdp, policy);
  double bias = 0.0;
  for (Eigen::Index s = 0; s < rho.rows(); ++s) {
    for (Eigen::Index a = 0; a < rho.cols(); ++a) {
      if (rho(s, a) <= 0.0) continue;
      const auto d = densities.at(s, a);
      if (!(d.d_g + d.d_b > 0.0)) {
        throw ValidationError("insufficient feedback: policy visits (s=" + std::to_string(s) +
                              ", a=" + std::to_string(a) + ") with zero density");
      }
      if (cmdp.cost_gt(s, a) == 0.0 && d.d_b > d.d_g) bias += rho(s, a);
    }
  }
  return bias;
}

DensityTables random_sufficient_densities(const TabularCMDP& cmdp, Rng& rng, int max_count) {
  const auto ns = static_cast<Eigen::Index>(cmdp.n_states);
  const auto na = static_cast<Eigen::Index>(cmdp.n_actions);
  DensityTables d{SATable::Zero(ns, na), SATable::Zero(ns, na)};
  std::uniform_int_distribution<int> count(0, max_count);
  for (Eigen::Index s = 0; s < ns; ++s) {
    for (Eigen::Index a = 0; a < na; ++a) {
      if (cmdp.cost_gt(s, a) == 1.0) {
        d.bad(s, a) = 1 + count(rng);
        continue;
      }
      do {
        d.good(s, a) = count(rng);
        d.bad(s, a) = count(rng);
      } while (d.good(s, a) + d.bad(s, a) == 0.0);
    }
  }
  return d;
}

}  // namespace rlsf::cost
