#pragma once

#include "rlsf/core/tabular_cmdp.hpp"

namespace rlsf::cost {

/// Visitation weight of one (s, a) cell inside safe (d_g) and unsafe (d_b) segments.
struct DensityPair {
  double d_g = 0.0;
  double d_b = 0.0;
};

/// Per-(s, a) densities for a tabular problem.
struct DensityTables {
  SATable good;
  SATable bad;

  DensityPair at(Eigen::Index s, Eigen::Index a) const { return {good(s, a), bad(s, a)}; }
  void validate() const;
};

/// Minimizer of the surrogate loss for a table-lookup classifier:
/// d_g / (d_g + d_b). Throws ValidationError when d_g + d_b == 0.
double closed_form_estimate(DensityPair d);
SATable closed_form_estimate(const DensityTables& d);

/// 1[p_safe < 1/2]; p_safe == 1/2 maps to 0.
SATable inferred_cost_table(const SATable& p_safe);

/// E_{(s,a) ~ rho_g}[1[d_b > d_g]], rho_g being the discounted occupancy
/// restricted to truly safe pairs. Densities must be positive on every pair
/// the policy visits.
double estimation_bias(const TabularCMDP& cmdp, const PolicyTable& policy, const DensityTables& densities);

/// Densities implied by segment feedback on a tabular problem: every truly
/// unsafe pair has d_g = 0 and d_b > 0; safe pairs get random (d_g, d_b)
/// with d_g + d_b > 0.
DensityTables random_sufficient_densities(const TabularCMDP& cmdp, Rng& rng, int max_count = 10);

}  // namespace rlsf::cost
