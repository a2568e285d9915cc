#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "rlsf/core/rng.hpp"
#include "rlsf/core/tabular_cmdp.hpp"

namespace rlsf::test {

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("rlsf_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Sampled index from a probability row.
template <class Row>
int sample_index(const Row& probs, Rng& rng) {
  double u = uniform01(rng), acc = 0.0;
  const int n = static_cast<int>(probs.size());
  for (int i = 0; i < n; ++i) {
    acc += probs(i);
    if (u < acc) return i;
  }
  return n - 1;
}

/// Monte-Carlo estimate of E[sum gamma^t f(s_t, a_t)] with its standard error.
struct McEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

inline McEstimate mc_discounted(const TabularCMDP& m, const PolicyTable& pi, const SATable& f, int episodes,
                                int horizon, Rng& rng) {
  double sum = 0.0, sum2 = 0.0;
  for (int e = 0; e < episodes; ++e) {
    int s = sample_index(m.mu, rng);
    double g = 1.0, ret = 0.0;
    for (int t = 0; t < horizon; ++t) {
      const int a = sample_index(pi.row(s), rng);
      ret += g * f(s, a);
      g *= m.gamma;
      s = sample_index(m.transition[static_cast<std::size_t>(a)].row(s), rng);
    }
    sum += ret;
    sum2 += ret * ret;
  }
  const double mean = sum / episodes;
  const double var = sum2 / episodes - mean * mean;
  return {mean, std::sqrt(std::max(var, 0.0) / episodes)};
}

}  // namespace rlsf::test
