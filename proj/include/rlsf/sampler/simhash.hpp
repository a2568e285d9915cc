#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "rlsf/core/types.hpp"
#include "rlsf/nn/batch_kernels.hpp"

namespace rlsf::sampler {

using HashCode = std::uint64_t;

inline constexpr int kMaxCodeBits = 64;

/// phi(s) = sgn(A s) packed into the low n bits of a 64-bit word (bit i set
/// iff row i projects to a non-negative value; sgn(0) = +1).
class SimHashProjector {
 public:
  SimHashProjector() = default;
  /// A has i.i.d. standard normal entries drawn from `seed`.
  SimHashProjector(int n_bits, std::size_t state_dim, std::uint64_t seed);
  /// Explicit projection matrix (n x d), e.g. for fixtures.
  explicit SimHashProjector(Eigen::MatrixXd A, std::uint64_t seed = 0);

  int n_bits() const { return static_cast<int>(A_.rows()); }
  std::size_t state_dim() const { return static_cast<std::size_t>(A_.cols()); }
  std::uint64_t seed() const { return seed_; }
  const Eigen::MatrixXd& matrix() const { return A_; }

  HashCode code(std::span<const double> state) const;
  HashCode code(const StateVec& s) const { return code(s.view()); }

  /// One code per column of `states` (d x N).
  std::vector<HashCode> codes(const Eigen::MatrixXd& states, nn::ExecutionPolicy policy = nn::ExecutionPolicy::parallel) const;
  std::vector<HashCode> codes(const Trajectory& traj, nn::ExecutionPolicy policy = nn::ExecutionPolicy::parallel) const;

 private:
  Eigen::MatrixXd A_;
  std::uint64_t seed_ = 0;
};

/// Reference per-column loop used to check the OpenMP path.
std::vector<HashCode> simhash_codes_serial(const SimHashProjector& projector, const Eigen::MatrixXd& states);
std::vector<HashCode> simhash_codes_parallel(const SimHashProjector& projector, const Eigen::MatrixXd& states);

/// Count-based density d(code) over states shown to the evaluator.
class DensityMap {
 public:
  std::uint64_t count(HashCode code) const;
  void increment(HashCode code, std::uint64_t by = 1);
  std::size_t distinct() const { return counts_.size(); }
  std::uint64_t total() const { return total_; }
  const std::unordered_map<HashCode, std::uint64_t>& counts() const { return counts_; }

  /// True iff count(c) >= other.count(c) for every code.
  bool dominates(const DensityMap& other) const;

  /// Sorted [code, count] pairs so the serialized form is canonical.
  nlohmann::json to_json() const;
  static DensityMap from_json(const nlohmann::json& j);

  friend bool operator==(const DensityMap&, const DensityMap&) = default;

 private:
  std::unordered_map<HashCode, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

/// Steps whose state hashes to an unseen code (counted per occurrence).
std::size_t novel_state_count(const Trajectory& traj, const DensityMap& density, const SimHashProjector& projector);

/// At least `e` novel states. Throws ValidationError for e < 1.
bool is_novel(const Trajectory& traj, const DensityMap& density, const SimHashProjector& projector, int e = 1);

/// Adds one count per state occurrence inside the shown segments.
void record_feedback_densities(DensityMap& density, const SimHashProjector& projector, const Trajectory& traj,
                               std::span<const Segment> shown);

/// Every state of the trajectory.
void record_feedback_densities(DensityMap& density, const SimHashProjector& projector, const Trajectory& traj);

}  // namespace rlsf::sampler
