#include "rlsf/sampler/simhash.hpp"

#include <algorithm>
#include <string>

#include "rlsf/core/errors.hpp"
#include "rlsf/core/rng.hpp"

namespace rlsf::sampler {
namespace {

HashCode pack_signs(const Eigen::Ref<const Eigen::VectorXd>& projected) {
  HashCode c = 0;
  for (Eigen::Index i = 0; i < projected.size(); ++i) {
    if (projected(i) >= 0.0) c |= HashCode{1} << i;
  }
  return c;
}

void check_states(const SimHashProjector& p, const Eigen::MatrixXd& states) {
  if (static_cast<std::size_t>(states.rows()) != p.state_dim()) {
    throw ValidationError("simhash: state dimension " + std::to_string(states.rows()) + " != projector dimension " +
                          std::to_string(p.state_dim()));
  }
}

Eigen::MatrixXd trajectory_states(const Trajectory& traj, std::size_t dim) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(traj.size()));
  for (std::size_t t = 0; t < traj.size(); ++t) {
    const auto& v = traj.transitions[t].state.values;
    if (v.size() != dim) throw ValidationError("simhash: state dimension mismatch");
    X.col(static_cast<Eigen::Index>(t)) = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(dim));
  }
  return X;
}

}  // namespace

SimHashProjector::SimHashProjector(int n_bits, std::size_t state_dim, std::uint64_t seed) : seed_(seed) {
  if (n_bits < 1 || n_bits > kMaxCodeBits) throw ValidationError("simhash code length must be in [1, 64]");
  if (state_dim == 0) throw ValidationError("simhash needs a non-zero state dimension");
  Rng rng(seed);
  A_.resize(n_bits, static_cast<Eigen::Index>(state_dim));
  for (Eigen::Index j = 0; j < A_.cols(); ++j) {
    for (Eigen::Index i = 0; i < A_.rows(); ++i) A_(i, j) = standard_normal(rng);
  }
}

SimHashProjector::SimHashProjector(Eigen::MatrixXd A, std::uint64_t seed) : A_(std::move(A)), seed_(seed) {
  if (A_.rows() < 1 || A_.rows() > kMaxCodeBits) throw ValidationError("simhash code length must be in [1, 64]");
  if (A_.cols() == 0) throw ValidationError("simhash needs a non-zero state dimension");
}

HashCode SimHashProjector::code(std::span<const double> state) const {
  if (state.size() != state_dim()) {
    throw ValidationError("simhash: state dimension " + std::to_string(state.size()) + " != projector dimension " +
                          std::to_string(state_dim()));
  }
  const Eigen::Map<const Eigen::VectorXd> s(state.data(), static_cast<Eigen::Index>(state.size()));
  const Eigen::VectorXd projected = A_ * s;
  return pack_signs(projected);
}

std::vector<HashCode> SimHashProjector::codes(const Eigen::MatrixXd& states, nn::ExecutionPolicy policy) const {
  return policy == nn::ExecutionPolicy::parallel ? simhash_codes_parallel(*this, states)
                                                 : simhash_codes_serial(*this, states);
}

std::vector<HashCode> SimHashProjector::codes(const Trajectory& traj, nn::ExecutionPolicy policy) const {
  if (traj.empty()) return {};
  return codes(trajectory_states(traj, state_dim()), policy);
}

std::vector<HashCode> simhash_codes_serial(const SimHashProjector& projector, const Eigen::MatrixXd& states) {
  check_states(projector, states);
  std::vector<HashCode> out(static_cast<std::size_t>(states.cols()));
  for (Eigen::Index j = 0; j < states.cols(); ++j) {
    const Eigen::VectorXd projected = projector.matrix() * states.col(j);
    out[static_cast<std::size_t>(j)] = pack_signs(projected);
  }
  return out;
}

std::vector<HashCode> simhash_codes_parallel(const SimHashProjector& projector, const Eigen::MatrixXd& states) {
  check_states(projector, states);
  const auto n = states.cols();
  std::vector<HashCode> out(static_cast<std::size_t>(n));
  const auto block = static_cast<Eigen::Index>(nn::block_size_for(static_cast<std::size_t>(n)));
  const Eigen::Index n_blocks = (n + block - 1) / block;
#pragma omp parallel for schedule(static)
  for (Eigen::Index b = 0; b < n_blocks; ++b) {
    const Eigen::Index first = b * block;
    const Eigen::Index cols = std::min(block, n - first);
    const Eigen::MatrixXd projected = projector.matrix() * states.middleCols(first, cols);
    for (Eigen::Index j = 0; j < cols; ++j) out[static_cast<std::size_t>(first + j)] = pack_signs(projected.col(j));
  }
  return out;
}

std::uint64_t DensityMap::count(HashCode code) const {
  const auto it = counts_.find(code);
  return it == counts_.end() ? 0 : it->second;
}

void DensityMap::increment(HashCode code, std::uint64_t by) {
  counts_[code] += by;
  total_ += by;
}

bool DensityMap::dominates(const DensityMap& other) const {
  return std::all_of(other.counts_.begin(), other.counts_.end(),
                     [&](const auto& kv) { return count(kv.first) >= kv.second; });
}

nlohmann::json DensityMap::to_json() const {
  std::vector<std::pair<HashCode, std::uint64_t>> sorted(counts_.begin(), counts_.end());
  std::sort(sorted.begin(), sorted.end());
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [code, n] : sorted) arr.push_back({code, n});
  return arr;
}

DensityMap DensityMap::from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ValidationError("density map must be an array of [code, count] pairs");
  DensityMap d;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2) throw ValidationError("density map entries must be [code, count]");
    d.increment(e[0].get<HashCode>(), e[1].get<std::uint64_t>());
  }
  return d;
}

std::size_t novel_state_count(const Trajectory& traj, const DensityMap& density, const SimHashProjector& projector) {
  const auto codes = projector.codes(traj);
  return static_cast<std::size_t>(
      std::count_if(codes.begin(), codes.end(), [&](HashCode c) { return density.count(c) == 0; }));
}

bool is_novel(const Trajectory& traj, const DensityMap& density, const SimHashProjector& projector, int e) {
  if (e < 1) throw ValidationError("novelty threshold e must be >= 1");
  return novel_state_count(traj, density, projector) >= static_cast<std::size_t>(e);
}

void record_feedback_densities(DensityMap& density, const SimHashProjector& projector, const Trajectory& traj,
                               std::span<const Segment> shown) {
  const auto codes = projector.codes(traj);
  for (const auto& seg : shown) {
    if (seg.start < 0 || seg.end < seg.start || static_cast<std::size_t>(seg.end) >= codes.size()) {
      throw ValidationError("shown segment lies outside the trajectory");
    }
    for (auto t = seg.start; t <= seg.end; ++t) density.increment(codes[static_cast<std::size_t>(t)]);
  }
}

void record_feedback_densities(DensityMap& density, const SimHashProjector& projector, const Trajectory& traj) {
  for (HashCode c : projector.codes(traj)) density.increment(c);
}

}  // namespace rlsf::sampler
