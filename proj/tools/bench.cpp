// Serial reference vs OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "rlsf/core/rng.hpp"
#include "rlsf/envs/gridworld.hpp"
#include "rlsf/nn/batch_kernels.hpp"
#include "rlsf/sampler/simhash.hpp"
#include "rlsf/trainer/rollout.hpp"

using namespace rlsf;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = standard_normal(rng);
  return m;
}

void gradient(benchmark::State& state, nn::ExecutionPolicy policy) {
  const auto batch = static_cast<Eigen::Index>(state.range(0));
  Rng rng(1);
  const nn::Mlp net({32, {64, 64}, 1}, rng);
  const auto x = random_matrix(32, batch, 2);
  const nn::LossHead head = [](std::size_t, const Eigen::MatrixXd& out, Eigen::MatrixXd& d) {
    d = out;
    return 0.5 * out.squaredNorm();
  };
  for (auto _ : state) benchmark::DoNotOptimize(nn::loss_and_gradient(net, x, head, policy));
  state.SetItemsProcessed(state.iterations() * batch);
}

void simhash(benchmark::State& state, nn::ExecutionPolicy policy) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const sampler::SimHashProjector proj(24, 40, 3);
  const auto x = random_matrix(40, n, 4);
  for (auto _ : state) {
    auto codes = policy == nn::ExecutionPolicy::serial ? sampler::simhash_codes_serial(proj, x)
                                                       : sampler::simhash_codes_parallel(proj, x);
    benchmark::DoNotOptimize(codes);
  }
  state.SetItemsProcessed(state.iterations() * n);
}

void rollouts(benchmark::State& state, nn::ExecutionPolicy policy) {
  const envs::GridworldEnv env(envs::benchmark_gridworld());
  Rng rng(5);
  const trainer::Policy pi(env.observation_dim(), env.action_space(), {32}, rng);
  trainer::RolloutOptions ro;
  ro.n_steps = state.range(0);
  for (auto _ : state) benchmark::DoNotOptimize(trainer::collect_rollouts(pi, env, ro, policy));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK_CAPTURE(gradient, serial, nn::ExecutionPolicy::serial)->Arg(512)->Arg(4096);
BENCHMARK_CAPTURE(gradient, parallel, nn::ExecutionPolicy::parallel)->Arg(512)->Arg(4096);
BENCHMARK_CAPTURE(simhash, serial, nn::ExecutionPolicy::serial)->Arg(10000);
BENCHMARK_CAPTURE(simhash, parallel, nn::ExecutionPolicy::parallel)->Arg(10000);
BENCHMARK_CAPTURE(rollouts, serial, nn::ExecutionPolicy::serial)->Arg(2000);
BENCHMARK_CAPTURE(rollouts, parallel, nn::ExecutionPolicy::parallel)->Arg(2000);

BENCHMARK_MAIN();
