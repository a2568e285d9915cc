#include "rlsf/nn/batch_kernels.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rlsf::nn {
namespace {

constexpr std::size_t kMinBlock = 64;
constexpr std::size_t kMaxBlocks = 32;

struct BlockResult {
  double loss = 0.0;
  std::vector<double> grad;
};

BlockResult run_block(const Mlp& net, const Eigen::MatrixXd& inputs, const LossHead& head, std::size_t first,
                      std::size_t count) {
  BlockResult r;
  r.grad.assign(net.num_params(), 0.0);
  Mlp::Workspace ws;
  const auto& out = net.forward_batch(
      inputs.middleCols(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count)), ws);
  Eigen::MatrixXd d_out(out.rows(), out.cols());
  r.loss = head(first, out, d_out);
  net.backward_batch(ws, d_out, r.grad);
  return r;
}

LossGradient reduce(std::vector<BlockResult>& blocks, std::size_t n_params) {
  LossGradient total;
  total.grad.assign(n_params, 0.0);
  for (auto& b : blocks) {
    total.loss += b.loss;
    for (std::size_t i = 0; i < n_params; ++i) total.grad[i] += b.grad[i];
  }
  return total;
}

}  // namespace

std::size_t block_size_for(std::size_t n) {
  return std::max(kMinBlock, (n + kMaxBlocks - 1) / kMaxBlocks);
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

LossGradient loss_and_gradient_serial(const Mlp& net, const Eigen::MatrixXd& inputs, const LossHead& head) {
  const auto n = static_cast<std::size_t>(inputs.cols());
  const std::size_t bs = block_size_for(n);
  const std::size_t n_blocks = (n + bs - 1) / bs;
  std::vector<BlockResult> blocks(n_blocks);
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const std::size_t first = b * bs;
    blocks[b] = run_block(net, inputs, head, first, std::min(bs, n - first));
  }
  return reduce(blocks, net.num_params());
}

LossGradient loss_and_gradient_parallel(const Mlp& net, const Eigen::MatrixXd& inputs, const LossHead& head) {
  const auto n = static_cast<std::size_t>(inputs.cols());
  const std::size_t bs = block_size_for(n);
  const auto n_blocks = static_cast<std::ptrdiff_t>((n + bs - 1) / bs);
  std::vector<BlockResult> blocks(static_cast<std::size_t>(n_blocks));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < n_blocks; ++b) {
    const std::size_t first = static_cast<std::size_t>(b) * bs;
    blocks[static_cast<std::size_t>(b)] = run_block(net, inputs, head, first, std::min(bs, n - first));
  }
  return reduce(blocks, net.num_params());
}

LossGradient loss_and_gradient(const Mlp& net, const Eigen::MatrixXd& inputs, const LossHead& head,
                               ExecutionPolicy policy) {
  return policy == ExecutionPolicy::parallel ? loss_and_gradient_parallel(net, inputs, head)
                                             : loss_and_gradient_serial(net, inputs, head);
}

Eigen::MatrixXd forward_all(const Mlp& net, const Eigen::MatrixXd& inputs, ExecutionPolicy policy) {
  const auto n = static_cast<std::size_t>(inputs.cols());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(net.shape().output), inputs.cols());
  const std::size_t bs = block_size_for(n);
  const auto n_blocks = static_cast<std::ptrdiff_t>((n + bs - 1) / bs);
  auto body = [&](std::ptrdiff_t b) {
    Mlp::Workspace ws;
    const std::size_t first = static_cast<std::size_t>(b) * bs;
    const auto count = static_cast<Eigen::Index>(std::min(bs, n - first));
    out.middleCols(static_cast<Eigen::Index>(first), count) =
        net.forward_batch(inputs.middleCols(static_cast<Eigen::Index>(first), count), ws);
  };
  if (policy == ExecutionPolicy::parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < n_blocks; ++b) body(b);
  } else {
    for (std::ptrdiff_t b = 0; b < n_blocks; ++b) body(b);
  }
  return out;
}

}  // namespace rlsf::nn
