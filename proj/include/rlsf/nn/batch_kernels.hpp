#pragma once

// Minibatch loss/gradient kernels. The batch is cut into fixed column blocks
// whose size depends only on the batch size; each block accumulates into its
// own gradient buffer and blocks are reduced in index order. The OpenMP kernel
// and the serial reference therefore produce bit-identical results regardless
// of the thread count.

#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "rlsf/nn/mlp.hpp"

namespace rlsf::nn {

/// Loss head for one block: given network outputs (output x B) for samples
/// [first, first + B), returns the summed loss of the block and writes
/// dLoss/doutput into `d_output` (same shape). Must be safe to call
/// concurrently for disjoint blocks.
using LossHead =
    std::function<double(std::size_t first, const Eigen::MatrixXd& output, Eigen::MatrixXd& d_output)>;

struct LossGradient {
  double loss = 0.0;
  std::vector<double> grad;
};

enum class ExecutionPolicy { serial, parallel };

/// Column block size used for a batch of `n` samples.
std::size_t block_size_for(std::size_t n);

LossGradient loss_and_gradient_serial(const Mlp& net, const Eigen::MatrixXd& inputs, const LossHead& head);
LossGradient loss_and_gradient_parallel(const Mlp& net, const Eigen::MatrixXd& inputs, const LossHead& head);
LossGradient loss_and_gradient(const Mlp& net, const Eigen::MatrixXd& inputs, const LossHead& head,
                               ExecutionPolicy policy = ExecutionPolicy::parallel);

/// Batched inference (output x N); same blocking scheme.
Eigen::MatrixXd forward_all(const Mlp& net, const Eigen::MatrixXd& inputs,
                            ExecutionPolicy policy = ExecutionPolicy::parallel);

/// Number of OpenMP threads available (1 without OpenMP).
int max_threads();

}  // namespace rlsf::nn
