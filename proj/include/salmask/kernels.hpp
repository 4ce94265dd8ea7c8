#pragma once

#include <vector>

#include "salmask/tensor.hpp"

namespace salmask::kernels {

// OpenMP on/off switch for the optimized kernels. Parallelism is across
// independent output elements only, so results are bit-identical either way.
void set_parallel(bool on);
bool parallel_enabled();
void set_threads(int n);

// 3x3 convolution, stride 1, zero padding 1.
void conv3x3_forward(const Tensor& in, const Tensor& w, const std::vector<Real>& bias, Tensor& out);
void conv3x3_backward_data(const Tensor& gout, const Tensor& w, Tensor& gin);
void conv3x3_backward_weights(const Tensor& gout, const Tensor& in, Tensor& gw,
                              std::vector<Real>& gbias);

// 2x2 average pool, stride 2.
void avgpool2_forward(const Tensor& in, Tensor& out);
void avgpool2_backward(const Tensor& gout, Tensor& gin);

// Nearest-neighbor upsample by an integer factor.
void upsample_nearest_forward(const Tensor& in, int factor, Tensor& out);
void upsample_nearest_backward(const Tensor& gout, int factor, Tensor& gin);

// Group normalization over (C/groups, H, W) per sample. mean/inv_std are
// n×groups, written by forward and consumed by backward.
void group_norm_forward(const Tensor& in, int groups, const std::vector<Real>& gamma,
                        const std::vector<Real>& beta, Real eps, Tensor& out,
                        std::vector<Real>& mean, std::vector<Real>& inv_std);
void group_norm_backward(const Tensor& gout, const Tensor& in, int groups,
                         const std::vector<Real>& gamma, const std::vector<Real>& mean,
                         const std::vector<Real>& inv_std, Tensor& gin,
                         std::vector<Real>* dgamma, std::vector<Real>* dbeta);

void relu_forward(const Tensor& in, Tensor& out);
void relu_backward(const Tensor& gout, const Tensor& fwd_out, Tensor& gin);

// Fully connected: in is n×c×1×1, w is k×c, out is n×k×1×1.
void linear_forward(const Tensor& in, const Tensor& w, const std::vector<Real>& bias, Tensor& out);
void linear_backward(const Tensor& gout, const Tensor& in, const Tensor& w, Tensor& gin, Tensor* gw,
                     std::vector<Real>* gbias);

void global_avgpool_forward(const Tensor& in, Tensor& out);
void global_avgpool_backward(const Tensor& gout, int h, int w, Tensor& gin);

// Row-wise softmax over channels of n×k×1×1 logits.
void softmax(const Tensor& logits, Tensor& probs);

// Serial reference implementations, kept for testing and benchmarking the
// optimized kernels against. Plain loops, no OpenMP.
namespace ref {
void conv3x3_forward(const Tensor& in, const Tensor& w, const std::vector<Real>& bias, Tensor& out);
void conv3x3_backward_data(const Tensor& gout, const Tensor& w, Tensor& gin);
void conv3x3_backward_weights(const Tensor& gout, const Tensor& in, Tensor& gw,
                              std::vector<Real>& gbias);
void avgpool2_forward(const Tensor& in, Tensor& out);
void upsample_nearest_forward(const Tensor& in, int factor, Tensor& out);
void group_norm_forward(const Tensor& in, int groups, const std::vector<Real>& gamma,
                        const std::vector<Real>& beta, Real eps, Tensor& out,
                        std::vector<Real>& mean, std::vector<Real>& inv_std);
}  // namespace ref

}  // namespace salmask::kernels
