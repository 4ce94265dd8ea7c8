#pragma once

#include <string>
#include <vector>

#include "salmask/classifier.hpp"
#include "salmask/rng.hpp"
#include "salmask/tensor.hpp"

namespace salmask {

struct GumbelConfig {
  double temperature = 0.5;          // > 0
  std::string estimator = "hard";    // "soft" or "hard" (straight-through)
};

struct MaskerConfig {
  std::vector<int> observed_layers{4, 5};  // sorted, unique, subset of 1..5
  int fuse_channels = 64;
  std::string output_mode = "sigmoid";  // "sigmoid" or "gumbel"
  GumbelConfig gumbel;

  void validate() const;  // throws on invariant violation
};

struct MaskerOutput {
  Tensor logits;  // n×1×64×64, pre-sigmoid
  Tensor mask;    // n×1×64×64, values in [0,1]
};

struct MaskerCache {
  std::vector<Tensor> branch_in;   // observed activations
  std::vector<Tensor> branch_out;  // per-branch conv outputs
  Tensor concat;                   // fused input at the finest observed side
  Tensor fuse_out;                 // 1-channel, finest observed side
  Tensor logits;                   // upsampled to image resolution
  Tensor mask;
  Tensor gumbel_soft;  // relaxed sample, kept for the straight-through backward
  bool sampled = false;
};

struct MaskerGrads {
  std::vector<Tensor> branch_w;
  std::vector<std::vector<Real>> branch_b;
  Tensor fuse_w;
  std::vector<Real> fuse_b;

  void zero();
  std::vector<std::vector<Real>*> arrays();
};

// Per-layer convolutions on classifier activations, nearest upsample to the
// finest observed resolution, channel concat, one fusing convolution, final
// upsample to image resolution, sigmoid (or Gumbel sampling in training).
// The forward signature takes no ground-truth label.
class Masker {
 public:
  Masker() = default;
  static Masker init(const MaskerConfig& config, Rng& rng);

  // Deterministic forward: mask = sigmoid(logits). Used for evaluation and
  // for sigmoid-mode training.
  MaskerOutput forward(const ActivationSet& acts) const;
  MaskerOutput forward(const ActivationSet& acts, MaskerCache& cache) const;
  // Training forward honoring output_mode; samples a Gumbel mask when
  // configured (rng required in that case).
  MaskerOutput forward_train(const ActivationSet& acts, MaskerCache& cache, Rng& rng) const;

  // Backward from dL/dmask to parameter gradients. Activations are leaves;
  // no gradient is propagated into the classifier.
  void backward(const MaskerCache& cache, const Tensor& grad_mask, MaskerGrads& grads) const;

  int64_t count_parameters() const;
  const MaskerConfig& config() const { return config_; }

  std::vector<std::pair<std::string, std::vector<Real>*>> named_params();
  MaskerGrads make_grads() const;

  void save(const std::string& path, uint64_t step = 0) const;
  static Masker load(const std::string& path);

 private:
  MaskerConfig config_;
  std::vector<Tensor> branch_w_;  // fuse_channels × C_l × 3 × 3 per observed layer
  std::vector<std::vector<Real>> branch_b_;
  Tensor fuse_w_;  // 1 × (n_obs·fuse_channels) × 3 × 3
  std::vector<Real> fuse_b_;
};

}  // namespace salmask
