#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "salmask/rng.hpp"
#include "salmask/tensor.hpp"

namespace salmask {

// Five stages of (conv3x3, group norm, relu, stride-2 avg pool); the exposed
// activations are the post-pool stage outputs with sides 32,16,8,4,2.
constexpr std::array<int, 5> kStageChannels{16, 32, 64, 128, 256};
constexpr int kGnGroups = 8;
constexpr Real kGnEps = 1e-5;

struct ActivationSet {
  std::array<Tensor, 5> layers;  // index i = layer i+1 in 1-based layer naming
};

struct ClassifierOutput {
  Tensor logits;  // n×K×1×1
  Tensor probs;   // n×K×1×1, rows sum to 1
  ActivationSet activations;
};

struct StageCache {
  Tensor conv_out, gn_out, pool_out;
  std::vector<Real> gn_mean, gn_inv_std;
};

struct ClassifierCache {
  Tensor input;
  std::array<StageCache, 5> stages;
  Tensor gap_out;  // n×256×1×1
};

struct ClassifierGrads {
  struct StageG {
    Tensor w;
    std::vector<Real> bias, gamma, beta;
  };
  std::array<StageG, 5> stages;
  Tensor head_w;
  std::vector<Real> head_b;

  void zero();
  std::vector<std::vector<Real>*> arrays();
};

class Classifier {
 public:
  struct Stage {
    Tensor w;  // out×in×3×3
    std::vector<Real> bias, gamma, beta;
  };

  Classifier() = default;
  static Classifier init(int num_classes, Rng& rng);

  // Inference-mode forward (no cache retained); deterministic.
  ClassifierOutput forward(const Tensor& images) const;
  // Training-mode forward retaining everything the backward passes need.
  ClassifierOutput forward(const Tensor& images, ClassifierCache& cache) const;

  // Gradient w.r.t. the input image batch only; no parameter gradients.
  Tensor backward_input(const ClassifierCache& cache, const Tensor& grad_logits) const;
  // Full parameter gradients.
  void backward_full(const ClassifierCache& cache, const Tensor& grad_logits,
                     ClassifierGrads& grads) const;

  int num_classes() const { return num_classes_; }
  int64_t parameter_count() const;
  uint64_t weight_hash() const;  // FNV-1a over all parameter bytes

  std::vector<std::pair<std::string, std::vector<Real>*>> named_params();
  ClassifierGrads make_grads() const;

  void save(const std::string& path, uint64_t step = 0) const;
  static Classifier load(const std::string& path);

  std::array<Stage, 5>& stages() { return stages_; }
  const std::array<Stage, 5>& stages() const { return stages_; }
  Tensor& head_w() { return head_w_; }
  const Tensor& head_w() const { return head_w_; }
  std::vector<Real>& head_b() { return head_b_; }
  const std::vector<Real>& head_b() const { return head_b_; }

 private:
  std::array<Stage, 5> stages_;
  Tensor head_w_;  // K×256
  std::vector<Real> head_b_;
  int num_classes_ = 0;
};

int argmax_row(const Tensor& probs, int row);

// Bounded FIFO of classifier checkpoints on disk with an in-memory index.
class ClassifierPool {
 public:
  static constexpr int kCapacity = 30;

  explicit ClassifierPool(const std::string& dir);

  void push(const Classifier& c);
  Classifier sample(Rng& rng) const;  // uniform over current contents
  int size() const { return static_cast<int>(files_.size()); }
  const std::vector<std::string>& files() const { return files_; }

 private:
  void write_index() const;
  std::string dir_;
  std::vector<std::string> files_;
  uint64_t next_seq_ = 0;
};

}  // namespace salmask
