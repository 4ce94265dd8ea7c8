#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "salmask/classifier.hpp"
#include "salmask/perturb.hpp"
#include "salmask/tensor.hpp"

namespace salmask {

struct RegularizerConfig {
  double lambda_m_in = 0.0;   // L1 coefficient, masked-in side
  double lambda_m_out = 0.0;  // L1 coefficient, masked-out side
  double lambda_tv = 0.0;

  void validate() const;
};

struct ObjectiveConfig {
  double lambda_out = 0.5;
  double lambda_in = 0.5;
  std::string out_kind = "max_ent";   // none | min_class | max_ent
  std::string in_kind = "max_class";  // none | max_class
  RegularizerConfig reg;

  void validate() const;
};

// -log probs[label], probability floored at 1e-12.
Real cross_entropy(const Real* probs, int k, int label);
// -sum p log p with 0 log 0 = 0.
Real prediction_entropy(const Real* probs, int k);

// Sum of squared horizontal and vertical neighbor differences.
Real tv(const Tensor& mask);
// d tv/d mask, accumulated into grad scaled by coeff.
void tv_backward(const Tensor& mask, Real coeff, Tensor& grad);

// L1 of the mask gated on the classifier verdict for the corresponding masked
// image: in-side counts when the masked-in image is correctly classified,
// out-side when the masked-out image is incorrectly classified.
Real conditional_l1(const Tensor& mask, Side side, bool classifier_correct);

struct ObjectiveBreakdown {
  Real total = 0, l_in = 0, l_out = 0, l1_in = 0, l1_out = 0, tv = 0;
};

struct ObjectiveEval {
  ObjectiveBreakdown mean;                 // averaged over the batch
  std::vector<uint8_t> in_correct;         // per-example masked-in verdicts
  std::vector<uint8_t> out_correct;        // per-example masked-out verdicts
  Real mean_mask = 0;
};

// Batch objective on explicit masks (mask is n×1×H×W aligned with images).
// When grad_mask is non-null, writes d(mean total)/d(mask) there; frozen
// verdicts may be supplied to fix the conditional-L1 gates (used by the
// finite-difference checks).
ObjectiveEval combined_objective(const Classifier& classifier, const Tensor& images,
                                 const std::vector<int>& labels, const Tensor& mask,
                                 const ObjectiveConfig& config, const Infiller& infiller,
                                 Tensor* grad_mask = nullptr,
                                 const std::vector<uint8_t>* frozen_in = nullptr,
                                 const std::vector<uint8_t>* frozen_out = nullptr);

}  // namespace salmask
