#pragma once

#include <optional>
#include <vector>

#include "salmask/classifier.hpp"
#include "salmask/data.hpp"
#include "salmask/tensor.hpp"

namespace salmask {

struct EvalReport {
  double om = 0, le = 0, f1 = 0, sm = 0, pxap = 0;
  double mean_mask = 0;  // percent
  int n_samples = 0;
};

// Threshold at the mask's own mean; ties (>=) go to 1.
Tensor binarize_mask(const Tensor& mask);

// Largest 8-connected component of a binary mask; ties broken by the smallest
// row-major index of the component's first pixel. All-zero mask -> nullopt.
std::optional<Box> largest_component_box(const Tensor& binary);

double iou(const Box& a, const Box& b);

struct WsolScores {
  double om = 0, le = 0, f1 = 0;  // percentages
};

// ILSVRC-style scoring: LE error unless some gt box reaches IoU >= 0.5; OM
// additionally requires the predicted label to match; F1 is the pixel-overlap
// F1 against the best-matching gt box.
WsolScores wsol_scores(const std::vector<std::optional<Box>>& pred_boxes,
                       const std::vector<int>& pred_labels,
                       const std::vector<ImageSample>& samples);

// log(max(a, 0.05)) - log(p) on the nearest-neighbor upsampled crop.
double saliency_metric(const Classifier& classifier, const Tensor& image, const Box& box,
                       int label);

// Pixel average precision over pooled pixels, in percent.
double pxap(const std::vector<Tensor>& masks, const std::vector<Tensor>& gt_masks);

}  // namespace salmask
