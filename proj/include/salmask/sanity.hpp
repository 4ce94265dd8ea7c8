#pragma once

#include <string>
#include <vector>

#include "salmask/classifier.hpp"
#include "salmask/data.hpp"
#include "salmask/masker.hpp"
#include "salmask/trainer.hpp"

namespace salmask {

struct RoarCurve {
  std::vector<std::pair<double, double>> points;  // (removal fraction t, val accuracy %)
  void validate() const;                          // t strictly increasing and t=0 present
};

struct StageSimilarity {
  std::string stage;
  double rank_abs = 0, rank = 0, ssim = 0;
};

struct SimilarityReport {
  std::vector<StageSimilarity> stages;
};

// Spearman rank correlation of flattened pixel values (rank / rank_abs on
// absolute values) or SSIM with 8x8 windows and dynamic range 1; averaged
// over images. Zero-variance maps score 0 for the rank measures.
double saliency_similarity(const std::vector<Tensor>& maps_a, const std::vector<Tensor>& maps_b,
                           const std::string& measure);

// Replaces the ceil(t*H*W) most salient pixels per image (ties by scan order)
// with the per-channel dataset mean. Labels are unchanged.
std::vector<ImageSample> roar_degrade(const std::vector<ImageSample>& samples,
                                      const std::vector<Tensor>& maps, double t);

// For each t: degrade train and val with the given saliency maps, train a
// fresh classifier with the standard recipe, record val accuracy.
RoarCurve roar_run(const std::vector<ImageSample>& train, const std::vector<ImageSample>& val,
                   const std::vector<Tensor>& train_maps, const std::vector<Tensor>& val_maps,
                   const std::vector<double>& t_grid, const ClassifierTrainConfig& retrain);

// Cascading model-parameter randomization from the head downward; similarity
// of regenerated maps against the originals per stage. Stage 0 is the
// untouched classifier (identity similarities by construction).
SimilarityReport mprt_run(const Masker& masker, const Classifier& classifier,
                          const std::vector<ImageSample>& subset, uint64_t seed);

// Data randomization test: train one classifier on true labels and one on a
// fixed label shuffle, train a masker per classifier with the same recipe,
// compare the two maskers' maps on held-out images.
struct DrtResult {
  SimilarityReport report;          // single "shuffled" row
  double true_val_accuracy = 0;     // sanity visibility
  double shuffled_val_accuracy = 0;
};
DrtResult drt_run(const std::vector<ImageSample>& train, const std::vector<ImageSample>& heldout,
                  const ClassifierTrainConfig& cls_config, const TrainConfig& masker_recipe,
                  uint64_t seed);

}  // namespace salmask
