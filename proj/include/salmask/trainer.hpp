#pragma once

#include <string>
#include <vector>

#include "salmask/classifier.hpp"
#include "salmask/data.hpp"
#include "salmask/masker.hpp"
#include "salmask/metrics.hpp"
#include "salmask/objectives.hpp"
#include "salmask/perturb.hpp"

namespace salmask {

struct ClassifierTrainConfig {
  int epochs = 10;
  int batch_size = 64;
  double lr = 1e-3;
  uint64_t seed = 0;
};

struct ClassifierTrainResult {
  Classifier classifier;
  std::vector<double> epoch_losses;  // mean cross-entropy per epoch
  int steps = 0;
};

// Supervised cross-entropy training; deterministic in (config.seed, dataset).
// Throws on NaN loss with the step index.
ClassifierTrainResult train_classifier(const std::vector<ImageSample>& train,
                                       const ClassifierTrainConfig& config);

double classifier_accuracy(const Classifier& c, const std::vector<ImageSample>& samples);

struct TrainConfig {
  std::string mode = "fix";  // fix | ca
  ObjectiveConfig objective;
  MaskerConfig masker;
  Infiller infiller;
  int steps = 500;
  int batch_size = 32;
  double masker_lr = 1e-3;
  double classifier_lr = 1e-3;  // CA classifier step
  int pool_push_every = 100;
  uint64_t seed = 0;
  int log_every = 1;
  // what the CA classifier step trains on; the alternative keeps a clean
  // image in every other batch
  std::string ca_classifier_input = "masked_out";  // masked_out | mixed

  void validate() const;
};

struct LogEntry {
  int step = 0;
  ObjectiveBreakdown loss;
  Real mean_mask = 0;
};

struct RunRecord {
  std::vector<LogEntry> log;
  std::string run_dir;  // empty when training in memory only
  std::string best_ckpt, last_ckpt;
};

struct TrainResult {
  Masker masker;
  RunRecord record;
};

// Masker trained against a frozen classifier; classifier weights are
// bit-identical before and after.
TrainResult train_fix(const Classifier& classifier, const std::vector<ImageSample>& train,
                      const TrainConfig& config, const std::string& run_dir = "");

// Alternates masker steps against a pool-sampled checkpoint with supervised
// classifier steps on masked images; pushes a snapshot to the pool every
// pool_push_every masker steps.
TrainResult train_ca(const Classifier& base, const std::vector<ImageSample>& train,
                     const TrainConfig& config, const std::string& run_dir = "");

// Same loop as the configured mode, but the step budget is one epoch through
// the FULL training set: ceil(full_dataset_size / batch_size).
TrainResult train_fewshot(const Classifier& classifier, const std::vector<ImageSample>& subsample,
                          int full_dataset_size, const TrainConfig& config,
                          const std::string& run_dir = "");

// OM, LE, F1, SM, PxAP and mean mask value over a ground-truthed dataset.
// Class predictions come from the base classifier on the unmasked image.
EvalReport evaluate_checkpoint(const Masker& masker, const Classifier& classifier,
                               const std::vector<ImageSample>& samples);

void write_eval_report(const EvalReport& r, const std::string& path);

// Saliency maps for a sample set, one n=1 tensor per sample (deterministic
// sigmoid mode).
std::vector<Tensor> saliency_maps(const Masker& masker, const Classifier& classifier,
                                  const std::vector<ImageSample>& samples);

}  // namespace salmask
