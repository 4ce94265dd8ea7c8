#include "salmask/trainer.hpp"

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <stdexcept>

#include "json.hpp"
#include "salmask/kernels.hpp"
#include "salmask/optimizer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace salmask {

namespace k = kernels;

void TrainConfig::validate() const {
  if (mode != "fix" && mode != "ca") throw std::runtime_error("mode must be fix or ca");
  if (steps < 1) throw std::runtime_error("step budget must be >= 1");
  if (batch_size < 1) throw std::runtime_error("batch_size must be >= 1");
  if (pool_push_every < 1) throw std::runtime_error("pool_push_every must be >= 1");
  if (ca_classifier_input != "masked_out" && ca_classifier_input != "mixed")
    throw std::runtime_error("ca_classifier_input must be masked_out or mixed");
  objective.validate();
  masker.validate();
}

namespace {

Tensor stack_images(const std::vector<ImageSample>& samples, const std::vector<int>& idx) {
  const int n = static_cast<int>(idx.size());
  Tensor batch(n, 3, kImageSize, kImageSize);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c)
      std::copy_n(samples[idx[i]].image.ptr(0, c), batch.plane(), batch.ptr(i, c));
  return batch;
}

std::vector<int> stack_labels(const std::vector<ImageSample>& samples, const std::vector<int>& idx) {
  std::vector<int> labels(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) labels[i] = samples[idx[i]].label;
  return labels;
}

// Deterministic epoch-shuffled batch stream; recycles indefinitely.
class BatchStream {
 public:
  BatchStream(int n, int batch_size, Rng rng)
      : n_(n), batch_(batch_size), rng_(rng), order_(), pos_(0) {}

  std::vector<int> next() {
    std::vector<int> idx;
    idx.reserve(batch_);
    for (int i = 0; i < batch_; ++i) {
      if (pos_ >= order_.size()) {
        order_ = rng_.permutation(n_);
        pos_ = 0;
      }
      idx.push_back(order_[pos_++]);
    }
    return idx;
  }

 private:
  int n_, batch_;
  Rng rng_;
  std::vector<int> order_;
  size_t pos_ = 0;
};

void check_nan(Real total, int step, const ObjectiveBreakdown& b) {
  if (std::isfinite(total)) return;
  throw std::runtime_error(
      "loss is not finite at step " + std::to_string(step) + " (l_in=" + std::to_string(b.l_in) +
      " l_out=" + std::to_string(b.l_out) + " l1_in=" + std::to_string(b.l1_in) +
      " l1_out=" + std::to_string(b.l1_out) + " tv=" + std::to_string(b.tv) + ")");
}

struct LossLogger {
  std::ofstream file;
  RunRecord* record;

  void log(int step, const ObjectiveBreakdown& b, Real mean_mask) {
    record->log.push_back(LogEntry{step, b, mean_mask});
    if (file.is_open()) {
      json j{{"step", step},       {"total", b.total}, {"l_in", b.l_in},
             {"l_out", b.l_out},   {"l1_in", b.l1_in}, {"l1_out", b.l1_out},
             {"tv", b.tv},         {"mean_mask", mean_mask}};
      file << j.dump() << "\n";
    }
  }
};

TrainResult run_masker_training(const Classifier& base, const std::vector<ImageSample>& train,
                                const TrainConfig& config, const std::string& run_dir) {
  config.validate();
  if (train.empty()) throw std::runtime_error("empty training set");
  const bool ca = config.mode == "ca";

  Rng master(config.seed);
  Rng init_rng = master.fork(1);
  Rng batch_rng = master.fork(2);
  Rng gumbel_rng = master.fork(3);
  Rng pool_rng = master.fork(4);

  Masker masker = Masker::init(config.masker, init_rng);
  Adam opt;
  opt.lr = config.masker_lr;
  auto params = masker.named_params();
  std::vector<std::vector<Real>*> param_arrays;
  for (auto& [name, v] : params) param_arrays.push_back(v);
  opt.init(param_arrays);
  MaskerGrads grads = masker.make_grads();

  // CA state: a continually trained copy plus the on-disk checkpoint pool
  Classifier live = base;
  Adam cls_opt;
  cls_opt.lr = config.classifier_lr;
  ClassifierGrads cls_grads = live.make_grads();
  std::vector<std::vector<Real>*> cls_param_arrays;
  for (auto& [name, v] : live.named_params()) cls_param_arrays.push_back(v);
  std::unique_ptr<ClassifierPool> pool;
  std::string pool_dir;
  if (ca) {
    pool_dir = run_dir.empty()
                   ? (fs::temp_directory_path() / ("salmask_pool_" + std::to_string(config.seed) +
                                                   "_" + std::to_string(::getpid())))
                         .string()
                   : (fs::path(run_dir) / "pool").string();
    fs::remove_all(pool_dir);
    pool = std::make_unique<ClassifierPool>(pool_dir);
    pool->push(base);
    cls_opt.init(cls_param_arrays);
  }

  RunRecord record;
  record.run_dir = run_dir;
  LossLogger logger{.file = {}, .record = &record};
  if (!run_dir.empty()) {
    fs::create_directories(run_dir);
    logger.file.open((fs::path(run_dir) / "log.jsonl").string());
  }

  BatchStream stream(static_cast<int>(train.size()), config.batch_size, batch_rng);
  Real best_loss = std::numeric_limits<Real>::infinity();
  Masker best_masker = masker;
  Real window_sum = 0.0;
  int window_count = 0;
  constexpr int kWindow = 10;

  for (int step = 0; step < config.steps; ++step) {
    const double lr_scale = step >= (config.steps * 4) / 5 ? 0.2 : 1.0;
    const std::vector<int> idx = stream.next();
    Tensor images = stack_images(train, idx);
    std::vector<int> labels = stack_labels(train, idx);

    // masker step: theta_M only, against a pool sample (CA) or the fixed
    // classifier; no classifier parameters receive gradient here
    Classifier step_cls_storage;
    const Classifier* step_cls = &base;
    if (ca) {
      step_cls_storage = pool->sample(pool_rng);
      step_cls = &step_cls_storage;
    }
    ActivationSet acts = step_cls->forward(images).activations;
    MaskerCache mcache;
    MaskerOutput mout = masker.forward_train(acts, mcache, gumbel_rng);
    Tensor grad_mask = like(mout.mask);
    ObjectiveEval eval = combined_objective(*step_cls, images, labels, mout.mask, config.objective,
                                            config.infiller, &grad_mask);
    check_nan(eval.mean.total, step, eval.mean);
    grads.zero();
    masker.backward(mcache, grad_mask, grads);
    opt.step(param_arrays, grads.arrays(), lr_scale);

    // CA classifier step: supervised cross-entropy on masked images with the
    // ground-truth labels; masks are constants here
    if (ca) {
      Tensor cls_in = apply_mask(images, mout.mask, Side::Out);
      if (config.ca_classifier_input == "mixed" && step % 2 == 1) cls_in = images;
      ClassifierCache cache;
      ClassifierOutput out = live.forward(cls_in, cache);
      Tensor g_logits(images.n, live.num_classes(), 1, 1);
      const Real scale = 1.0 / static_cast<Real>(images.n);
      Real cls_loss = 0.0;
      for (int n = 0; n < images.n; ++n) {
        const Real* p = out.probs.ptr(n, 0);
        Real* g = g_logits.ptr(n, 0);
        cls_loss += cross_entropy(p, live.num_classes(), labels[n]) * scale;
        for (int k2 = 0; k2 < live.num_classes(); ++k2)
          g[k2] = scale * (p[k2] - (k2 == labels[n] ? 1.0 : 0.0));
      }
      if (!std::isfinite(cls_loss))
        throw std::runtime_error("classifier loss is not finite at step " + std::to_string(step));
      cls_grads.zero();
      live.backward_full(cache, g_logits, cls_grads);
      cls_opt.step(cls_param_arrays, cls_grads.arrays(), lr_scale);
      if ((step + 1) % config.pool_push_every == 0) pool->push(live);
    }

    if (step % config.log_every == 0) logger.log(step, eval.mean, eval.mean_mask);

    // best checkpoint tracked on a smoothed window of the training objective
    window_sum += eval.mean.total;
    if (++window_count == kWindow) {
      const Real avg = window_sum / kWindow;
      if (avg < best_loss) {
        best_loss = avg;
        best_masker = masker;
      }
      window_sum = 0.0;
      window_count = 0;
    }
  }

  if (!run_dir.empty()) {
    record.best_ckpt = (fs::path(run_dir) / "ckpt_best.bin").string();
    record.last_ckpt = (fs::path(run_dir) / "ckpt_last.bin").string();
    best_masker.save(record.best_ckpt, config.steps);
    masker.save(record.last_ckpt, config.steps);
  }
  if (ca && run_dir.empty()) fs::remove_all(pool_dir);

  return TrainResult{std::move(masker), std::move(record)};
}

}  // namespace

TrainResult train_fix(const Classifier& classifier, const std::vector<ImageSample>& train,
                      const TrainConfig& config, const std::string& run_dir) {
  TrainConfig c = config;
  c.mode = "fix";
  return run_masker_training(classifier, train, c, run_dir);
}

TrainResult train_ca(const Classifier& base, const std::vector<ImageSample>& train,
                     const TrainConfig& config, const std::string& run_dir) {
  TrainConfig c = config;
  c.mode = "ca";
  return run_masker_training(base, train, c, run_dir);
}

TrainResult train_fewshot(const Classifier& classifier, const std::vector<ImageSample>& subsample,
                          int full_dataset_size, const TrainConfig& config,
                          const std::string& run_dir) {
  TrainConfig c = config;
  c.steps = (full_dataset_size + config.batch_size - 1) / config.batch_size;
  return run_masker_training(classifier, subsample, c, run_dir);
}

ClassifierTrainResult train_classifier(const std::vector<ImageSample>& train,
                                       const ClassifierTrainConfig& config) {
  if (train.empty()) throw std::runtime_error("empty training set");
  int num_classes = 0;
  for (const auto& s : train) num_classes = std::max(num_classes, s.label + 1);

  Rng master(config.seed);
  Rng init_rng = master.fork(1);
  Rng batch_rng = master.fork(2);

  ClassifierTrainResult res;
  res.classifier = Classifier::init(num_classes, init_rng);
  Classifier& cls = res.classifier;
  Adam opt;
  opt.lr = config.lr;
  std::vector<std::vector<Real>*> param_arrays;
  for (auto& [name, v] : cls.named_params()) param_arrays.push_back(v);
  opt.init(param_arrays);
  ClassifierGrads grads = cls.make_grads();

  const int n = static_cast<int>(train.size());
  const int steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const int total_steps = steps_per_epoch * config.epochs;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<int> order = batch_rng.permutation(n);
    Real epoch_loss = 0.0;
    for (int b = 0; b < steps_per_epoch; ++b) {
      std::vector<int> idx;
      for (int i = b * config.batch_size; i < std::min(n, (b + 1) * config.batch_size); ++i)
        idx.push_back(order[i]);
      Tensor images = stack_images(train, idx);
      std::vector<int> labels = stack_labels(train, idx);
      ClassifierCache cache;
      ClassifierOutput out = cls.forward(images, cache);
      Tensor g_logits(images.n, num_classes, 1, 1);
      const Real scale = 1.0 / static_cast<Real>(images.n);
      Real loss = 0.0;
      for (int i = 0; i < images.n; ++i) {
        const Real* p = out.probs.ptr(i, 0);
        Real* g = g_logits.ptr(i, 0);
        loss += cross_entropy(p, num_classes, labels[i]) * scale;
        for (int k2 = 0; k2 < num_classes; ++k2)
          g[k2] = scale * (p[k2] - (k2 == labels[i] ? 1.0 : 0.0));
      }
      if (!std::isfinite(loss))
        throw std::runtime_error("classifier training diverged (NaN loss) at step " +
                                 std::to_string(res.steps));
      grads.zero();
      cls.backward_full(cache, g_logits, grads);
      const double lr_scale = res.steps >= (total_steps * 4) / 5 ? 0.2 : 1.0;
      opt.step(param_arrays, grads.arrays(), lr_scale);
      epoch_loss += loss;
      ++res.steps;
    }
    res.epoch_losses.push_back(epoch_loss / steps_per_epoch);
  }
  return res;
}

double classifier_accuracy(const Classifier& c, const std::vector<ImageSample>& samples) {
  if (samples.empty()) return 0.0;
  int correct = 0;
  const int batch = 64;
  for (size_t start = 0; start < samples.size(); start += batch) {
    std::vector<int> idx;
    for (size_t i = start; i < std::min(samples.size(), start + batch); ++i)
      idx.push_back(static_cast<int>(i));
    Tensor images = stack_images(samples, idx);
    ClassifierOutput out = c.forward(images);
    for (size_t i = 0; i < idx.size(); ++i)
      if (argmax_row(out.probs, static_cast<int>(i)) == samples[idx[i]].label) ++correct;
  }
  return 100.0 * correct / static_cast<double>(samples.size());
}

std::vector<Tensor> saliency_maps(const Masker& masker, const Classifier& classifier,
                                  const std::vector<ImageSample>& samples) {
  std::vector<Tensor> maps;
  maps.reserve(samples.size());
  const int batch = 32;
  for (size_t start = 0; start < samples.size(); start += batch) {
    std::vector<int> idx;
    for (size_t i = start; i < std::min(samples.size(), start + batch); ++i)
      idx.push_back(static_cast<int>(i));
    Tensor images = stack_images(samples, idx);
    ActivationSet acts = classifier.forward(images).activations;
    MaskerOutput mout = masker.forward(acts);
    for (size_t i = 0; i < idx.size(); ++i) {
      Tensor m(1, 1, kImageSize, kImageSize);
      std::copy_n(mout.mask.ptr(static_cast<int>(i), 0), m.plane(), m.ptr(0, 0));
      maps.push_back(std::move(m));
    }
  }
  return maps;
}

EvalReport evaluate_checkpoint(const Masker& masker, const Classifier& classifier,
                               const std::vector<ImageSample>& samples) {
  if (samples.empty()) throw std::runtime_error("evaluate_checkpoint: empty dataset");
  EvalReport report;
  report.n_samples = static_cast<int>(samples.size());

  std::vector<std::optional<Box>> boxes;
  std::vector<int> pred_labels;
  std::vector<Tensor> masks;
  std::vector<Tensor> gts;
  double mask_sum = 0.0;
  int64_t mask_px = 0;
  double sm_sum = 0.0;

  const int batch = 32;
  for (size_t start = 0; start < samples.size(); start += batch) {
    std::vector<int> idx;
    for (size_t i = start; i < std::min(samples.size(), start + batch); ++i)
      idx.push_back(static_cast<int>(i));
    Tensor images = stack_images(samples, idx);
    ClassifierOutput out = classifier.forward(images);
    MaskerOutput mout = masker.forward(out.activations);
    for (size_t i = 0; i < idx.size(); ++i) {
      const auto& sample = samples[idx[i]];
      pred_labels.push_back(argmax_row(out.probs, static_cast<int>(i)));
      Tensor m(1, 1, kImageSize, kImageSize);
      std::copy_n(mout.mask.ptr(static_cast<int>(i), 0), m.plane(), m.ptr(0, 0));
      for (Real v : m.data) mask_sum += v;
      mask_px += m.size();
      Tensor bin = binarize_mask(m);
      std::optional<Box> box = largest_component_box(bin);
      boxes.push_back(box);
      const Box sm_box = box.value_or(Box{0, 0, kImageSize - 1, kImageSize - 1});
      sm_sum += saliency_metric(classifier, sample.image, sm_box, sample.label);
      masks.push_back(std::move(m));
      gts.push_back(sample.gt_mask);
    }
  }

  const WsolScores wsol = wsol_scores(boxes, pred_labels, samples);
  report.om = wsol.om;
  report.le = wsol.le;
  report.f1 = wsol.f1;
  report.sm = sm_sum / static_cast<double>(samples.size());
  report.pxap = pxap(masks, gts);
  report.mean_mask = 100.0 * mask_sum / static_cast<double>(mask_px);
  return report;
}

void write_eval_report(const EvalReport& r, const std::string& path) {
  json j{{"om", r.om},     {"le", r.le},           {"f1", r.f1},
         {"sm", r.sm},     {"pxap", r.pxap},       {"mean_mask", r.mean_mask},
         {"n_samples", r.n_samples}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write eval report: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace salmask
