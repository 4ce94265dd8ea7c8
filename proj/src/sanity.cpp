#include "salmask/sanity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace salmask {

void RoarCurve::validate() const {
  if (points.empty()) throw std::runtime_error("empty roar curve");
  bool has_zero = false;
  for (size_t i = 0; i < points.size(); ++i) {
    if (points[i].first == 0.0) has_zero = true;
    if (i > 0 && points[i].first <= points[i - 1].first)
      throw std::runtime_error("roar curve t values must be strictly increasing");
  }
  if (!has_zero) throw std::runtime_error("roar curve must include t=0");
}

namespace {

// average ranks with ties sharing the mean rank
std::vector<double> rank_values(const std::vector<Real>& v) {
  const size_t n = v.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const size_t n = a.size();
  double ma = 0, mb = 0;
  for (size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0, saa = 0, sbb = 0;
  for (size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;  // constant map rule
  return sab / std::sqrt(saa * sbb);
}

double spearman(const Tensor& a, const Tensor& b, bool absolute) {
  std::vector<Real> va(a.data), vb(b.data);
  if (absolute) {
    for (Real& v : va) v = std::fabs(v);
    for (Real& v : vb) v = std::fabs(v);
  }
  return pearson(rank_values(va), rank_values(vb));
}

double ssim_pair(const Tensor& a, const Tensor& b) {
  constexpr int kWin = 8;
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;  // dynamic range 1
  const int h = a.h, w = a.w;
  double total = 0.0;
  int count = 0;
  for (int y = 0; y + kWin <= h; ++y)
    for (int x = 0; x + kWin <= w; ++x) {
      double ma = 0, mb = 0;
      for (int dy = 0; dy < kWin; ++dy)
        for (int dx = 0; dx < kWin; ++dx) {
          ma += a.at(0, 0, y + dy, x + dx);
          mb += b.at(0, 0, y + dy, x + dx);
        }
      const double inv = 1.0 / (kWin * kWin);
      ma *= inv;
      mb *= inv;
      double va = 0, vb = 0, cov = 0;
      for (int dy = 0; dy < kWin; ++dy)
        for (int dx = 0; dx < kWin; ++dx) {
          const double da = a.at(0, 0, y + dy, x + dx) - ma;
          const double db = b.at(0, 0, y + dy, x + dx) - mb;
          va += da * da;
          vb += db * db;
          cov += da * db;
        }
      va *= inv;
      vb *= inv;
      cov *= inv;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
               ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return total / count;
}

}  // namespace

double saliency_similarity(const std::vector<Tensor>& maps_a, const std::vector<Tensor>& maps_b,
                           const std::string& measure) {
  if (maps_a.size() != maps_b.size() || maps_a.empty())
    throw std::runtime_error("saliency_similarity: map sets are misaligned");
  double total = 0.0;
  for (size_t i = 0; i < maps_a.size(); ++i) {
    if (measure == "rank")
      total += spearman(maps_a[i], maps_b[i], false);
    else if (measure == "rank_abs")
      total += spearman(maps_a[i], maps_b[i], true);
    else if (measure == "ssim")
      total += ssim_pair(maps_a[i], maps_b[i]);
    else
      throw std::runtime_error("unknown similarity measure: " + measure);
  }
  return total / static_cast<double>(maps_a.size());
}

std::vector<ImageSample> roar_degrade(const std::vector<ImageSample>& samples,
                                      const std::vector<Tensor>& maps, double t) {
  if (samples.size() != maps.size())
    throw std::runtime_error("roar_degrade: one saliency map per sample required");
  // per-channel mean over the input dataset
  double mean[3] = {0, 0, 0};
  int64_t count = 0;
  for (const auto& s : samples) {
    for (int c = 0; c < 3; ++c) {
      const Real* p = s.image.ptr(0, c);
      for (int64_t i = 0; i < s.image.plane(); ++i) mean[c] += p[i];
    }
    count += s.image.plane();
  }
  for (double& m : mean) m /= static_cast<double>(count);

  std::vector<ImageSample> out = samples;
  const int64_t plane = samples[0].image.plane();
  const auto n_remove = static_cast<int64_t>(std::ceil(t * static_cast<double>(plane)));
  for (size_t i = 0; i < out.size(); ++i) {
    // rank pixels by saliency, ties by scan order
    std::vector<int> order(plane);
    std::iota(order.begin(), order.end(), 0);
    const Tensor& m = maps[i];
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return m.data[a] > m.data[b]; });
    for (int64_t r = 0; r < std::min(n_remove, plane); ++r)
      for (int c = 0; c < 3; ++c) out[i].image.ptr(0, c)[order[r]] = mean[c];
  }
  return out;
}

RoarCurve roar_run(const std::vector<ImageSample>& train, const std::vector<ImageSample>& val,
                   const std::vector<Tensor>& train_maps, const std::vector<Tensor>& val_maps,
                   const std::vector<double>& t_grid, const ClassifierTrainConfig& retrain) {
  RoarCurve curve;
  for (double t : t_grid) {
    const std::vector<ImageSample> train_d = roar_degrade(train, train_maps, t);
    const std::vector<ImageSample> val_d = roar_degrade(val, val_maps, t);
    ClassifierTrainResult res = train_classifier(train_d, retrain);
    curve.points.emplace_back(t, classifier_accuracy(res.classifier, val_d));
  }
  curve.validate();
  return curve;
}

namespace {

void randomize_stage(Classifier& c, int stage_index, Rng& rng) {
  auto& st = c.stages()[stage_index];
  const Real scale = std::sqrt(2.0 / (st.w.c * 9));
  for (Real& v : st.w.data) v = scale * rng.normal();
  std::fill(st.bias.begin(), st.bias.end(), 0.0);
  std::fill(st.gamma.begin(), st.gamma.end(), 1.0);
  std::fill(st.beta.begin(), st.beta.end(), 0.0);
}

void randomize_head(Classifier& c, Rng& rng) {
  const Real hscale = std::sqrt(1.0 / 256.0);
  for (Real& v : c.head_w().data) v = hscale * rng.normal();
  std::fill(c.head_b().begin(), c.head_b().end(), 0.0);
}

}  // namespace

SimilarityReport mprt_run(const Masker& masker, const Classifier& classifier,
                          const std::vector<ImageSample>& subset, uint64_t seed) {
  Rng rng(seed);
  const std::vector<Tensor> original = saliency_maps(masker, classifier, subset);
  SimilarityReport report;
  report.stages.push_back(StageSimilarity{
      "none", saliency_similarity(original, original, "rank_abs"),
      saliency_similarity(original, original, "rank"),
      saliency_similarity(original, original, "ssim")});
  Classifier perturbed = classifier;
  const std::vector<std::string> names{"head", "stage5", "stage4", "stage3", "stage2", "stage1"};
  for (size_t i = 0; i < names.size(); ++i) {
    if (i == 0)
      randomize_head(perturbed, rng);
    else
      randomize_stage(perturbed, 5 - static_cast<int>(i), rng);
    const std::vector<Tensor> maps = saliency_maps(masker, perturbed, subset);
    report.stages.push_back(StageSimilarity{names[i],
                                            saliency_similarity(original, maps, "rank_abs"),
                                            saliency_similarity(original, maps, "rank"),
                                            saliency_similarity(original, maps, "ssim")});
  }
  return report;
}

DrtResult drt_run(const std::vector<ImageSample>& train, const std::vector<ImageSample>& heldout,
                  const ClassifierTrainConfig& cls_config, const TrainConfig& masker_recipe,
                  uint64_t seed) {
  // classifier A on true labels
  ClassifierTrainResult a = train_classifier(train, cls_config);
  // classifier B on a fixed label permutation
  Rng rng(seed);
  std::vector<int> perm = rng.permutation(static_cast<int>(train.size()));
  std::vector<ImageSample> shuffled = train;
  for (size_t i = 0; i < train.size(); ++i) shuffled[i].label = train[perm[i]].label;
  ClassifierTrainConfig cls_b = cls_config;
  cls_b.seed = cls_config.seed + 1;
  ClassifierTrainResult b = train_classifier(shuffled, cls_b);

  // one masker per classifier, same recipe
  const std::string mode = masker_recipe.mode;
  TrainResult masker_a = mode == "ca" ? train_ca(a.classifier, train, masker_recipe)
                                      : train_fix(a.classifier, train, masker_recipe);
  TrainResult masker_b = mode == "ca" ? train_ca(b.classifier, shuffled, masker_recipe)
                                      : train_fix(b.classifier, shuffled, masker_recipe);

  const std::vector<Tensor> maps_a = saliency_maps(masker_a.masker, a.classifier, heldout);
  const std::vector<Tensor> maps_b = saliency_maps(masker_b.masker, b.classifier, heldout);

  DrtResult res;
  res.true_val_accuracy = classifier_accuracy(a.classifier, heldout);
  res.shuffled_val_accuracy = classifier_accuracy(b.classifier, heldout);
  res.report.stages.push_back(StageSimilarity{"shuffled",
                                              saliency_similarity(maps_a, maps_b, "rank_abs"),
                                              saliency_similarity(maps_a, maps_b, "rank"),
                                              saliency_similarity(maps_a, maps_b, "ssim")});
  return res;
}

}  // namespace salmask
