#include "salmask/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace salmask {

Tensor binarize_mask(const Tensor& mask) {
  if (mask.size() == 0) throw std::runtime_error("binarize_mask: empty mask");
  Real mean = 0.0;
  for (Real v : mask.data) mean += v;
  mean /= static_cast<Real>(mask.size());
  Tensor out = like(mask);
  for (int64_t i = 0; i < mask.size(); ++i) out.data[i] = mask.data[i] >= mean ? 1.0 : 0.0;
  return out;
}

std::optional<Box> largest_component_box(const Tensor& binary) {
  const int h = binary.h, w = binary.w;
  std::vector<int> label(static_cast<size_t>(h) * w, -1);
  int best_size = 0, best_first = -1;
  Box best{};
  std::vector<int> stack;
  int comp = 0;
  for (int start = 0; start < h * w; ++start) {
    if (binary.data[start] < 0.5 || label[start] >= 0) continue;
    // flood fill, 8-connected
    int size = 0;
    Box box{start % w, start / w, start % w, start / w};
    stack.clear();
    stack.push_back(start);
    label[start] = comp;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      ++size;
      const int py = p / w, px = p % w;
      box.x0 = std::min(box.x0, px), box.x1 = std::max(box.x1, px);
      box.y0 = std::min(box.y0, py), box.y1 = std::max(box.y1, py);
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dy == 0 && dx == 0) continue;
          const int ny = py + dy, nx = px + dx;
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          const int q = ny * w + nx;
          if (binary.data[q] >= 0.5 && label[q] < 0) {
            label[q] = comp;
            stack.push_back(q);
          }
        }
    }
    // scan order discovers components by ascending first-pixel index, so a
    // strict > keeps the earlier component on ties
    if (size > best_size) {
      best_size = size;
      best_first = start;
      best = box;
    }
    ++comp;
  }
  (void)best_first;
  if (best_size == 0) return std::nullopt;
  return best;
}

double iou(const Box& a, const Box& b) {
  const int ix0 = std::max(a.x0, b.x0), iy0 = std::max(a.y0, b.y0);
  const int ix1 = std::min(a.x1, b.x1), iy1 = std::min(a.y1, b.y1);
  const int64_t iw = ix1 - ix0 + 1, ih = iy1 - iy0 + 1;
  const int64_t inter = (iw > 0 && ih > 0) ? iw * ih : 0;
  const int64_t uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

WsolScores wsol_scores(const std::vector<std::optional<Box>>& pred_boxes,
                       const std::vector<int>& pred_labels,
                       const std::vector<ImageSample>& samples) {
  if (samples.empty()) throw std::runtime_error("wsol_scores: empty sample set");
  if (pred_boxes.size() != samples.size() || pred_labels.size() != samples.size())
    throw std::runtime_error("wsol_scores: prediction/sample count mismatch");
  int le_errors = 0, om_errors = 0;
  double f1_sum = 0.0;
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto& gt = samples[i].gt_boxes;
    bool le_ok = false;
    double best_iou = -1.0;
    const Box* best_gt = nullptr;
    if (pred_boxes[i].has_value()) {
      for (const Box& g : gt) {
        const double v = iou(*pred_boxes[i], g);
        if (v > best_iou) {
          best_iou = v;
          best_gt = &g;
        }
        if (v >= 0.5) le_ok = true;
      }
    }
    if (!le_ok) ++le_errors;
    if (!le_ok || pred_labels[i] != samples[i].label) ++om_errors;
    if (pred_boxes[i].has_value() && best_gt != nullptr) {
      const Box& p = *pred_boxes[i];
      const int ix0 = std::max(p.x0, best_gt->x0), iy0 = std::max(p.y0, best_gt->y0);
      const int ix1 = std::min(p.x1, best_gt->x1), iy1 = std::min(p.y1, best_gt->y1);
      const int64_t iw = ix1 - ix0 + 1, ih = iy1 - iy0 + 1;
      const int64_t inter = (iw > 0 && ih > 0) ? iw * ih : 0;
      f1_sum += 2.0 * static_cast<double>(inter) /
                static_cast<double>(p.area() + best_gt->area());
    }
  }
  const double n = static_cast<double>(samples.size());
  return WsolScores{100.0 * om_errors / n, 100.0 * le_errors / n, 100.0 * f1_sum / n};
}

double saliency_metric(const Classifier& classifier, const Tensor& image, const Box& box,
                       int label) {
  const int H = image.h, W = image.w;
  if (box.x0 < 0 || box.y0 < 0 || box.x1 >= W || box.y1 >= H || box.x0 > box.x1 ||
      box.y0 > box.y1)
    throw std::runtime_error("saliency_metric: degenerate box");
  const int bw = box.x1 - box.x0 + 1, bh = box.y1 - box.y0 + 1;
  Tensor crop(1, image.c, H, W);
  for (int c = 0; c < image.c; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const int sy = box.y0 + y * bh / H;
        const int sx = box.x0 + x * bw / W;
        crop.at(0, c, y, x) = image.at(0, c, sy, sx);
      }
  ClassifierOutput out = classifier.forward(crop);
  const double p = std::max(out.probs.ptr(0, 0)[label], 1e-6);
  const double a = static_cast<double>(box.area()) / static_cast<double>(H * W);
  return std::log(std::max(a, 0.05)) - std::log(p);
}

double pxap(const std::vector<Tensor>& masks, const std::vector<Tensor>& gt_masks) {
  if (masks.size() != gt_masks.size() || masks.empty())
    throw std::runtime_error("pxap: mask/ground-truth count mismatch");
  std::vector<std::pair<Real, uint8_t>> px;
  int64_t total_pos = 0;
  for (size_t i = 0; i < masks.size(); ++i) {
    if (!masks[i].same_shape(gt_masks[i]))
      throw std::runtime_error("pxap: mask and ground truth are misaligned");
    for (int64_t j = 0; j < masks[i].size(); ++j) {
      const uint8_t pos = gt_masks[i].data[j] >= 0.5 ? 1 : 0;
      px.emplace_back(masks[i].data[j], pos);
      total_pos += pos;
    }
  }
  if (total_pos == 0) throw std::runtime_error("pxap: ground truth has no positive pixels");
  std::sort(px.begin(), px.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  // sweep distinct predicted values as thresholds, descending
  double ap = 0.0, prev_recall = 0.0;
  int64_t tp = 0, fp = 0;
  size_t i = 0;
  while (i < px.size()) {
    const Real v = px[i].first;
    while (i < px.size() && px[i].first == v) {
      tp += px[i].second;
      fp += 1 - px[i].second;
      ++i;
    }
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return 100.0 * ap;
}

}  // namespace salmask
