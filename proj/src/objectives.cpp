#include "salmask/objectives.hpp"

#include <cmath>
#include <stdexcept>

namespace salmask {

void RegularizerConfig::validate() const {
  if (!(lambda_m_in >= 0.0) || !(lambda_m_out >= 0.0) || !(lambda_tv >= 0.0) ||
      !std::isfinite(lambda_m_in) || !std::isfinite(lambda_m_out) || !std::isfinite(lambda_tv))
    throw std::runtime_error("regularizer coefficients must be finite and non-negative");
}

void ObjectiveConfig::validate() const {
  if (out_kind != "none" && out_kind != "min_class" && out_kind != "max_ent")
    throw std::runtime_error("out_kind must be none, min_class or max_ent");
  if (in_kind != "none" && in_kind != "max_class")
    throw std::runtime_error("in_kind must be none or max_class");
  if ((lambda_in == 0.0) != (in_kind == "none"))
    throw std::runtime_error("lambda_in must be 0 iff in_kind is none");
  if ((lambda_out == 0.0) != (out_kind == "none"))
    throw std::runtime_error("lambda_out must be 0 iff out_kind is none");
  if (in_kind == "none" && out_kind == "none")
    throw std::runtime_error("at least one of in_kind/out_kind must be set");
  if (lambda_in < 0.0 || lambda_in > 1.0 || lambda_out < 0.0 || lambda_out > 1.0)
    throw std::runtime_error("lambda_in and lambda_out must lie in [0,1]");
  reg.validate();
}

Real cross_entropy(const Real* probs, int k, int label) {
  if (label < 0 || label >= k)
    throw std::runtime_error("cross_entropy: label " + std::to_string(label) + " out of range");
  return -std::log(std::max(probs[label], 1e-12));
}

Real prediction_entropy(const Real* probs, int k) {
  Real h = 0.0;
  for (int i = 0; i < k; ++i)
    if (probs[i] > 0.0) h -= probs[i] * std::log(probs[i]);
  return h;
}

Real tv(const Tensor& mask) {
  Real acc = 0.0;
  for (int n = 0; n < mask.n; ++n) {
    const Real* m = mask.ptr(n, 0);
    const int h = mask.h, w = mask.w;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x + 1 < w; ++x) {
        const Real d = m[y * w + x] - m[y * w + x + 1];
        acc += d * d;
      }
    for (int y = 0; y + 1 < h; ++y)
      for (int x = 0; x < w; ++x) {
        const Real d = m[y * w + x] - m[(y + 1) * w + x];
        acc += d * d;
      }
  }
  return acc;
}

void tv_backward(const Tensor& mask, Real coeff, Tensor& grad) {
  for (int n = 0; n < mask.n; ++n) {
    const Real* m = mask.ptr(n, 0);
    Real* g = grad.ptr(n, 0);
    const int h = mask.h, w = mask.w;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x + 1 < w; ++x) {
        const Real d = 2.0 * (m[y * w + x] - m[y * w + x + 1]) * coeff;
        g[y * w + x] += d;
        g[y * w + x + 1] -= d;
      }
    for (int y = 0; y + 1 < h; ++y)
      for (int x = 0; x < w; ++x) {
        const Real d = 2.0 * (m[y * w + x] - m[(y + 1) * w + x]) * coeff;
        g[y * w + x] += d;
        g[(y + 1) * w + x] -= d;
      }
  }
}

Real conditional_l1(const Tensor& mask, Side side, bool classifier_correct) {
  const bool active = side == Side::In ? classifier_correct : !classifier_correct;
  if (!active) return 0.0;
  Real s = 0.0;
  for (Real v : mask.data) s += v;
  return s;
}

namespace {

// One masked branch: composite with optional infill, classifier forward, and
// enough state to push gradients back to the mask.
struct Branch {
  Tensor kept;          // kept-region mask (m for in, 1-m for out)
  Tensor masked;        // x ⊙ kept
  Tensor fill;          // infill values (empty when kind=none)
  Tensor classifier_in; // composite fed to the classifier
  ClassifierCache cache;
  Tensor probs;  // n×K
  std::string infill_kind;
};

Tensor ones_minus(const Tensor& t) {
  Tensor out = like(t);
  for (int64_t i = 0; i < t.size(); ++i) out.data[i] = 1.0 - t.data[i];
  return out;
}

// Exact adjoint of gaussian_blur (clamp-to-edge makes the operator
// non-symmetric at borders, so scatter through the same index map).
Tensor gaussian_blur_adjoint(const Tensor& gout, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<Real> kernel(2 * radius + 1);
  Real sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (Real& v : kernel) v /= sum;
  const int H = gout.h, W = gout.w;
  // forward: tmp = row blur(b); out = col blur(tmp). adjoint in reverse.
  Tensor gtmp(gout.n, gout.c, H, W, 0.0), gin(gout.n, gout.c, H, W, 0.0);
  for (int n = 0; n < gout.n; ++n)
    for (int c = 0; c < gout.c; ++c) {
      const Real* gp = gout.ptr(n, c);
      Real* tp = gtmp.ptr(n, c);
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          const Real g = gp[static_cast<int64_t>(y) * W + x];
          for (int i = -radius; i <= radius; ++i) {
            const int sy = std::clamp(y + i, 0, H - 1);
            tp[static_cast<int64_t>(sy) * W + x] += kernel[i + radius] * g;
          }
        }
      const Real* sp = gtmp.ptr(n, c);
      Real* ip = gin.ptr(n, c);
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          const Real g = sp[static_cast<int64_t>(y) * W + x];
          for (int i = -radius; i <= radius; ++i) {
            const int sx = std::clamp(x + i, 0, W - 1);
            ip[static_cast<int64_t>(y) * W + sx] += kernel[i + radius] * g;
          }
        }
    }
  return gin;
}

void forward_branch(Branch& br, const Classifier& classifier, const Tensor& images,
                    const Tensor& mask, Side side, const Infiller& infiller, bool with_cache) {
  br.kept = side == Side::In ? mask : ones_minus(mask);
  br.masked = apply_mask(images, mask, side);
  br.infill_kind = infiller.kind;
  if (infiller.kind == "none") {
    br.classifier_in = br.masked;
  } else if (infiller.kind == "blur") {
    br.fill = gaussian_blur(br.masked, infiller.blur_sigma);
    br.classifier_in = like(br.masked);
  } else if (infiller.kind == "mean") {
    br.fill = like(br.masked);
    for (int n = 0; n < images.n; ++n) {
      const Real* kp = br.kept.ptr(n, 0);
      Real wsum = 0.0;
      for (int64_t i = 0; i < br.kept.plane(); ++i) wsum += kp[i];
      for (int c = 0; c < images.c; ++c) {
        const Real* bp = br.masked.ptr(n, c);
        Real v = 0.5;
        if (wsum > 1e-12) {
          Real s = 0.0;
          for (int64_t i = 0; i < br.masked.plane(); ++i) s += kp[i] * bp[i];
          v = s / wsum;
        }
        Real* fp = br.fill.ptr(n, c);
        for (int64_t i = 0; i < br.fill.plane(); ++i) fp[i] = v;
      }
    }
    br.classifier_in = like(br.masked);
  } else if (infiller.kind == "external") {
    br.fill = like(br.masked);
    for (int n = 0; n < images.n; ++n) {
      Tensor single(1, images.c, images.h, images.w);
      for (int c = 0; c < images.c; ++c)
        std::copy_n(br.masked.ptr(n, c), images.plane(), single.ptr(n * 0, c));
      Tensor kmask(1, 1, images.h, images.w);
      std::copy_n(br.kept.ptr(n, 0), images.plane(), kmask.ptr(0, 0));
      InfillResult r = infill(infiller, single, kmask);
      for (int c = 0; c < images.c; ++c)
        std::copy_n(r.image.ptr(0, c), images.plane(), br.fill.ptr(n, c));
    }
    // fill currently holds the composite from infill(); recover plain fill
    // values is unnecessary -- composite below uses kept⊙masked + (1-kept)⊙fill,
    // and infill() already returned the composite, so store it directly.
    br.classifier_in = br.fill;
    br.fill = Tensor();
  } else {
    throw std::runtime_error("unknown infiller kind: " + infiller.kind);
  }
  if (infiller.kind == "blur" || infiller.kind == "mean") {
    for (int n = 0; n < images.n; ++n) {
      const Real* kp = br.kept.ptr(n, 0);
      for (int c = 0; c < images.c; ++c) {
        const Real* bp = br.masked.ptr(n, c);
        const Real* fp = br.fill.ptr(n, c);
        Real* op = br.classifier_in.ptr(n, c);
        for (int64_t i = 0; i < images.plane(); ++i)
          op[i] = kp[i] * bp[i] + (1.0 - kp[i]) * fp[i];
      }
    }
  }
  ClassifierOutput out =
      with_cache ? classifier.forward(br.classifier_in, br.cache) : classifier.forward(br.classifier_in);
  br.probs = std::move(out.probs);
}

// Pushes d(loss)/d(classifier_in) back to d(loss)/d(mask).
void backward_branch(const Branch& br, const Classifier& classifier, const Tensor& images,
                     Side side, const Infiller& infiller, const Tensor& g_logits, Tensor& g_mask) {
  Tensor g_comp = classifier.backward_input(br.cache, g_logits);
  const int N = images.n;
  const int64_t plane = images.plane();
  Tensor g_masked(N, images.c, images.h, images.w, 0.0);
  Tensor g_kept(N, 1, images.h, images.w, 0.0);

  if (infiller.kind == "none" || infiller.kind == "external") {
    // external fill treated as constant; kept pixels pass straight through
    if (infiller.kind == "none") {
      g_masked = g_comp;
    } else {
      for (int n = 0; n < N; ++n) {
        const Real* kp = br.kept.ptr(n, 0);
        for (int c = 0; c < images.c; ++c) {
          const Real* gp = g_comp.ptr(n, c);
          Real* gm = g_masked.ptr(n, c);
          for (int64_t i = 0; i < plane; ++i) gm[i] = kp[i] * gp[i];
        }
      }
    }
  } else if (infiller.kind == "blur") {
    // composite = k⊙b + (1-k)⊙blur(b)
    Tensor hole_grad(N, images.c, images.h, images.w);
    for (int n = 0; n < N; ++n) {
      const Real* kp = br.kept.ptr(n, 0);
      for (int c = 0; c < images.c; ++c) {
        const Real* gp = g_comp.ptr(n, c);
        Real* hp = hole_grad.ptr(n, c);
        Real* gm = g_masked.ptr(n, c);
        const Real* bp = br.masked.ptr(n, c);
        const Real* fp = br.fill.ptr(n, c);
        Real* gk = g_kept.ptr(n, 0);
        for (int64_t i = 0; i < plane; ++i) {
          gm[i] = kp[i] * gp[i];
          hp[i] = (1.0 - kp[i]) * gp[i];
          gk[i] += gp[i] * (bp[i] - fp[i]);
        }
      }
    }
    Tensor g_b_blur = gaussian_blur_adjoint(hole_grad, infiller.blur_sigma);
    for (int64_t i = 0; i < g_masked.size(); ++i) g_masked.data[i] += g_b_blur.data[i];
  } else if (infiller.kind == "mean") {
    // fill_c is the kept-weighted mean of the masked image
    for (int n = 0; n < N; ++n) {
      const Real* kp = br.kept.ptr(n, 0);
      Real wsum = 0.0;
      for (int64_t i = 0; i < plane; ++i) wsum += kp[i];
      const bool degenerate = wsum <= 1e-12;
      for (int c = 0; c < images.c; ++c) {
        const Real* gp = g_comp.ptr(n, c);
        const Real* bp = br.masked.ptr(n, c);
        const Real* fp = br.fill.ptr(n, c);
        Real* gm = g_masked.ptr(n, c);
        Real* gk = g_kept.ptr(n, 0);
        Real hole_total = 0.0;  // gradient mass flowing into the constant fill
        for (int64_t i = 0; i < plane; ++i) hole_total += (1.0 - kp[i]) * gp[i];
        for (int64_t i = 0; i < plane; ++i) {
          gm[i] += kp[i] * gp[i];
          gk[i] += gp[i] * (bp[i] - fp[i]);
          if (!degenerate) {
            gm[i] += hole_total * kp[i] / wsum;
            gk[i] += hole_total * (bp[i] - fp[i]) / wsum;
          }
        }
      }
    }
  }

  // masked = x ⊙ kept, kept = m (in) or 1-m (out)
  const Real sign = side == Side::In ? 1.0 : -1.0;
  for (int n = 0; n < N; ++n) {
    Real* gmask = g_mask.ptr(n, 0);
    const Real* gk = g_kept.ptr(n, 0);
    for (int64_t i = 0; i < plane; ++i) gmask[i] += sign * gk[i];
    for (int c = 0; c < images.c; ++c) {
      const Real* gm = g_masked.ptr(n, c);
      const Real* xp = images.ptr(n, c);
      for (int64_t i = 0; i < plane; ++i) gmask[i] += sign * gm[i] * xp[i];
    }
  }
}

Tensor slice_mask(const Tensor& mask, int n) {
  Tensor out(1, 1, mask.h, mask.w);
  std::copy_n(mask.ptr(n, 0), mask.plane(), out.ptr(0, 0));
  return out;
}

}  // namespace

ObjectiveEval combined_objective(const Classifier& classifier, const Tensor& images,
                                 const std::vector<int>& labels, const Tensor& mask,
                                 const ObjectiveConfig& config, const Infiller& infiller,
                                 Tensor* grad_mask, const std::vector<uint8_t>* frozen_in,
                                 const std::vector<uint8_t>* frozen_out) {
  config.validate();
  const int N = images.n;
  const int K = classifier.num_classes();
  if (mask.n != N || mask.h != images.h || mask.w != images.w)
    throw std::runtime_error("combined_objective: mask shape does not match images");
  const bool want_grad = grad_mask != nullptr;
  const bool need_in = config.in_kind != "none" || config.reg.lambda_m_in > 0.0;
  const bool need_out = config.out_kind != "none" || config.reg.lambda_m_out > 0.0;

  Branch in_br, out_br;
  if (need_in) forward_branch(in_br, classifier, images, mask, Side::In, infiller, want_grad);
  if (need_out) forward_branch(out_br, classifier, images, mask, Side::Out, infiller, want_grad);

  ObjectiveEval eval;
  eval.in_correct.assign(N, 0);
  eval.out_correct.assign(N, 0);
  const Real scale = 1.0 / static_cast<Real>(N);

  Tensor g_logits_in, g_logits_out;
  if (want_grad) {
    grad_mask->zero();
    if (need_in) g_logits_in = Tensor(N, K, 1, 1, 0.0);
    if (need_out) g_logits_out = Tensor(N, K, 1, 1, 0.0);
  }

  Real mask_sum = 0.0;
  for (Real v : mask.data) mask_sum += v;
  eval.mean_mask = mask_sum / static_cast<Real>(mask.size());

  for (int n = 0; n < N; ++n) {
    const int y = labels[n];
    if (need_in) eval.in_correct[n] = argmax_row(in_br.probs, n) == y ? 1 : 0;
    if (need_out) eval.out_correct[n] = argmax_row(out_br.probs, n) == y ? 1 : 0;
    const bool gate_in = frozen_in != nullptr ? (*frozen_in)[n] != 0 : eval.in_correct[n] != 0;
    const bool gate_out = frozen_out != nullptr ? (*frozen_out)[n] != 0 : eval.out_correct[n] != 0;

    // masked-in / masked-out classifier losses
    if (config.in_kind == "max_class") {
      eval.mean.l_in += config.lambda_in * cross_entropy(in_br.probs.ptr(n, 0), K, y) * scale;
      if (want_grad) {
        const Real* p = in_br.probs.ptr(n, 0);
        Real* g = g_logits_in.ptr(n, 0);
        const Real c = config.lambda_in * scale;
        for (int k2 = 0; k2 < K; ++k2) g[k2] += c * (p[k2] - (k2 == y ? 1.0 : 0.0));
      }
    }
    if (config.out_kind == "min_class") {
      eval.mean.l_out -= config.lambda_out * cross_entropy(out_br.probs.ptr(n, 0), K, y) * scale;
      if (want_grad) {
        const Real* p = out_br.probs.ptr(n, 0);
        Real* g = g_logits_out.ptr(n, 0);
        const Real c = -config.lambda_out * scale;
        for (int k2 = 0; k2 < K; ++k2) g[k2] += c * (p[k2] - (k2 == y ? 1.0 : 0.0));
      }
    } else if (config.out_kind == "max_ent") {
      const Real h = prediction_entropy(out_br.probs.ptr(n, 0), K);
      eval.mean.l_out -= config.lambda_out * h * scale;
      if (want_grad) {
        const Real* p = out_br.probs.ptr(n, 0);
        Real* g = g_logits_out.ptr(n, 0);
        const Real c = config.lambda_out * scale;
        for (int k2 = 0; k2 < K; ++k2) {
          const Real logp = p[k2] > 0.0 ? std::log(p[k2]) : -745.0;
          g[k2] += c * p[k2] * (logp + h);  // d(-entropy)/dlogits
        }
      }
    }

    // conditional L1 and TV
    Real l1 = 0.0;
    const Real* mp = mask.ptr(n, 0);
    for (int64_t i = 0; i < mask.plane(); ++i) l1 += mp[i];
    if (gate_in) eval.mean.l1_in += config.reg.lambda_m_in * l1 * scale;
    if (gate_out == false) eval.mean.l1_out += config.reg.lambda_m_out * l1 * scale;
    Tensor m_n = slice_mask(mask, n);
    eval.mean.tv += config.reg.lambda_tv * tv(m_n) * scale;
    if (want_grad) {
      Real* gmask = grad_mask->ptr(n, 0);
      Real l1_coeff = 0.0;
      if (gate_in) l1_coeff += config.reg.lambda_m_in * scale;
      if (!gate_out) l1_coeff += config.reg.lambda_m_out * scale;
      for (int64_t i = 0; i < mask.plane(); ++i) gmask[i] += l1_coeff;
      Tensor g_n(1, 1, mask.h, mask.w, 0.0);
      tv_backward(m_n, config.reg.lambda_tv * scale, g_n);
      for (int64_t i = 0; i < mask.plane(); ++i) gmask[i] += g_n.data[i];
    }
  }

  if (want_grad) {
    if (need_in && config.in_kind != "none")
      backward_branch(in_br, classifier, images, Side::In, infiller, g_logits_in, *grad_mask);
    if (need_out && config.out_kind != "none")
      backward_branch(out_br, classifier, images, Side::Out, infiller, g_logits_out, *grad_mask);
  }

  eval.mean.total = eval.mean.l_in + eval.mean.l_out + eval.mean.l1_in + eval.mean.l1_out +
                    eval.mean.tv;
  return eval;
}

}  // namespace salmask
