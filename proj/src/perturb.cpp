#include "salmask/perturb.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "salmask/image_io.hpp"

namespace fs = std::filesystem;

namespace salmask {

Tensor apply_mask(const Tensor& image, const Tensor& mask, Side side) {
  if (mask.h != image.h || mask.w != image.w)
    throw std::runtime_error("mask dims " + std::to_string(mask.h) + "x" + std::to_string(mask.w) +
                             " do not match image dims " + std::to_string(image.h) + "x" +
                             std::to_string(image.w));
  Tensor out = like(image);
  for (int n = 0; n < image.n; ++n) {
    const Real* mp = mask.ptr(std::min(n, mask.n - 1), 0);
    for (int c = 0; c < image.c; ++c) {
      const Real* ip = image.ptr(n, c);
      Real* op = out.ptr(n, c);
      const int64_t plane = image.plane();
      if (side == Side::In)
        for (int64_t i = 0; i < plane; ++i) op[i] = ip[i] * mp[i];
      else
        for (int64_t i = 0; i < plane; ++i) op[i] = ip[i] * (1.0 - mp[i]);
    }
  }
  return out;
}

Tensor gaussian_blur(const Tensor& image, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<Real> kernel(2 * radius + 1);
  Real sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (Real& v : kernel) v /= sum;

  const int H = image.h, W = image.w;
  Tensor tmp = like(image), out = like(image);
  for (int n = 0; n < image.n; ++n)
    for (int c = 0; c < image.c; ++c) {
      const Real* ip = image.ptr(n, c);
      Real* tp = tmp.ptr(n, c);
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          Real acc = 0.0;
          for (int i = -radius; i <= radius; ++i) {
            const int sx = std::clamp(x + i, 0, W - 1);
            acc += kernel[i + radius] * ip[static_cast<int64_t>(y) * W + sx];
          }
          tp[static_cast<int64_t>(y) * W + x] = acc;
        }
      const Real* sp = tmp.ptr(n, c);
      Real* op = out.ptr(n, c);
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          Real acc = 0.0;
          for (int i = -radius; i <= radius; ++i) {
            const int sy = std::clamp(y + i, 0, H - 1);
            acc += kernel[i + radius] * sp[static_cast<int64_t>(sy) * W + x];
          }
          op[static_cast<int64_t>(y) * W + x] = acc;
        }
    }
  return out;
}

namespace {

// out = k⊙masked + (1−k)⊙fill; exact pass-through where k=1.
Tensor composite(const Tensor& masked, const Tensor& mask, const Tensor& fill) {
  Tensor out = like(masked);
  for (int n = 0; n < masked.n; ++n) {
    const Real* mp = mask.ptr(std::min(n, mask.n - 1), 0);
    for (int c = 0; c < masked.c; ++c) {
      const Real* ip = masked.ptr(n, c);
      const Real* fp = fill.ptr(n, c);
      Real* op = out.ptr(n, c);
      for (int64_t i = 0; i < masked.plane(); ++i) op[i] = mp[i] * ip[i] + (1.0 - mp[i]) * fp[i];
    }
  }
  return out;
}

InfillResult infill_mean(const Tensor& masked, const Tensor& mask) {
  InfillResult res;
  Tensor fill = like(masked);
  bool fallback = false;
  for (int n = 0; n < masked.n; ++n) {
    const Real* mp = mask.ptr(std::min(n, mask.n - 1), 0);
    Real wsum = 0.0;
    for (int64_t i = 0; i < mask.plane(); ++i) wsum += mp[i];
    for (int c = 0; c < masked.c; ++c) {
      const Real* ip = masked.ptr(n, c);
      Real v;
      if (wsum <= 0.0) {
        v = 0.5;
        fallback = true;
      } else {
        Real s = 0.0;
        for (int64_t i = 0; i < masked.plane(); ++i) s += mp[i] * ip[i];
        v = s / wsum;
      }
      Real* fp = fill.ptr(n, c);
      for (int64_t i = 0; i < masked.plane(); ++i) fp[i] = v;
    }
  }
  res.image = composite(masked, mask, fill);
  res.fallback = fallback;
  return res;
}

InfillResult infill_external(const Infiller& inf, const Tensor& masked, const Tensor& mask) {
  if (masked.n != 1)
    throw std::runtime_error("external infiller operates on single images, got batch of " +
                             std::to_string(masked.n));
  const std::string dir =
      (fs::temp_directory_path() / ("salmask_infill_" + std::to_string(::getpid()))).string();
  fs::create_directories(dir);
  const std::string masked_path = dir + "/masked.png";
  const std::string mask_path = dir + "/mask.png";
  const std::string out_path = dir + "/out.png";
  const std::string err_path = dir + "/stderr.txt";
  write_png_rgb8(masked_path, masked);
  write_png_gray8(mask_path, mask);
  const std::string cmd =
      inf.command + " '" + masked_path + "' '" + mask_path + "' '" + out_path + "' 2>'" +
      err_path + "'";
  const int rc = std::system(cmd.c_str());
  if (rc != 0) {
    std::ifstream err(err_path);
    std::string excerpt((std::istreambuf_iterator<char>(err)), std::istreambuf_iterator<char>());
    if (excerpt.size() > 400) excerpt.resize(400);
    throw std::runtime_error("external infiller exited with status " + std::to_string(rc) + ": " +
                             excerpt);
  }
  Tensor fill = read_png_rgb8(out_path);
  if (fill.h != masked.h || fill.w != masked.w)
    throw std::runtime_error("external infiller returned wrong image size");
  InfillResult res;
  res.image = composite(masked, mask, fill);
  return res;
}

}  // namespace

InfillResult infill(const Infiller& inf, const Tensor& masked_image, const Tensor& mask) {
  if (mask.h != masked_image.h || mask.w != masked_image.w)
    throw std::runtime_error("infill: mask dims do not match image dims");
  if (inf.kind == "none") return InfillResult{masked_image, false};
  if (inf.kind == "mean") return infill_mean(masked_image, mask);
  if (inf.kind == "blur") {
    Tensor fill = gaussian_blur(masked_image, inf.blur_sigma);
    return InfillResult{composite(masked_image, mask, fill), false};
  }
  if (inf.kind == "external") return infill_external(inf, masked_image, mask);
  throw std::runtime_error("unknown infiller kind: " + inf.kind);
}

GumbelSample gumbel_sample_detail(const Tensor& logits_map, const GumbelConfig& config, Rng& rng) {
  if (config.temperature <= 0.0) throw std::runtime_error("gumbel temperature must be > 0");
  const bool hard = config.estimator == "hard";
  if (!hard && config.estimator != "soft")
    throw std::runtime_error("gumbel estimator must be soft or hard");
  GumbelSample s;
  s.soft = like(logits_map);
  s.mask = like(logits_map);
  const Real inv_tau = 1.0 / config.temperature;
  for (int64_t i = 0; i < logits_map.size(); ++i) {
    double u = rng.uniform();
    u = std::min(1.0 - 1e-12, std::max(1e-12, u));
    const Real noise = std::log(u) - std::log1p(-u);  // logistic
    const Real z = (logits_map.data[i] + noise) * inv_tau;
    const Real soft = 1.0 / (1.0 + std::exp(-z));
    s.soft.data[i] = soft;
    s.mask.data[i] = hard ? (soft >= 0.5 ? 1.0 : 0.0) : soft;
  }
  return s;
}

Tensor gumbel_sample(const Tensor& logits_map, const GumbelConfig& config, Rng& rng) {
  return gumbel_sample_detail(logits_map, config, rng).mask;
}

}  // namespace salmask
