#pragma once

#include <string>

#include "salmask/masker.hpp"
#include "salmask/rng.hpp"
#include "salmask/tensor.hpp"

namespace salmask {

enum class Side { In, Out };

// side=In returns x⊙m (mask broadcast over channels), side=Out returns x⊙(1−m).
Tensor apply_mask(const Tensor& image, const Tensor& mask, Side side);

struct Infiller {
  std::string kind = "none";  // none | mean | blur | external
  double blur_sigma = 3.0;
  std::string command;  // external: invoked as `command masked.png mask.png out.png`
};

struct InfillResult {
  Tensor image;
  bool fallback = false;  // mean infill fell back to a global 0.5 fill
};

// mask marks the KEPT region (1 = kept). Pixels with mask=1 pass through
// bit-exact; holes are filled per kind. Fractional mask values interpolate
// between the masked image and the fill.
InfillResult infill(const Infiller& inf, const Tensor& masked_image, const Tensor& mask);

// Separable Gaussian blur with clamp-to-edge padding; radius = ceil(3*sigma).
Tensor gaussian_blur(const Tensor& image, double sigma);

struct GumbelSample {
  Tensor mask;  // forward values: relaxed in (0,1) for soft, {0,1} for hard
  Tensor soft;  // relaxed values, the gradient surrogate for hard
};

// Relaxed Bernoulli sampling of per-pixel logits at the configured
// temperature; "hard" binarizes the forward value (straight-through).
Tensor gumbel_sample(const Tensor& logits_map, const GumbelConfig& config, Rng& rng);
GumbelSample gumbel_sample_detail(const Tensor& logits_map, const GumbelConfig& config, Rng& rng);

}  // namespace salmask
