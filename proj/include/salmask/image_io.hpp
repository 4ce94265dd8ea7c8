#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "salmask/tensor.hpp"

namespace salmask {

// 8-bit RGB. Pixel values in [0,1] are quantized with round(v*255).
void write_png_rgb8(const std::string& path, const Tensor& image);
Tensor read_png_rgb8(const std::string& path);

// 8-bit grayscale, used for binary ground-truth masks (0 or 255 on disk).
void write_png_gray8(const std::string& path, const Tensor& mask);
Tensor read_png_gray8(const std::string& path);

// 16-bit grayscale, used for saliency maps: stored value / 65535 = mask value.
void write_png_gray16(const std::string& path, const Tensor& mask);
Tensor read_png_gray16(const std::string& path);

}  // namespace salmask
