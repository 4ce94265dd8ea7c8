#include "salmask/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace salmask {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

[[noreturn]] void fail(const std::string& what, const std::string& path) {
  throw std::runtime_error(what + ": " + path);
}

void write_png(const std::string& path, int width, int height, int color_type, int bit_depth,
               const std::vector<png_bytep>& rows) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail("cannot open for writing", path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail("png write error", path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, const_cast<png_bytep*>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

struct PngData {
  int width = 0, height = 0, color_type = 0, bit_depth = 0;
  std::vector<uint8_t> bytes;  // packed rows
  size_t row_bytes = 0;
};

PngData read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail("cannot open for reading", path);
  png_byte header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8) != 0)
    fail("not a png file", path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("png read error", path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  PngData out;
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.color_type = png_get_color_type(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  out.row_bytes = png_get_rowbytes(png, info);
  out.bytes.resize(out.row_bytes * out.height);
  std::vector<png_bytep> rows(out.height);
  for (int y = 0; y < out.height; ++y) rows[y] = out.bytes.data() + y * out.row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

uint8_t quantize8(Real v) {
  const Real c = std::min(1.0, std::max(0.0, v));
  return static_cast<uint8_t>(std::lround(c * 255.0));
}

}  // namespace

void write_png_rgb8(const std::string& path, const Tensor& image) {
  const int H = image.h, W = image.w;
  assert(image.c == 3 && image.n == 1);
  std::vector<uint8_t> buf(static_cast<size_t>(H) * W * 3);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < 3; ++c)
        buf[(static_cast<size_t>(y) * W + x) * 3 + c] = quantize8(image.at(0, c, y, x));
  std::vector<png_bytep> rows(H);
  for (int y = 0; y < H; ++y) rows[y] = buf.data() + static_cast<size_t>(y) * W * 3;
  write_png(path, W, H, PNG_COLOR_TYPE_RGB, 8, rows);
}

Tensor read_png_rgb8(const std::string& path) {
  PngData d = read_png(path);
  if (d.color_type != PNG_COLOR_TYPE_RGB || d.bit_depth != 8) fail("expected 8-bit RGB png", path);
  Tensor t(1, 3, d.height, d.width);
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x)
      for (int c = 0; c < 3; ++c)
        t.at(0, c, y, x) =
            static_cast<Real>(d.bytes[y * d.row_bytes + (static_cast<size_t>(x)) * 3 + c]) / 255.0;
  return t;
}

void write_png_gray8(const std::string& path, const Tensor& mask) {
  const int H = mask.h, W = mask.w;
  std::vector<uint8_t> buf(static_cast<size_t>(H) * W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) buf[static_cast<size_t>(y) * W + x] = quantize8(mask.at(0, 0, y, x));
  std::vector<png_bytep> rows(H);
  for (int y = 0; y < H; ++y) rows[y] = buf.data() + static_cast<size_t>(y) * W;
  write_png(path, W, H, PNG_COLOR_TYPE_GRAY, 8, rows);
}

Tensor read_png_gray8(const std::string& path) {
  PngData d = read_png(path);
  if (d.color_type != PNG_COLOR_TYPE_GRAY || d.bit_depth != 8) fail("expected 8-bit gray png", path);
  Tensor t(1, 1, d.height, d.width);
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x)
      t.at(0, 0, y, x) = static_cast<Real>(d.bytes[y * d.row_bytes + x]) / 255.0;
  return t;
}

void write_png_gray16(const std::string& path, const Tensor& mask) {
  const int H = mask.h, W = mask.w;
  std::vector<uint8_t> buf(static_cast<size_t>(H) * W * 2);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const Real c = std::min(1.0, std::max(0.0, mask.at(0, 0, y, x)));
      const uint16_t v = static_cast<uint16_t>(std::lround(c * 65535.0));
      buf[(static_cast<size_t>(y) * W + x) * 2] = static_cast<uint8_t>(v >> 8);  // network order
      buf[(static_cast<size_t>(y) * W + x) * 2 + 1] = static_cast<uint8_t>(v & 0xff);
    }
  std::vector<png_bytep> rows(H);
  for (int y = 0; y < H; ++y) rows[y] = buf.data() + static_cast<size_t>(y) * W * 2;
  write_png(path, W, H, PNG_COLOR_TYPE_GRAY, 16, rows);
}

Tensor read_png_gray16(const std::string& path) {
  PngData d = read_png(path);
  if (d.color_type != PNG_COLOR_TYPE_GRAY || d.bit_depth != 16)
    fail("expected 16-bit gray png", path);
  Tensor t(1, 1, d.height, d.width);
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x) {
      const uint16_t hi = d.bytes[y * d.row_bytes + static_cast<size_t>(x) * 2];
      const uint16_t lo = d.bytes[y * d.row_bytes + static_cast<size_t>(x) * 2 + 1];
      t.at(0, 0, y, x) = static_cast<Real>((hi << 8) | lo) / 65535.0;
    }
  return t;
}

}  // namespace salmask
