#include "salmask/plot.hpp"

#include <algorithm>
#include <cmath>

#include "salmask/image_io.hpp"
#include "salmask/tensor.hpp"

namespace salmask {

namespace {

constexpr int kW = 640, kH = 420;
constexpr int kMarginL = 60, kMarginR = 20, kMarginT = 40, kMarginB = 40;

struct Rgb {
  Real r, g, b;
};

const Rgb kPalette[] = {{0.85, 0.2, 0.2}, {0.2, 0.4, 0.85}, {0.15, 0.65, 0.3},
                        {0.8, 0.55, 0.1}, {0.55, 0.25, 0.7}, {0.2, 0.65, 0.65}};

void put(Tensor& img, int x, int y, const Rgb& c) {
  if (x < 0 || x >= kW || y < 0 || y >= kH) return;
  img.at(0, 0, y, x) = c.r;
  img.at(0, 1, y, x) = c.g;
  img.at(0, 2, y, x) = c.b;
}

void line(Tensor& img, int x0, int y0, int x1, int y1, const Rgb& c) {
  const int steps = std::max(std::abs(x1 - x0), std::abs(y1 - y0)) + 1;
  for (int i = 0; i <= steps; ++i) {
    const double f = static_cast<double>(i) / steps;
    put(img, static_cast<int>(std::lround(x0 + f * (x1 - x0))),
        static_cast<int>(std::lround(y0 + f * (y1 - y0))), c);
  }
}

// 3x5 digit glyphs, enough to label ticks
void draw_text(Tensor& img, int x, int y, const std::string& text, const Rgb& c) {
  static const char* digits[] = {"111101101101111", "010110010010111", "111001111100111",
                                 "111001111001111", "101101111001001", "111100111001111",
                                 "111100111101111", "111001001001001", "111101111101111",
                                 "111101111001111"};
  for (char ch : text) {
    if (ch >= '0' && ch <= '9') {
      const char* g = digits[ch - '0'];
      for (int gy = 0; gy < 5; ++gy)
        for (int gx = 0; gx < 3; ++gx)
          if (g[gy * 3 + gx] == '1') put(img, x + gx, y + gy, c);
      x += 4;
    } else if (ch == '.') {
      put(img, x, y + 4, c);
      x += 2;
    } else if (ch == '-') {
      put(img, x, y + 2, c);
      put(img, x + 1, y + 2, c);
      x += 3;
    } else {
      x += 4;
    }
  }
}

std::string fmt(double v) {
  char buf[32];
  if (std::fabs(v - std::lround(v)) < 1e-9)
    std::snprintf(buf, sizeof(buf), "%ld", std::lround(v));
  else
    std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

void render_line_plot(const std::string& path, const std::string& /*title*/,
                      const std::vector<PlotSeries>& series) {
  Tensor img(1, 3, kH, kW, 1.0);  // white
  const Rgb black{0.1, 0.1, 0.1};

  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      if (first) {
        xmin = xmax = x;
        ymin = ymax = y;
        first = false;
      }
      xmin = std::min(xmin, x), xmax = std::max(xmax, x);
      ymin = std::min(ymin, y), ymax = std::max(ymax, y);
    }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double x) {
    return kMarginL + static_cast<int>((x - xmin) / (xmax - xmin) * (kW - kMarginL - kMarginR));
  };
  auto py = [&](double y) {
    return kH - kMarginB - static_cast<int>((y - ymin) / (ymax - ymin) * (kH - kMarginT - kMarginB));
  };

  line(img, kMarginL, kH - kMarginB, kW - kMarginR, kH - kMarginB, black);
  line(img, kMarginL, kMarginT, kMarginL, kH - kMarginB, black);
  for (int i = 0; i <= 4; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 4.0;
    const double yv = ymin + (ymax - ymin) * i / 4.0;
    line(img, px(xv), kH - kMarginB, px(xv), kH - kMarginB + 4, black);
    draw_text(img, px(xv) - 6, kH - kMarginB + 7, fmt(xv), black);
    line(img, kMarginL - 4, py(yv), kMarginL, py(yv), black);
    draw_text(img, 12, py(yv) - 2, fmt(yv), black);
  }

  for (size_t si = 0; si < series.size(); ++si) {
    const Rgb& c = kPalette[si % 6];
    const auto& pts = series[si].points;
    for (size_t i = 1; i < pts.size(); ++i)
      line(img, px(pts[i - 1].first), py(pts[i - 1].second), px(pts[i].first), py(pts[i].second),
           c);
    for (const auto& [x, y] : pts) {
      put(img, px(x), py(y), c);
      put(img, px(x) + 1, py(y), c);
      put(img, px(x), py(y) + 1, c);
      put(img, px(x) - 1, py(y), c);
      put(img, px(x), py(y) - 1, c);
    }
    // legend swatch, top-left
    const int ly = kMarginT - 20 + static_cast<int>(si) * 8;
    for (int dx = 0; dx < 12; ++dx) put(img, kMarginL + 4 + dx, ly, c);
  }

  write_png_rgb8(path, img);
}

}  // namespace salmask
