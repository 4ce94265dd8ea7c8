#include "salmask/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "salmask/image_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace salmask {

namespace {

uint64_t mix3(uint64_t a, uint64_t b, uint64_t c) {
  uint64_t h = a * 0x9e3779b97f4a7c15ULL;
  h ^= b + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= c + 0x94d049bb133111ebULL + (h << 6) + (h >> 2);
  return h;
}

struct Rgb {
  Real r, g, b;
};

Rgb hsv(Real h, Real s, Real v) {
  h = h - std::floor(h);
  const Real c = v * s;
  const Real hp = h * 6.0;
  const Real x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  Real r = 0, g = 0, b = 0;
  if (hp < 1) {
    r = c, g = x;
  } else if (hp < 2) {
    r = x, g = c;
  } else if (hp < 3) {
    g = c, b = x;
  } else if (hp < 4) {
    g = x, b = c;
  } else if (hp < 5) {
    r = x, b = c;
  } else {
    r = c, b = x;
  }
  const Real m = v - c;
  return {r + m, g + m, b + m};
}

enum class Family { Disk, Square, Triangle, Plus, Ring };

bool inside_shape(Family f, Real px, Real py, Real cx, Real cy, Real r) {
  const Real dx = px - cx, dy = py - cy;
  switch (f) {
    case Family::Disk:
      return dx * dx + dy * dy <= r * r;
    case Family::Square:
      return std::fabs(dx) <= r * 0.9 && std::fabs(dy) <= r * 0.9;
    case Family::Triangle: {
      // vertices (cx, cy-r), (cx-r, cy+r*0.8), (cx+r, cy+r*0.8)
      const Real top = cy - r, bot = cy + r * 0.8;
      if (py < top || py > bot) return false;
      const Real half = r * (py - top) / (bot - top);
      return std::fabs(dx) <= half;
    }
    case Family::Plus: {
      const Real arm = r / 2.8;
      return (std::fabs(dx) <= arm && std::fabs(dy) <= r) ||
             (std::fabs(dy) <= arm && std::fabs(dx) <= r);
    }
    case Family::Ring: {
      const Real d2 = dx * dx + dy * dy;
      const Real inner = 0.55 * r;
      return d2 <= r * r && d2 >= inner * inner;
    }
  }
  return false;
}

Rgb fill_color(int fill, Real px, Real py, const Rgb& a, const Rgb& b) {
  switch (fill) {
    case 0:  // solid
      return a;
    case 1: {  // diagonal stripes, 3px period
      const int band = static_cast<int>(std::floor((px + py) / 3.0));
      return (band % 2 == 0) ? a : b;
    }
    default: {  // dotted
      const int ix = static_cast<int>(px), iy = static_cast<int>(py);
      return ((ix % 4) < 2 && (iy % 4) < 2) ? b : a;
    }
  }
}

Real quantize(Real v) {
  const Real c = std::min(1.0, std::max(0.0, v));
  return static_cast<Real>(std::lround(c * 255.0)) / 255.0;
}

std::string sample_id(int class_id, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "c%02d_i%04d", class_id, index);
  return buf;
}

}  // namespace

ImageSample generate_scene(const DatasetSpec& spec, int class_id, int index) {
  const int H = kImageSize, W = kImageSize;
  const double clutter = std::min(1.0, std::max(0.0, spec.clutter_level));
  Rng rng(mix3(spec.seed, static_cast<uint64_t>(class_id) + 1, static_cast<uint64_t>(index) + 1));

  // class = family (5) x fill (up to 3); distinct appearance for K <= 15
  const Family family = static_cast<Family>(class_id % 5);
  const int fill = (class_id / 5) % 3;

  Tensor image(1, 3, H, W);
  Tensor gt(1, 1, H, W, 0.0);

  // background: muted base color with a low-frequency shade and pixel noise
  const Rgb bg = hsv(rng.uniform(), 0.10 + 0.15 * rng.uniform(), 0.30 + 0.25 * rng.uniform());
  const Real gx = rng.uniform(-0.08, 0.08), gy = rng.uniform(-0.08, 0.08);
  const Real noise_amp = 0.015 + 0.035 * clutter;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const Real shade = gx * (x - W / 2.0) / W + gy * (y - H / 2.0) / H;
      const Real n = rng.uniform(-noise_amp, noise_amp);
      image.at(0, 0, y, x) = bg.r + shade + n;
      image.at(0, 1, y, x) = bg.g + shade + n;
      image.at(0, 2, y, x) = bg.b + shade + n;
    }

  // foreground shape defines the class and the ground truth
  const Real r = rng.uniform(7.0, 14.0);
  const Real cx = rng.uniform(r + 2.0, W - 1 - r - 2.0);
  const Real cy = rng.uniform(r + 2.0, H - 1 - r - 2.0);
  const Real hue = rng.uniform();
  const Rgb fa = hsv(hue, 0.85, 0.95);
  const Rgb fb = hsv(hue + 0.5, 0.85, 0.95);
  int x0 = W, y0 = H, x1 = -1, y1 = -1;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      if (!inside_shape(family, x, y, cx, cy, r)) continue;
      const Rgb col = fill_color(fill, x, y, fa, fb);
      image.at(0, 0, y, x) = col.r;
      image.at(0, 1, y, x) = col.g;
      image.at(0, 2, y, x) = col.b;
      gt.at(0, 0, y, x) = 1.0;
      x0 = std::min(x0, x), x1 = std::max(x1, x);
      y0 = std::min(y0, y), y1 = std::max(y1, y);
    }

  // distractor blobs; never overlap the foreground
  const int max_distractors = static_cast<int>(std::lround(3.0 * clutter));
  const int n_distractors = max_distractors > 0 ? rng.uniform_int(max_distractors + 1) : 0;
  for (int d = 0; d < n_distractors; ++d) {
    for (int attempt = 0; attempt < 20; ++attempt) {
      const Real dr = rng.uniform(3.0, 7.0);
      const Real dcx = rng.uniform(dr + 1.0, W - 2 - dr);
      const Real dcy = rng.uniform(dr + 1.0, H - 2 - dr);
      const Real ar = rng.uniform(0.6, 1.0);  // ellipse aspect
      const Rgb dc = hsv(rng.uniform(), 0.25 + 0.2 * rng.uniform(), 0.35 + 0.3 * rng.uniform());
      bool overlaps = false;
      const int by0 = std::max(0, static_cast<int>(dcy - dr) - 1);
      const int by1 = std::min(H - 1, static_cast<int>(dcy + dr) + 1);
      const int bx0 = std::max(0, static_cast<int>(dcx - dr) - 1);
      const int bx1 = std::min(W - 1, static_cast<int>(dcx + dr) + 1);
      for (int y = by0; y <= by1 && !overlaps; ++y)
        for (int x = bx0; x <= bx1; ++x) {
          const Real ex = (x - dcx) / dr, ey = (y - dcy) / (dr * ar);
          if (ex * ex + ey * ey <= 1.0 && gt.at(0, 0, y, x) > 0.5) {
            overlaps = true;
            break;
          }
        }
      if (overlaps) continue;
      for (int y = by0; y <= by1; ++y)
        for (int x = bx0; x <= bx1; ++x) {
          const Real ex = (x - dcx) / dr, ey = (y - dcy) / (dr * ar);
          if (ex * ex + ey * ey > 1.0) continue;
          image.at(0, 0, y, x) = dc.r;
          image.at(0, 1, y, x) = dc.g;
          image.at(0, 2, y, x) = dc.b;
        }
      break;
    }
  }

  // quantize to the 8-bit grid so disk round-trips are exact
  for (Real& v : image.data) v = quantize(v);

  ImageSample s;
  s.image = std::move(image);
  s.label = class_id;
  s.gt_mask = std::move(gt);
  s.gt_boxes = {Box{x0, y0, x1, y1}};
  s.id = sample_id(class_id, index);
  return s;
}

namespace {

json spec_to_json(const DatasetSpec& s) {
  return json{{"num_classes", s.num_classes},
              {"examples_per_class", s.examples_per_class},
              {"seed", s.seed},
              {"clutter_level", s.clutter_level}};
}

DatasetSpec spec_from_json(const json& j) {
  DatasetSpec s;
  s.num_classes = j.at("num_classes").get<int>();
  s.examples_per_class = j.at("examples_per_class").get<int>();
  s.seed = j.at("seed").get<uint64_t>();
  s.clutter_level = j.at("clutter_level").get<double>();
  return s;
}

}  // namespace

void save_manifest(const DatasetManifest& m, const std::string& manifest_path) {
  json j;
  j["spec"] = spec_to_json(m.spec);
  json entries = json::array();
  for (const auto& e : m.entries)
    entries.push_back(json{{"id", e.id}, {"label", e.label}, {"box", {e.box.x0, e.box.y0, e.box.x1, e.box.y1}}});
  j["entries"] = std::move(entries);
  std::ofstream out(manifest_path);
  if (!out) throw std::runtime_error("cannot write manifest: " + manifest_path);
  out << j.dump(2) << "\n";
}

DatasetManifest load_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot read manifest: " + manifest_path);
  json j;
  in >> j;
  DatasetManifest m;
  m.spec = spec_from_json(j.at("spec"));
  for (const auto& je : j.at("entries")) {
    ManifestEntry e;
    e.id = je.at("id").get<std::string>();
    e.label = je.at("label").get<int>();
    const auto& b = je.at("box");
    e.box = Box{b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
    m.entries.push_back(std::move(e));
  }
  m.root = fs::path(manifest_path).parent_path().string();
  return m;
}

DatasetManifest build_dataset(const DatasetSpec& spec, const std::string& out_dir) {
  DatasetManifest m;
  m.spec = spec;
  m.root = out_dir;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  fs::create_directories(fs::path(out_dir) / "masks", ec);
  if (ec) throw std::runtime_error("cannot create dataset directory: " + out_dir);
  for (int cls = 0; cls < spec.num_classes; ++cls) {
    for (int i = 0; i < spec.examples_per_class; ++i) {
      ImageSample s = generate_scene(spec, cls, i);
      write_png_rgb8((fs::path(out_dir) / "images" / (s.id + ".png")).string(), s.image);
      write_png_gray8((fs::path(out_dir) / "masks" / (s.id + ".png")).string(), s.gt_mask);
      m.entries.push_back(ManifestEntry{s.id, s.label, s.gt_boxes[0]});
    }
  }
  save_manifest(m, (fs::path(out_dir) / "manifest.json").string());
  return m;
}

ImageSample load_sample(const DatasetManifest& m, const ManifestEntry& entry) {
  ImageSample s;
  const std::string img = (fs::path(m.root) / "images" / (entry.id + ".png")).string();
  const std::string msk = (fs::path(m.root) / "masks" / (entry.id + ".png")).string();
  try {
    s.image = read_png_rgb8(img);
    Tensor gray = read_png_gray8(msk);
    s.gt_mask = Tensor(1, 1, gray.h, gray.w);
    for (int64_t i = 0; i < gray.size(); ++i) s.gt_mask.data[i] = gray.data[i] >= 0.5 ? 1.0 : 0.0;
  } catch (const std::exception& e) {
    throw std::runtime_error("failed to load sample '" + entry.id + "': " + e.what());
  }
  s.label = entry.label;
  s.gt_boxes = {entry.box};
  s.id = entry.id;
  return s;
}

std::optional<ImageSample> DatasetReader::next() {
  if (pos_ >= manifest_.entries.size()) return std::nullopt;
  return load_sample(manifest_, manifest_.entries[pos_++]);
}

std::vector<ImageSample> load_all(const DatasetManifest& m) {
  std::vector<ImageSample> out;
  out.reserve(m.entries.size());
  for (const auto& e : m.entries) out.push_back(load_sample(m, e));
  return out;
}

DatasetManifest subsample_fewshot(const DatasetManifest& m, int num_classes, int per_class,
                                  uint64_t seed) {
  // group entry indices by class, in manifest order
  std::vector<int> class_ids;
  std::vector<std::vector<int>> by_class;
  for (int i = 0; i < static_cast<int>(m.entries.size()); ++i) {
    const int label = m.entries[i].label;
    auto it = std::find(class_ids.begin(), class_ids.end(), label);
    if (it == class_ids.end()) {
      class_ids.push_back(label);
      by_class.emplace_back();
      it = class_ids.end() - 1;
    }
    by_class[static_cast<size_t>(it - class_ids.begin())].push_back(i);
  }
  const int k = static_cast<int>(class_ids.size());
  if (num_classes > k)
    throw std::runtime_error("subsample_fewshot: requested " + std::to_string(num_classes) +
                             " classes but manifest has only " + std::to_string(k));
  int min_per_class = m.entries.empty() ? 0 : static_cast<int>(m.entries.size());
  for (const auto& v : by_class) min_per_class = std::min(min_per_class, static_cast<int>(v.size()));
  if (per_class > min_per_class)
    throw std::runtime_error("subsample_fewshot: requested " + std::to_string(per_class) +
                             " examples per class but a class has only " +
                             std::to_string(min_per_class));

  Rng rng(mix3(seed, 0x5ab5a3b1eULL, static_cast<uint64_t>(num_classes)));
  std::vector<int> class_order = rng.permutation(k);
  std::vector<bool> class_kept(k, false);
  for (int i = 0; i < num_classes; ++i) class_kept[class_order[i]] = true;

  std::vector<bool> keep(m.entries.size(), false);
  for (int ci = 0; ci < k; ++ci) {
    if (!class_kept[ci]) continue;
    const auto& idx = by_class[ci];
    std::vector<int> order = rng.permutation(static_cast<int>(idx.size()));
    for (int i = 0; i < per_class; ++i) keep[idx[order[i]]] = true;
  }

  DatasetManifest out;
  out.spec = m.spec;
  out.root = m.root;
  for (size_t i = 0; i < m.entries.size(); ++i)
    if (keep[i]) out.entries.push_back(m.entries[i]);
  return out;
}

SplitIndices train_val_split(const DatasetManifest& m) {
  std::vector<int> class_ids;
  std::vector<std::vector<int>> by_class;
  for (int i = 0; i < static_cast<int>(m.entries.size()); ++i) {
    const int label = m.entries[i].label;
    auto it = std::find(class_ids.begin(), class_ids.end(), label);
    if (it == class_ids.end()) {
      class_ids.push_back(label);
      by_class.emplace_back();
      it = class_ids.end() - 1;
    }
    by_class[static_cast<size_t>(it - class_ids.begin())].push_back(i);
  }
  SplitIndices s;
  for (const auto& idx : by_class) {
    const int n_train = static_cast<int>(idx.size()) * 9 / 10;
    for (int i = 0; i < static_cast<int>(idx.size()); ++i)
      (i < n_train ? s.train : s.val).push_back(idx[i]);
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  return s;
}

DatasetManifest select_entries(const DatasetManifest& m, const std::vector<int>& indices) {
  DatasetManifest out;
  out.spec = m.spec;
  out.root = m.root;
  for (int i : indices) out.entries.push_back(m.entries[i]);
  return out;
}

double foreground_prevalence(const std::vector<ImageSample>& samples) {
  int64_t pos = 0, total = 0;
  for (const auto& s : samples) {
    for (Real v : s.gt_mask.data) pos += v >= 0.5 ? 1 : 0;
    total += s.gt_mask.size();
  }
  return total > 0 ? static_cast<double>(pos) / static_cast<double>(total) : 0.0;
}

}  // namespace salmask
