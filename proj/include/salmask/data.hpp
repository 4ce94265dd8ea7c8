#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "salmask/rng.hpp"
#include "salmask/tensor.hpp"

namespace salmask {

// Inclusive pixel-coordinate bounding box, origin top-left.
struct Box {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int64_t area() const { return static_cast<int64_t>(x1 - x0 + 1) * (y1 - y0 + 1); }
  bool operator==(const Box&) const = default;
};

struct ImageSample {
  Tensor image;   // 1×3×H×W, values in [0,1], quantized to the 8-bit grid
  int label = 0;  // class index in 0..K-1
  std::vector<Box> gt_boxes;
  Tensor gt_mask;  // 1×1×H×W, values exactly 0 or 1
  std::string id;
};

struct DatasetSpec {
  int num_classes = 10;
  int examples_per_class = 100;
  uint64_t seed = 0;
  double clutter_level = 0.5;  // in [0,1]; drives distractor count and texture noise
};

struct ManifestEntry {
  std::string id;
  int label = 0;
  Box box;
};

struct DatasetManifest {
  DatasetSpec spec;
  std::vector<ManifestEntry> entries;
  std::string root;  // directory holding images/ and masks/
};

constexpr int kImageSize = 64;

// ShapeScenes: class = shape family x fill pattern, one foreground shape on a
// textured background with distractor blobs that never overlap it. Pure
// function of (spec.seed, spec.clutter_level, class_id, index).
ImageSample generate_scene(const DatasetSpec& spec, int class_id, int index);

DatasetManifest build_dataset(const DatasetSpec& spec, const std::string& out_dir);

DatasetManifest load_manifest(const std::string& manifest_path);
void save_manifest(const DatasetManifest& m, const std::string& manifest_path);

// Loads one sample from disk; throws with the sample id on missing/corrupt files.
ImageSample load_sample(const DatasetManifest& m, const ManifestEntry& entry);

// Streams samples in manifest order with O(1) samples resident.
class DatasetReader {
 public:
  explicit DatasetReader(DatasetManifest manifest) : manifest_(std::move(manifest)) {}
  std::optional<ImageSample> next();
  void reset() { pos_ = 0; }
  const DatasetManifest& manifest() const { return manifest_; }

 private:
  DatasetManifest manifest_;
  size_t pos_ = 0;
};

std::vector<ImageSample> load_all(const DatasetManifest& m);

// Uniform subsample of C classes then E examples per class, both without
// replacement. Entry order follows the parent manifest.
DatasetManifest subsample_fewshot(const DatasetManifest& m, int num_classes, int per_class,
                                  uint64_t seed);

// Per-class 90/10 split by index order. Returns entry indices into m.entries.
struct SplitIndices {
  std::vector<int> train, val;
};
SplitIndices train_val_split(const DatasetManifest& m);
DatasetManifest select_entries(const DatasetManifest& m, const std::vector<int>& indices);

// Fraction of gt-positive pixels pooled over the samples (the PxAP chance floor).
double foreground_prevalence(const std::vector<ImageSample>& samples);

}  // namespace salmask
