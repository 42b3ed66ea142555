// Serial baselines for the vision kernels.

#include <numeric>

#include "caplab/vision.hpp"

namespace caplab::vision::reference {

BinaryImage apply_mask(const Frame& frame, const DetectorConfig& cfg) {
  BinaryImage mask(frame.width, frame.height);
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      const std::uint8_t* p = frame.at(x, y);
      mask.set(x, y, in_range(rgb_to_hsv(p[0], p[1], p[2]), cfg.hsv_low, cfg.hsv_high));
    }
  }
  return mask;
}

BinaryImage threshold_gray(const Frame& frame, int gray_threshold) {
  BinaryImage mask(frame.width, frame.height);
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      const std::uint8_t* p = frame.at(x, y);
      mask.set(x, y, (299 * p[0] + 587 * p[1] + 114 * p[2]) / 1000 > gray_threshold);
    }
  }
  return mask;
}

namespace {

int root(std::vector<int>& parent, int i) {
  while (parent[i] != i) i = parent[i] = parent[parent[i]];
  return i;
}

}  // namespace

// Pixel-level union-find over a raster scan.
BlobStats total_blob_area(const BinaryImage& mask, long min_blob) {
  const int w = mask.width;
  const int h = mask.height;
  std::vector<int> parent(static_cast<std::size_t>(w) * h);
  std::iota(parent.begin(), parent.end(), 0);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.get(x, y)) continue;
      const int i = y * w + x;
      if (x > 0 && mask.get(x - 1, y)) parent[root(parent, i)] = root(parent, i - 1);
      if (y > 0 && mask.get(x, y - 1)) {
        const int a = root(parent, i);
        const int b = root(parent, i - w);
        if (a != b) parent[a] = b;
      }
    }
  }

  std::vector<long> area(parent.size(), 0);
  for (int i = 0; i < w * h; ++i)
    if (mask.bits[static_cast<std::size_t>(i)]) ++area[root(parent, i)];

  BlobStats out;
  for (long a : area) {
    if (a == 0 || a < min_blob) continue;
    out.total_area += a;
    ++out.blob_count;
  }
  return out;
}

DetectionResult detect(const Frame& frame, const Roi& roi, const DetectorConfig& cfg) {
  cfg.validate();
  const BlobStats blobs = reference::total_blob_area(reference::apply_mask(extract_roi(frame, roi), cfg), cfg.min_blob);
  return {blobs.total_area <= cfg.area_threshold, blobs.total_area, blobs.blob_count};
}

}  // namespace caplab::vision::reference
