#pragma once

// Capping-failure detector. Light reflected through exposed vial threads
// shows up as blue in the camera frame; a seated cap hides it. The detector
// masks the region of interest in HSV space, measures the total area of the
// connected blue regions and reports "not capped" when that area exceeds a
// threshold.
//
// Pixel kernels run with OpenMP when available. The serial versions in
// vision::reference are the baseline the parallel kernels are tested and
// benchmarked against.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace caplab::vision {

struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major RGB8, 3 bytes per pixel

  Frame() = default;
  Frame(int w, int h);

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::uint8_t* at(int x, int y) { return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
  const std::uint8_t* at(int x, int y) const {
    return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x);
  }
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);

  bool operator==(const Frame&) const = default;
};

struct BinaryImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // 0 or 1, row-major

  BinaryImage() = default;
  BinaryImage(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  std::uint8_t get(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }
  void set(int x, int y, bool on) { bits[static_cast<std::size_t>(y) * width + x] = on ? 1 : 0; }
  long count() const;

  bool operator==(const BinaryImage&) const = default;
};

struct Roi {
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;

  bool fits(int frame_width, int frame_height) const;
  bool operator==(const Roi&) const = default;
};

struct Hsv {
  double h = 0.0;  // degrees, [0, 360)
  double s = 0.0;  // [0, 1]
  double v = 0.0;  // [0, 1]
};

// Default range targets the blue thread reflections. The numbers are
// uncalibrated starting points; tune them per camera and lighting.
struct DetectorConfig {
  Hsv hsv_low{200.0, 0.35, 0.25};
  Hsv hsv_high{260.0, 1.0, 1.0};
  int gray_threshold = 128;  // used for frames supplied already masked
  long area_threshold = 150; // px^2 at 640x480
  long min_blob = 8;         // px^2, smaller components are noise

  // Throws VisionError(InvalidConfig).
  void validate() const;
};

struct BlobStats {
  long total_area = 0;
  int blob_count = 0;
  bool operator==(const BlobStats&) const = default;
};

struct DetectionResult {
  bool capped = true;
  long total_area = 0;
  int blob_count = 0;
  bool operator==(const DetectionResult&) const = default;
};

enum class VisionErrc { RoiOutOfBounds, InvalidFrame, InvalidConfig };

class VisionError : public std::runtime_error {
 public:
  VisionError(VisionErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  VisionErrc code() const noexcept { return code_; }

 private:
  VisionErrc code_;
};

Hsv rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b);

// Component-wise range test; the hue interval wraps when low.h > high.h.
bool in_range(const Hsv& px, const Hsv& low, const Hsv& high);

// Output pixel (i, j) is input pixel (roi.x + i, roi.y + j).
Frame extract_roi(const Frame& frame, const Roi& roi);

BinaryImage apply_mask(const Frame& frame, const DetectorConfig& cfg);

// Set where the Rec. 601 luma exceeds the threshold.
BinaryImage threshold_gray(const Frame& frame, int gray_threshold);

// 4-connected components; components smaller than min_blob are dropped.
BlobStats total_blob_area(const BinaryImage& mask, long min_blob);

DetectionResult detect(const Frame& frame, const Roi& roi, const DetectorConfig& cfg);

// Variant for frames that were colour-masked upstream: the ROI is
// thresholded on luma instead of HSV.
DetectionResult detect_premasked(const Frame& frame, const Roi& roi, const DetectorConfig& cfg);

// Frames are processed concurrently; results keep the input order.
std::vector<DetectionResult> detect_batch(std::span<const Frame> frames, const Roi& roi,
                                          const DetectorConfig& cfg);

namespace reference {

BinaryImage apply_mask(const Frame& frame, const DetectorConfig& cfg);
BinaryImage threshold_gray(const Frame& frame, int gray_threshold);
BlobStats total_blob_area(const BinaryImage& mask, long min_blob);
DetectionResult detect(const Frame& frame, const Roi& roi, const DetectorConfig& cfg);

}  // namespace reference

// Worker threads the kernels will use (1 without OpenMP).
int kernel_threads();

}  // namespace caplab::vision
