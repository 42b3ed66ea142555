#pragma once

// Synthetic camera frames of the vial neck with ground truth by construction.
// A seated cap hides all three thread reflections; a loose or missing cap
// leaves `exposed_threads` blue bands visible inside the default ROI. Blue
// distractors are drawn outside the ROI.

#include <cstdint>
#include <random>

#include "caplab/vision.hpp"

namespace caplab::synthetic {

inline constexpr int kFrameWidth = 640;
inline constexpr int kFrameHeight = 480;
inline constexpr int kMaxOffset = 6;

struct Scene {
  int exposed_threads = 0;  // 0 = cap seated
  int offset_x = 0;         // vial placement jitter, |offset| <= kMaxOffset
  int offset_y = 0;
  double noise = 0.0;       // salt-and-pepper fraction of pixels
  std::uint64_t noise_seed = 0;
};

vision::Frame render_scene(const Scene& scene);

// ROI that contains the neck for any offset within kMaxOffset.
vision::Roi default_roi();

// Flips exactly round(fraction * pixels) distinct pixels to black or white.
void salt_and_pepper(vision::Frame& frame, double fraction, std::mt19937_64& rng);

struct LabeledFrame {
  vision::Frame frame;
  bool capped = true;
  int exposed_threads = 0;
  Scene scene;
};

// Alternates capped / not-capped frames; placement and noise are drawn
// from the seeded generator.
class CorpusGenerator {
 public:
  explicit CorpusGenerator(std::uint64_t seed, double max_noise = 0.02);

  LabeledFrame next();

 private:
  std::mt19937_64 rng_;
  double max_noise_;
  std::uint64_t index_ = 0;
};

}  // namespace caplab::synthetic
