#include "caplab/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace caplab::synthetic {

namespace {

struct Rgb {
  std::uint8_t r, g, b;
};

constexpr Rgb kGlass{175, 185, 190};
constexpr Rgb kNeckGlass{185, 195, 200};
constexpr Rgb kThreadBlue{30, 80, 220};
constexpr Rgb kCapWhite{228, 228, 222};
constexpr Rgb kBench{90, 85, 80};
constexpr Rgb kLabelBlue{25, 70, 210};
constexpr Rgb kGloveBlue{40, 90, 230};

constexpr int kThreadTop = 190;
constexpr int kThreadPitch = 22;
constexpr int kThreadHeight = 6;

void fill(vision::Frame& f, int x0, int y0, int x1, int y1, Rgb c) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, f.width);
  y1 = std::min(y1, f.height);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) f.set(x, y, c.r, c.g, c.b);
}

}  // namespace

vision::Roi default_roi() { return {262, 168, 116, 92}; }

vision::Frame render_scene(const Scene& scene) {
  vision::Frame f(kFrameWidth, kFrameHeight);
  for (int y = 0; y < kFrameHeight; ++y) {
    const auto shade = static_cast<std::uint8_t>(35 + 25 * y / kFrameHeight);
    for (int x = 0; x < kFrameWidth; ++x) f.set(x, y, shade, shade, shade);
  }
  fill(f, 0, 420, kFrameWidth, kFrameHeight, kBench);
  fill(f, 40, 360, 160, 410, kLabelBlue);
  fill(f, 520, 60, 600, 140, kGloveBlue);

  const int dx = std::clamp(scene.offset_x, -kMaxOffset, kMaxOffset);
  const int dy = std::clamp(scene.offset_y, -kMaxOffset, kMaxOffset);
  fill(f, 250 + dx, 258 + dy, 390 + dx, 420, kGlass);
  fill(f, 280 + dx, 178 + dy, 360 + dx, 258 + dy, kNeckGlass);
  for (int i = 0; i < 3; ++i) {
    const int top = kThreadTop + kThreadPitch * i + dy;
    fill(f, 282 + dx, top, 359 + dx, top + kThreadHeight, kThreadBlue);
  }

  const int exposed = std::clamp(scene.exposed_threads, 0, 3);
  if (exposed == 0) {
    fill(f, 272 + dx, 172 + dy, 368 + dx, 256 + dy, kCapWhite);
  } else {
    // Loose cap resting on the upper threads.
    const int bottom = kThreadTop + kThreadPitch * (3 - exposed) - 6 + dy;
    fill(f, 270 + dx, 150 + dy, 370 + dx, bottom, kCapWhite);
  }

  if (scene.noise > 0.0) {
    std::mt19937_64 rng(scene.noise_seed);
    salt_and_pepper(f, scene.noise, rng);
  }
  return f;
}

void salt_and_pepper(vision::Frame& frame, double fraction, std::mt19937_64& rng) {
  const std::size_t n = frame.pixel_count();
  const auto flips = static_cast<std::size_t>(std::llround(std::clamp(fraction, 0.0, 1.0) * n));
  if (flips == 0) return;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates: the first `flips` entries are a uniform sample.
  for (std::size_t i = 0; i < flips; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
    const std::uint8_t v = (rng() & 1u) ? 255 : 0;
    std::uint8_t* p = frame.rgb.data() + 3 * idx[i];
    p[0] = p[1] = p[2] = v;
  }
}

CorpusGenerator::CorpusGenerator(std::uint64_t seed, double max_noise)
    : rng_(seed), max_noise_(std::clamp(max_noise, 0.0, 1.0)) {}

LabeledFrame CorpusGenerator::next() {
  std::uniform_int_distribution<int> offset(-kMaxOffset, kMaxOffset);
  std::uniform_int_distribution<int> threads(1, 3);
  std::uniform_real_distribution<double> noise(0.0, max_noise_);

  Scene scene;
  const bool capped = index_++ % 2 == 0;
  scene.exposed_threads = capped ? 0 : threads(rng_);
  scene.offset_x = offset(rng_);
  scene.offset_y = offset(rng_);
  scene.noise = noise(rng_);
  scene.noise_seed = rng_();

  LabeledFrame out;
  out.frame = render_scene(scene);
  out.capped = capped;
  out.exposed_threads = scene.exposed_threads;
  out.scene = scene;
  return out;
}

}  // namespace caplab::synthetic
