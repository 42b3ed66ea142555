#include "caplab/vision.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

#ifdef CAPLAB_HAVE_OPENMP
#include <omp.h>
#endif

namespace caplab::vision {

Frame::Frame(int w, int h) : width(w), height(h) {
  if (w < 1 || h < 1) throw VisionError(VisionErrc::InvalidFrame, "frame dimensions must be >= 1");
  rgb.assign(3 * static_cast<std::size_t>(w) * h, 0);
}

void Frame::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  std::uint8_t* p = at(x, y);
  p[0] = r;
  p[1] = g;
  p[2] = b;
}

long BinaryImage::count() const {
  return static_cast<long>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

bool Roi::fits(int frame_width, int frame_height) const {
  return x >= 0 && y >= 0 && w >= 1 && h >= 1 && static_cast<long>(x) + w <= frame_width &&
         static_cast<long>(y) + h <= frame_height;
}

void DetectorConfig::validate() const {
  auto bad = [](const char* what) { throw VisionError(VisionErrc::InvalidConfig, what); };
  for (const Hsv* c : {&hsv_low, &hsv_high}) {
    if (!(c->h >= 0.0 && c->h < 360.0)) bad("hue bounds must lie in [0, 360)");
    if (!(c->s >= 0.0 && c->s <= 1.0)) bad("saturation bounds must lie in [0, 1]");
    if (!(c->v >= 0.0 && c->v <= 1.0)) bad("value bounds must lie in [0, 1]");
  }
  if (hsv_low.s > hsv_high.s || hsv_low.v > hsv_high.v)
    bad("saturation and value ranges must be ordered low <= high");
  if (gray_threshold < 0 || gray_threshold > 255) bad("gray_threshold must lie in [0, 255]");
  if (area_threshold < 0) bad("area_threshold must be >= 0");
  if (min_blob < 0) bad("min_blob must be >= 0");
}

Hsv rgb_to_hsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const int mx = std::max({r8, g8, b8});
  const int mn = std::min({r8, g8, b8});
  const double delta = (mx - mn) / 255.0;
  Hsv out;
  out.v = mx / 255.0;
  out.s = mx == 0 ? 0.0 : static_cast<double>(mx - mn) / mx;
  if (mx == mn) return out;

  const double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
  double h = 0.0;
  if (mx == r8) {
    h = 60.0 * std::fmod((g - b) / delta, 6.0);
  } else if (mx == g8) {
    h = 60.0 * ((b - r) / delta + 2.0);
  } else {
    h = 60.0 * ((r - g) / delta + 4.0);
  }
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
  out.h = h;
  return out;
}

bool in_range(const Hsv& px, const Hsv& low, const Hsv& high) {
  const bool hue_ok = low.h <= high.h ? (px.h >= low.h && px.h <= high.h)
                                      : (px.h >= low.h || px.h <= high.h);
  return hue_ok && px.s >= low.s && px.s <= high.s && px.v >= low.v && px.v <= high.v;
}

namespace {

void check_frame(const Frame& f) {
  if (f.width < 1 || f.height < 1 || f.rgb.size() != 3 * f.pixel_count())
    throw VisionError(VisionErrc::InvalidFrame, "frame buffer does not match its dimensions");
}

int luma(const std::uint8_t* p) { return (299 * p[0] + 587 * p[1] + 114 * p[2]) / 1000; }

struct Run {
  int x0;
  int x1;  // inclusive
};

int find_root(std::vector<int>& parent, int i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

void unite(std::vector<int>& parent, int a, int b) {
  a = find_root(parent, a);
  b = find_root(parent, b);
  if (a != b) parent[std::max(a, b)] = std::min(a, b);
}

DetectionResult classify(const BlobStats& blobs, const DetectorConfig& cfg) {
  return {blobs.total_area <= cfg.area_threshold, blobs.total_area, blobs.blob_count};
}

}  // namespace

Frame extract_roi(const Frame& frame, const Roi& roi) {
  check_frame(frame);
  if (!roi.fits(frame.width, frame.height))
    throw VisionError(VisionErrc::RoiOutOfBounds, "ROI does not fit inside the frame");
  Frame out(roi.w, roi.h);
  const std::size_t row_bytes = 3 * static_cast<std::size_t>(roi.w);
  for (int j = 0; j < roi.h; ++j)
    std::copy_n(frame.at(roi.x, roi.y + j), row_bytes, out.at(0, j));
  return out;
}

BinaryImage apply_mask(const Frame& frame, const DetectorConfig& cfg) {
  check_frame(frame);
  BinaryImage mask(frame.width, frame.height);
  const int w = frame.width;
  const int h = frame.height;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* src = frame.at(0, y);
    std::uint8_t* dst = mask.bits.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x, src += 3)
      dst[x] = in_range(rgb_to_hsv(src[0], src[1], src[2]), cfg.hsv_low, cfg.hsv_high) ? 1 : 0;
  }
  return mask;
}

BinaryImage threshold_gray(const Frame& frame, int gray_threshold) {
  check_frame(frame);
  BinaryImage mask(frame.width, frame.height);
  const int w = frame.width;
  const int h = frame.height;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* src = frame.at(0, y);
    std::uint8_t* dst = mask.bits.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x, src += 3) dst[x] = luma(src) > gray_threshold ? 1 : 0;
  }
  return mask;
}

// Rows are run-length encoded in parallel; runs that overlap between
// adjacent rows are then merged with union-find.
BlobStats total_blob_area(const BinaryImage& mask, long min_blob) {
  const int w = mask.width;
  const int h = mask.height;
  if (w <= 0 || h <= 0) return {};

  std::vector<std::vector<Run>> rows(static_cast<std::size_t>(h));
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* row = mask.bits.data() + static_cast<std::size_t>(y) * w;
    auto& runs = rows[static_cast<std::size_t>(y)];
    for (int x = 0; x < w;) {
      if (!row[x]) {
        ++x;
        continue;
      }
      const int start = x;
      while (x < w && row[x]) ++x;
      runs.push_back({start, x - 1});
    }
  }

  std::vector<int> first(static_cast<std::size_t>(h) + 1, 0);
  for (int y = 0; y < h; ++y)
    first[y + 1] = first[y] + static_cast<int>(rows[static_cast<std::size_t>(y)].size());
  const int total_runs = first[h];
  if (total_runs == 0) return {};

  std::vector<int> parent(static_cast<std::size_t>(total_runs));
  std::iota(parent.begin(), parent.end(), 0);

  for (int y = 1; y < h; ++y) {
    const auto& above = rows[static_cast<std::size_t>(y - 1)];
    const auto& below = rows[static_cast<std::size_t>(y)];
    std::size_t i = 0, j = 0;
    while (i < above.size() && j < below.size()) {
      if (above[i].x1 >= below[j].x0 && below[j].x1 >= above[i].x0)
        unite(parent, first[y - 1] + static_cast<int>(i), first[y] + static_cast<int>(j));
      if (above[i].x1 < below[j].x1) ++i;
      else ++j;
    }
  }

  std::vector<long> area(static_cast<std::size_t>(total_runs), 0);
  for (int y = 0; y < h; ++y) {
    const auto& runs = rows[static_cast<std::size_t>(y)];
    for (std::size_t k = 0; k < runs.size(); ++k)
      area[find_root(parent, first[y] + static_cast<int>(k))] += runs[k].x1 - runs[k].x0 + 1;
  }

  BlobStats out;
  for (int r = 0; r < total_runs; ++r) {
    if (parent[r] != r || area[r] < min_blob) continue;
    out.total_area += area[r];
    ++out.blob_count;
  }
  return out;
}

DetectionResult detect(const Frame& frame, const Roi& roi, const DetectorConfig& cfg) {
  cfg.validate();
  const Frame region = extract_roi(frame, roi);
  return classify(total_blob_area(apply_mask(region, cfg), cfg.min_blob), cfg);
}

DetectionResult detect_premasked(const Frame& frame, const Roi& roi, const DetectorConfig& cfg) {
  cfg.validate();
  const Frame region = extract_roi(frame, roi);
  return classify(total_blob_area(threshold_gray(region, cfg.gray_threshold), cfg.min_blob), cfg);
}

std::vector<DetectionResult> detect_batch(std::span<const Frame> frames, const Roi& roi,
                                          const DetectorConfig& cfg) {
  const long n = static_cast<long>(frames.size());
  std::vector<DetectionResult> results(frames.size());
  std::vector<std::exception_ptr> errors(frames.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    try {
      results[static_cast<std::size_t>(i)] = detect(frames[static_cast<std::size_t>(i)], roi, cfg);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

int kernel_threads() {
#ifdef CAPLAB_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace caplab::vision
