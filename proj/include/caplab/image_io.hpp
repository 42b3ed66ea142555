#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>

#include "caplab/vision.hpp"

namespace caplab::image_io {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary PPM (P6, maxval <= 255).
vision::Frame read_ppm(std::istream& in);
void write_ppm(std::ostream& out, const vision::Frame& frame);

// Dispatches on the file signature: P6 PPM or PNG.
vision::Frame read_image(const std::filesystem::path& path);

void write_image(const std::filesystem::path& path, const vision::Frame& frame);

bool has_image_extension(const std::filesystem::path& path);

}  // namespace caplab::image_io
