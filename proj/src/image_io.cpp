#include "caplab/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace caplab::image_io {

namespace {

// Skips whitespace and '#' comments between PPM header tokens.
void skip_separators(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
    } else if (c != EOF && std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

int read_header_int(std::istream& in, const char* what) {
  skip_separators(in);
  long value = 0;
  int digits = 0;
  while (std::isdigit(in.peek())) {
    value = value * 10 + (in.get() - '0');
    if (++digits > 6) throw ImageIoError(std::string("PPM ") + what + " too large");
  }
  if (digits == 0) throw ImageIoError(std::string("PPM header: expected ") + what);
  return static_cast<int>(value);
}

std::string lower_ext(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

vision::Frame read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw ImageIoError(path.string() + ": " + image.message);
  image.format = PNG_FORMAT_RGB;
  if (image.width < 1 || image.height < 1 || image.width > 1u << 15 || image.height > 1u << 15) {
    png_image_free(&image);
    throw ImageIoError(path.string() + ": unsupported PNG dimensions");
  }
  vision::Frame frame(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, frame.rgb.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw ImageIoError(path.string() + ": " + msg);
  }
  return frame;
}

void write_png(const std::filesystem::path& path, const vision::Frame& frame) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(frame.width);
  image.height = static_cast<png_uint_32>(frame.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, frame.rgb.data(), 0, nullptr))
    throw ImageIoError(path.string() + ": " + image.message);
}

}  // namespace

vision::Frame read_ppm(std::istream& in) {
  char magic[2] = {};
  if (!in.read(magic, 2) || magic[0] != 'P' || magic[1] != '6')
    throw ImageIoError("not a binary PPM (P6) stream");
  const int width = read_header_int(in, "width");
  const int height = read_header_int(in, "height");
  const int maxval = read_header_int(in, "maxval");
  if (width < 1 || height < 1) throw ImageIoError("PPM dimensions must be >= 1");
  if (maxval < 1 || maxval > 255) throw ImageIoError("only 8-bit PPM (maxval <= 255) is supported");
  if (!std::isspace(in.get())) throw ImageIoError("PPM header must end with one whitespace byte");

  vision::Frame frame(width, height);
  if (!in.read(reinterpret_cast<char*>(frame.rgb.data()),
               static_cast<std::streamsize>(frame.rgb.size())))
    throw ImageIoError("PPM pixel data truncated");
  if (maxval != 255) {
    for (auto& v : frame.rgb) v = static_cast<std::uint8_t>(std::min(255, v * 255 / maxval));
  }
  return frame;
}

void write_ppm(std::ostream& out, const vision::Frame& frame) {
  out << "P6\n" << frame.width << ' ' << frame.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.rgb.data()),
            static_cast<std::streamsize>(frame.rgb.size()));
  if (!out) throw ImageIoError("failed to write PPM data");
}

vision::Frame read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError(path.string() + ": cannot open");
  std::array<unsigned char, 8> sig{};
  in.read(reinterpret_cast<char*>(sig.data()), sig.size());
  const auto got = in.gcount();
  if (got >= 8 && png_sig_cmp(sig.data(), 0, 8) == 0) {
    in.close();
    return read_png(path);
  }
  if (got >= 2 && sig[0] == 'P' && sig[1] == '6') {
    in.clear();
    in.seekg(0);
    try {
      return read_ppm(in);
    } catch (const ImageIoError& e) {
      throw ImageIoError(path.string() + ": " + e.what());
    }
  }
  throw ImageIoError(path.string() + ": unrecognised image format (expected PNG or P6 PPM)");
}

void write_image(const std::filesystem::path& path, const vision::Frame& frame) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") {
    write_png(path, frame);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError(path.string() + ": cannot open for writing");
  write_ppm(out, frame);
}

bool has_image_extension(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  return ext == ".png" || ext == ".ppm";
}

}  // namespace caplab::image_io
