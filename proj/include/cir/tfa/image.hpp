#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace cir::tfa {

/// Row-major H x W float image. Rows are frequency, columns are time.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, float fill = 0.0f) : height(h), width(w), pixels(h * w, fill) {}

  float& at(std::size_t r, std::size_t c) { return pixels[r * width + c]; }
  float at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
  std::size_t size() const { return pixels.size(); }

  friend bool operator==(const Image&, const Image&) = default;
};

class TfiFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// "TFI1", u32 height, u32 width, float32[height*width], little-endian.
void write_tfi(const std::filesystem::path& path, const Image& img);
Image read_tfi(const std::filesystem::path& path);

std::string encode_tfi(const Image& img);
Image decode_tfi(const std::string& bytes);

}  // namespace cir::tfa
