#include "cir/tfa/image.hpp"

#include <bit>
#include <cstdint>
#include <cstring>

#include "cir/io.hpp"

static_assert(std::endian::native == std::endian::little, "TFI I/O assumes a little-endian host");

namespace cir::tfa {

namespace {

constexpr char kMagic[4] = {'T', 'F', 'I', '1'};
constexpr std::size_t kHeader = 12;
constexpr std::uint32_t kMaxSide = 1u << 14;

}  // namespace

std::string encode_tfi(const Image& img) {
  if (img.pixels.size() != img.height * img.width) throw TfiFormatError("encode_tfi: pixel count mismatch");
  std::string out(kHeader + img.pixels.size() * sizeof(float), '\0');
  const auto h = static_cast<std::uint32_t>(img.height);
  const auto w = static_cast<std::uint32_t>(img.width);
  std::memcpy(out.data(), kMagic, 4);
  std::memcpy(out.data() + 4, &h, 4);
  std::memcpy(out.data() + 8, &w, 4);
  std::memcpy(out.data() + kHeader, img.pixels.data(), img.pixels.size() * sizeof(float));
  return out;
}

Image decode_tfi(const std::string& bytes) {
  if (bytes.size() < kHeader || std::memcmp(bytes.data(), kMagic, 4) != 0) throw TfiFormatError("not a TFI1 file");
  std::uint32_t h = 0, w = 0;
  std::memcpy(&h, bytes.data() + 4, 4);
  std::memcpy(&w, bytes.data() + 8, 4);
  if (h == 0 || w == 0 || h > kMaxSide || w > kMaxSide) throw TfiFormatError("TFI: bad dimensions");
  const std::size_t n = static_cast<std::size_t>(h) * w;
  if (bytes.size() != kHeader + n * sizeof(float)) throw TfiFormatError("TFI: payload size mismatch");
  Image img(h, w);
  std::memcpy(img.pixels.data(), bytes.data() + kHeader, n * sizeof(float));
  return img;
}

void write_tfi(const std::filesystem::path& path, const Image& img) { atomic_write(path, encode_tfi(img)); }

Image read_tfi(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const IoError& e) {
    throw TfiFormatError(e.what());
  }
  try {
    return decode_tfi(bytes);
  } catch (const TfiFormatError& e) {
    throw TfiFormatError(path.string() + ": " + e.what());
  }
}

}  // namespace cir::tfa
