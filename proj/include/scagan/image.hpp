#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "scagan/tensor.hpp"

namespace scagan {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 8-bit interleaved raster (H x W x C).
struct ImageU8 {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;

  ImageU8() = default;
  ImageU8(int h, int w, int c, std::uint8_t fill = 0)
      : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

  std::uint8_t& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

/// C x H x W raster in [-1, 1].
struct ImageMap {
  Tensor pixels;

  int channels() const { return pixels.dim(0); }
  int height() const { return pixels.dim(1); }
  int width() const { return pixels.dim(2); }
};

/// 1 x H x W raster in [0, 1].
struct EdgeMap {
  Tensor values;

  int height() const { return values.dim(1); }
  int width() const { return values.dim(2); }
};

/// Reads PNG or JPEG (detected from the file signature), converted to `channels` (1, 3 or 4).
ImageU8 read_image(const std::filesystem::path& path, int channels = 3);
/// Writes 1-, 3- or 4-channel 8-bit PNG.
void write_png(const std::filesystem::path& path, const ImageU8& image);

/// Bilinear resampling with half-pixel centres.
ImageU8 resize_bilinear(const ImageU8& image, int height, int width);

/// u8 -> [-1, 1] via v / 127.5 - 1.
ImageMap normalize_image(const ImageU8& image);
/// [-1, 1] -> u8 via round((v + 1) * 127.5), clamped.
ImageU8 denormalize_image(const ImageMap& image);
/// [0, 1] -> 8-bit grayscale.
ImageU8 edge_to_u8(const EdgeMap& edge);
EdgeMap edge_from_u8(const ImageU8& gray);

}  // namespace scagan
