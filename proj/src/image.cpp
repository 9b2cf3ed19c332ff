#include "scagan/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

// jpeglib.h expects size_t and FILE to be declared.
#include <jpeglib.h>

namespace scagan {
namespace {

png_uint_32 png_format_for(int channels) {
  switch (channels) {
    case 1:
      return PNG_FORMAT_GRAY;
    case 3:
      return PNG_FORMAT_RGB;
    case 4:
      return PNG_FORMAT_RGBA;
  }
  throw ImageIoError("unsupported channel count " + std::to_string(channels));
}

ImageU8 read_png(const std::filesystem::path& path, int channels) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw ImageIoError("cannot read PNG '" + path.string() + "': " + img.message);
  }
  img.format = png_format_for(channels);
  ImageU8 out(static_cast<int>(img.height), static_cast<int>(img.width), channels);
  if (!png_image_finish_read(&img, nullptr, out.data.data(), 0, nullptr)) {
    png_image_free(&img);
    throw ImageIoError("cannot decode PNG '" + path.string() + "': " + img.message);
  }
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

ImageU8 convert_channels(const ImageU8& in, int channels) {
  if (in.channels == channels) return in;
  ImageU8 out(in.height, in.width, channels);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      std::uint8_t rgb[3];
      if (in.channels == 1) {
        rgb[0] = rgb[1] = rgb[2] = in.at(y, x, 0);
      } else {
        for (int c = 0; c < 3; ++c) rgb[c] = in.at(y, x, c);
      }
      if (channels == 1) {
        out.at(y, x, 0) = static_cast<std::uint8_t>(
            std::lround(0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]));
      } else {
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = rgb[c];
        if (channels == 4) out.at(y, x, 3) = 255;
      }
    }
  }
  return out;
}

ImageU8 read_jpeg(const std::filesystem::path& path, int channels) {
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!file) throw ImageIoError("cannot open JPEG '" + path.string() + "'");
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  ImageU8 raw;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw ImageIoError("cannot decode JPEG '" + path.string() + "': " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);
  raw = ImageU8(static_cast<int>(cinfo.output_height), static_cast<int>(cinfo.output_width),
                cinfo.output_components);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = raw.data.data() +
                   static_cast<std::size_t>(cinfo.output_scanline) * raw.width * raw.channels;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return convert_channels(raw, channels);
}

}  // namespace

ImageU8 read_image(const std::filesystem::path& path, int channels) {
  if (channels != 1 && channels != 3 && channels != 4) {
    throw ImageIoError("read_image: channels must be 1, 3 or 4");
  }
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw ImageIoError("image not found: '" + path.string() + "'");
  unsigned char sig[8] = {};
  probe.read(reinterpret_cast<char*>(sig), sizeof sig);
  probe.close();
  static constexpr unsigned char kPng[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (std::memcmp(sig, kPng, 8) == 0) return read_png(path, channels);
  if (sig[0] == 0xFF && sig[1] == 0xD8) return read_jpeg(path, channels);
  throw ImageIoError("unrecognized image format: '" + path.string() + "'");
}

void write_png(const std::filesystem::path& path, const ImageU8& image) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = png_format_for(image.channels);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!png_image_write_to_file(&img, path.c_str(), 0, image.data.data(), 0, nullptr)) {
    throw ImageIoError("cannot write PNG '" + path.string() + "': " + img.message);
  }
}

ImageU8 resize_bilinear(const ImageU8& image, int height, int width) {
  if (height <= 0 || width <= 0) throw ImageIoError("resize: target size must be positive");
  if (image.height == height && image.width == width) return image;
  ImageU8 out(height, width, image.channels);
  const double sy = static_cast<double>(image.height) / height;
  const double sx = static_cast<double>(image.width) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < image.channels; ++c) {
        const double v = (1 - wy) * ((1 - wx) * image.at(y0, x0, c) + wx * image.at(y0, x1, c)) +
                         wy * ((1 - wx) * image.at(y1, x0, c) + wx * image.at(y1, x1, c));
        out.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

ImageMap normalize_image(const ImageU8& image) {
  Tensor t({image.channels, image.height, image.width});
  for (int c = 0; c < image.channels; ++c)
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x)
        t[(static_cast<std::size_t>(c) * image.height + y) * image.width + x] =
            image.at(y, x, c) / 127.5 - 1.0;
  return ImageMap{std::move(t)};
}

ImageU8 denormalize_image(const ImageMap& image) {
  const int c = image.channels(), h = image.height(), w = image.width();
  ImageU8 out(h, w, c);
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double v = image.pixels[(static_cast<std::size_t>(ch) * h + y) * w + x];
        out.at(y, x, ch) =
            static_cast<std::uint8_t>(std::clamp(std::lround((v + 1.0) * 127.5), 0L, 255L));
      }
  return out;
}

ImageU8 edge_to_u8(const EdgeMap& edge) {
  const int h = edge.height(), w = edge.width();
  ImageU8 out(h, w, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out.at(y, x, 0) = static_cast<std::uint8_t>(
          std::clamp(std::lround(edge.values[static_cast<std::size_t>(y) * w + x] * 255.0), 0L, 255L));
  return out;
}

EdgeMap edge_from_u8(const ImageU8& gray) {
  if (gray.channels != 1) throw ImageIoError("edge_from_u8: expected a single-channel image");
  Tensor t({1, gray.height, gray.width});
  for (std::size_t i = 0; i < gray.data.size(); ++i) t[i] = gray.data[i] / 255.0;
  return EdgeMap{std::move(t)};
}

}  // namespace scagan
