#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <png.h>

#include "scenetex/error.hpp"
#include "scenetex/image.hpp"

namespace scenetex::io {

/// Reads an 8-bit PNG converted to `channels` (1 = gray, 3 = RGB).
inline Image<std::uint8_t> read_png(const std::filesystem::path& path, int channels) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str()))
    throw Error(ErrorCode::Io, "cannot read PNG " + path.string() + ": " + image.message);
  image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Image<std::uint8_t> out(static_cast<int>(image.width), static_cast<int>(image.height), channels);
  if (!png_image_finish_read(&image, nullptr, out.data.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(ErrorCode::Io, "cannot decode PNG " + path.string() + ": " + image.message);
  }
  return out;
}

inline void write_png(const std::filesystem::path& path, const Image<std::uint8_t>& img) {
  if (img.channels != 1 && img.channels != 3 && img.channels != 4)
    throw Error(ErrorCode::InvalidInput, "PNG output supports 1, 3 or 4 channels");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 1 ? PNG_FORMAT_GRAY : img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_RGBA;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.data.data(), 0, nullptr))
    throw Error(ErrorCode::Io, "cannot write PNG " + path.string() + ": " + image.message);
}

inline RgbImage read_rgb(const std::filesystem::path& path) { return to_float(read_png(path, 3)); }

inline void write_rgb(const std::filesystem::path& path, const RgbImage& img) { write_png(path, to_u8(img)); }

/// Binary mask from an 8-bit PNG: values above 127 are set.
inline Mask read_mask(const std::filesystem::path& path) {
  auto img = read_png(path, 1);
  for (auto& v : img.data) v = v > 127 ? 1 : 0;
  return img;
}

/// Writes a binary mask as 0 / 255.
inline void write_mask(const std::filesystem::path& path, const Mask& mask) {
  Image<std::uint8_t> img = mask;
  for (auto& v : img.data) v = v ? 255 : 0;
  write_png(path, img);
}

}  // namespace scenetex::io
