#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "scenetex/error.hpp"
#include "scenetex/image.hpp"

namespace scenetex::io {

// PFM: "Pf" (1 channel) or "PF" (3 channels), a negative scale marks
// little-endian data, rows stored bottom to top.
inline FloatImage read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string magic;
  int width = 0, height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  in.get();  // single whitespace before the raster
  if (!in || (magic != "Pf" && magic != "PF") || width <= 0 || height <= 0 || scale == 0.0)
    throw Error(ErrorCode::Io, "malformed PFM header in " + path.string());
  const int channels = magic == "PF" ? 3 : 1;
  const bool little = scale < 0.0;
  FloatImage img(width, height, channels);
  std::vector<std::uint32_t> row(static_cast<std::size_t>(width) * channels);
  for (int y = height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
    if (!in) throw Error(ErrorCode::Io, "truncated PFM raster in " + path.string());
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::uint32_t bits = row[i];
      if (little != (std::endian::native == std::endian::little)) bits = __builtin_bswap32(bits);
      float v;
      std::memcpy(&v, &bits, 4);
      img.data[static_cast<std::size_t>(y) * width * channels + i] = v;
    }
  }
  return img;
}

inline void write_pfm(const std::filesystem::path& path, const FloatImage& img) {
  if (img.channels != 1 && img.channels != 3) throw Error(ErrorCode::InvalidInput, "PFM supports 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << (img.channels == 3 ? "PF" : "Pf") << "\n" << img.width << " " << img.height << "\n-1.0\n";
  const std::size_t row = static_cast<std::size_t>(img.width) * img.channels;
  for (int y = img.height - 1; y >= 0; --y) {
    for (std::size_t i = 0; i < row; ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, &img.data[static_cast<std::size_t>(y) * row + i], 4);
      if constexpr (std::endian::native != std::endian::little) bits = __builtin_bswap32(bits);
      out.write(reinterpret_cast<const char*>(&bits), 4);
    }
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

}  // namespace scenetex::io
