#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "scenetex/error.hpp"

namespace scenetex {

/// Interleaved row-major image, row 0 at the top.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, int c, T fill = T{})
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  bool empty() const { return data.empty(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }

  T& at(int x, int y, int c = 0) { return data[(index(x, y)) * channels + c]; }
  const T& at(int x, int y, int c = 0) const { return data[(index(x, y)) * channels + c]; }

  bool same_shape(const Image& o) const { return width == o.width && height == o.height && channels == o.channels; }
};

using RgbImage = Image<float>;     // 3 channels, linear values in [0,1]
using FloatImage = Image<float>;   // any channel count
using Mask = Image<std::uint8_t>;  // 1 channel, values 0 or 1

/// Bilinear lookup at continuous pixel coordinates (pixel centers at +0.5),
/// clamped at the borders.
inline void sample_bilinear(const Image<float>& img, double u, double v, float* out) {
  const double x = std::clamp(u - 0.5, 0.0, static_cast<double>(img.width - 1));
  const double y = std::clamp(v - 0.5, 0.0, static_cast<double>(img.height - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  for (int c = 0; c < img.channels; ++c) {
    const double top = (1.0 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c);
    const double bottom = (1.0 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c);
    out[c] = static_cast<float>((1.0 - fy) * top + fy * bottom);
  }
}

inline Image<std::uint8_t> to_u8(const Image<float>& img) {
  Image<std::uint8_t> out(img.width, img.height, img.channels);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    out.data[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.data[i], 0.0f, 1.0f) * 255.0f));
  return out;
}

inline Image<float> to_float(const Image<std::uint8_t>& img) {
  Image<float> out(img.width, img.height, img.channels);
  for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = static_cast<float>(img.data[i]) / 255.0f;
  return out;
}

/// Elementwise blend: out = known * mask + random * (1 - mask). The mask
/// either matches the tensors' shape or has one channel broadcast over all.
template <typename T, typename M>
Image<T> masked_blend(const Image<T>& known, const Image<T>& random, const Image<M>& mask) {
  if (!known.same_shape(random)) throw Error(ErrorCode::ShapeError, "known and random tensors differ in shape");
  if (mask.width != known.width || mask.height != known.height ||
      (mask.channels != 1 && mask.channels != known.channels))
    throw Error(ErrorCode::ShapeError, "mask shape does not match tensors");
  Image<T> out = known;
  const std::size_t n = known.pixel_count();
  const int c = known.channels;
  for (std::size_t p = 0; p < n; ++p) {
    for (int k = 0; k < c; ++k) {
      const std::size_t i = p * c + k;
      const auto m = static_cast<T>(mask.channels == 1 ? mask.data[p] : mask.data[i]);
      // Binary weights select so that known values pass through bit for bit.
      if (m == T(1))
        out.data[i] = known.data[i];
      else if (m == T(0))
        out.data[i] = random.data[i];
      else
        out.data[i] = known.data[i] * m + random.data[i] * (T(1) - m);
    }
  }
  return out;
}

}  // namespace scenetex
