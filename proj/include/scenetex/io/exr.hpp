#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <zlib.h>

#include "scenetex/error.hpp"
#include "scenetex/image.hpp"

// Minimal OpenEXR support: single-part scanline files. Writes FLOAT channels
// without compression; reads HALF / FLOAT / UINT channels stored with NONE,
// ZIPS or ZIP compression.
namespace scenetex::io {

struct ExrImage {
  std::vector<std::string> channel_names;  // sorted, matching data channels
  FloatImage data;

  int channel(const std::string& name) const {
    for (std::size_t i = 0; i < channel_names.size(); ++i)
      if (channel_names[i] == name) return static_cast<int>(i);
    return -1;
  }
};

namespace detail {

enum : int { kExrUint = 0, kExrHalf = 1, kExrFloat = 2 };
enum : std::uint8_t { kExrNone = 0, kExrRle = 1, kExrZips = 2, kExrZip = 3 };

inline void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& s, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f32(std::string& s, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(s, v);
}
inline void put_attr(std::string& s, const std::string& name, const std::string& type, const std::string& value) {
  s += name;
  s.push_back('\0');
  s += type;
  s.push_back('\0');
  put_u32(s, static_cast<std::uint32_t>(value.size()));
  s += value;
}

inline float half_to_float(std::uint16_t h) {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000) << 16;
  std::uint32_t exp = (h >> 10) & 0x1f;
  std::uint32_t mant = h & 0x3ff;
  std::uint32_t bits;
  if (exp == 0) {
    if (mant == 0) {
      bits = sign;
    } else {
      exp = 127 - 15 + 1;
      while (!(mant & 0x400)) {
        mant <<= 1;
        --exp;
      }
      mant &= 0x3ff;
      bits = sign | (exp << 23) | (mant << 13);
    }
  } else if (exp == 31) {
    bits = sign | 0x7f800000u | (mant << 13);
  } else {
    bits = sign | ((exp + 127 - 15) << 23) | (mant << 13);
  }
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

class ByteReader {
 public:
  explicit ByteReader(const std::vector<char>& buf) : buf_(buf) {}
  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) {
    if (p > buf_.size()) fail();
    pos_ = p;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    const std::uint64_t hi = u32();
    return lo | (hi << 32);
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }
  std::string cstr() {
    std::string s;
    while (true) {
      need(1);
      const char c = buf_[pos_++];
      if (c == '\0') break;
      s.push_back(c);
    }
    return s;
  }
  const char* ptr(std::size_t n) {
    need(n);
    const char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) fail();
  }
  [[noreturn]] static void fail() { throw Error(ErrorCode::Io, "truncated or malformed EXR file"); }
  const std::vector<char>& buf_;
  std::size_t pos_ = 0;
};

inline std::vector<unsigned char> unzip_chunk(const char* data, std::size_t packed, std::size_t expected) {
  std::vector<unsigned char> tmp(expected);
  uLongf out_len = static_cast<uLongf>(expected);
  if (uncompress(tmp.data(), &out_len, reinterpret_cast<const Bytef*>(data), static_cast<uLong>(packed)) != Z_OK ||
      out_len != expected)
    throw Error(ErrorCode::Io, "EXR zip chunk failed to decompress");
  for (std::size_t i = 1; i < tmp.size(); ++i)
    tmp[i] = static_cast<unsigned char>(static_cast<int>(tmp[i - 1]) + static_cast<int>(tmp[i]) - 128);
  std::vector<unsigned char> out(expected);
  const std::size_t half = (expected + 1) / 2;
  for (std::size_t i = 0; i < expected; ++i) out[i] = (i % 2 == 0) ? tmp[i / 2] : tmp[half + i / 2];
  return out;
}

}  // namespace detail

/// Writes the channels of `img` as FLOAT data. `names` must have one entry per channel.
inline void write_exr(const std::filesystem::path& path, const FloatImage& img, const std::vector<std::string>& names) {
  using namespace detail;
  if (static_cast<int>(names.size()) != img.channels) throw Error(ErrorCode::InvalidInput, "EXR channel names mismatch");
  std::vector<int> order(names.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return names[a] < names[b]; });

  std::string header;
  put_u32(header, 20000630);
  put_u32(header, 2);
  std::string chlist;
  for (int c : order) {
    chlist += names[c];
    chlist.push_back('\0');
    put_u32(chlist, kExrFloat);
    chlist.append(4, '\0');  // pLinear + reserved
    put_u32(chlist, 1);
    put_u32(chlist, 1);
  }
  chlist.push_back('\0');
  put_attr(header, "channels", "chlist", chlist);
  put_attr(header, "compression", "compression", std::string(1, static_cast<char>(kExrNone)));
  std::string box;
  put_u32(box, 0);
  put_u32(box, 0);
  put_u32(box, static_cast<std::uint32_t>(img.width - 1));
  put_u32(box, static_cast<std::uint32_t>(img.height - 1));
  put_attr(header, "dataWindow", "box2i", box);
  put_attr(header, "displayWindow", "box2i", box);
  put_attr(header, "lineOrder", "lineOrder", std::string(1, '\0'));
  std::string f;
  put_f32(f, 1.0f);
  put_attr(header, "pixelAspectRatio", "float", f);
  std::string center;
  put_f32(center, 0.0f);
  put_f32(center, 0.0f);
  put_attr(header, "screenWindowCenter", "v2f", center);
  put_attr(header, "screenWindowWidth", "float", f);
  header.push_back('\0');

  const std::size_t line_bytes = static_cast<std::size_t>(img.width) * img.channels * 4;
  const std::size_t table_start = header.size();
  const std::size_t first_chunk = table_start + 8 * static_cast<std::size_t>(img.height);
  for (int y = 0; y < img.height; ++y) put_u64(header, first_chunk + static_cast<std::size_t>(y) * (8 + line_bytes));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  std::string line;
  for (int y = 0; y < img.height; ++y) {
    line.clear();
    put_u32(line, static_cast<std::uint32_t>(y));
    put_u32(line, static_cast<std::uint32_t>(line_bytes));
    for (int c : order)
      for (int x = 0; x < img.width; ++x) put_f32(line, img.at(x, y, c));
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

inline ExrImage read_exr(const std::filesystem::path& path) {
  using namespace detail;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  const std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ByteReader r(buf);
  if (r.u32() != 20000630) throw Error(ErrorCode::Io, path.string() + " is not an OpenEXR file");
  const std::uint32_t version = r.u32();
  if ((version & 0xff) != 2 || (version & (0x200 | 0x800 | 0x1000)))
    throw Error(ErrorCode::Io, "only single-part scanline EXR files are supported");

  struct Channel {
    std::string name;
    int type;
  };
  std::vector<Channel> channels;
  int compression = -1;
  std::int32_t xmin = 0, ymin = 0, xmax = -1, ymax = -1;
  while (true) {
    const std::string name = r.cstr();
    if (name.empty()) break;
    const std::string type = r.cstr();
    const std::uint32_t size = r.u32();
    const std::size_t end = r.pos() + size;
    if (name == "channels") {
      while (true) {
        const std::string cname = r.cstr();
        if (cname.empty()) break;
        const int ptype = r.i32();
        r.ptr(4);
        if (r.i32() != 1 || r.i32() != 1) throw Error(ErrorCode::Io, "subsampled EXR channels are not supported");
        channels.push_back({cname, ptype});
      }
    } else if (name == "compression") {
      compression = r.u8();
    } else if (name == "dataWindow") {
      xmin = r.i32();
      ymin = r.i32();
      xmax = r.i32();
      ymax = r.i32();
    }
    r.seek(end);
  }
  if (channels.empty() || xmax < xmin || ymax < ymin) throw Error(ErrorCode::Io, "EXR header lacks channels or data window");
  if (compression != kExrNone && compression != kExrZips && compression != kExrZip)
    throw Error(ErrorCode::Io, "unsupported EXR compression (use none, zips or zip)");

  const int width = xmax - xmin + 1;
  const int height = ymax - ymin + 1;
  const int lines_per_chunk = compression == kExrZip ? 16 : 1;
  const int chunk_count = (height + lines_per_chunk - 1) / lines_per_chunk;
  std::vector<std::uint64_t> offsets(static_cast<std::size_t>(chunk_count));
  for (auto& o : offsets) o = r.u64();

  std::size_t pixel_bytes = 0;
  for (const auto& c : channels) pixel_bytes += c.type == kExrHalf ? 2 : 4;
  const std::size_t line_bytes = pixel_bytes * static_cast<std::size_t>(width);

  ExrImage out;
  for (const auto& c : channels) out.channel_names.push_back(c.name);
  out.data = FloatImage(width, height, static_cast<int>(channels.size()));
  for (int k = 0; k < chunk_count; ++k) {
    r.seek(static_cast<std::size_t>(offsets[static_cast<std::size_t>(k)]));
    const int y0 = r.i32() - ymin;
    const auto packed = static_cast<std::size_t>(r.u32());
    const int lines = std::min(lines_per_chunk, height - y0);
    if (y0 < 0 || lines <= 0) throw Error(ErrorCode::Io, "EXR chunk outside the data window");
    const std::size_t expected = line_bytes * static_cast<std::size_t>(lines);
    const char* raw = r.ptr(packed);
    std::vector<unsigned char> bytes;
    if (compression == kExrNone || packed == expected)
      bytes.assign(raw, raw + packed);
    else
      bytes = unzip_chunk(raw, packed, expected);
    if (bytes.size() != expected) throw Error(ErrorCode::Io, "EXR chunk has unexpected size");
    std::size_t p = 0;
    for (int ly = 0; ly < lines; ++ly) {
      for (std::size_t c = 0; c < channels.size(); ++c) {
        for (int x = 0; x < width; ++x) {
          float v;
          if (channels[c].type == kExrHalf) {
            v = half_to_float(static_cast<std::uint16_t>(bytes[p] | (bytes[p + 1] << 8)));
            p += 2;
          } else {
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[p + b]) << (8 * b);
            p += 4;
            if (channels[c].type == kExrFloat)
              std::memcpy(&v, &bits, 4);
            else
              v = static_cast<float>(bits);
          }
          out.data.at(x, y0 + ly, static_cast<int>(c)) = v;
        }
      }
    }
  }
  return out;
}

}  // namespace scenetex::io
