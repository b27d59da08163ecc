#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "scenetex/error.hpp"
#include "scenetex/geometry.hpp"

namespace scenetex::io {

namespace detail {

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

inline PlyType ply_type(const std::string& s) {
  if (s == "char" || s == "int8") return PlyType::Int8;
  if (s == "uchar" || s == "uint8") return PlyType::UInt8;
  if (s == "short" || s == "int16") return PlyType::Int16;
  if (s == "ushort" || s == "uint16") return PlyType::UInt16;
  if (s == "int" || s == "int32") return PlyType::Int32;
  if (s == "uint" || s == "uint32") return PlyType::UInt32;
  if (s == "float" || s == "float32") return PlyType::Float32;
  if (s == "double" || s == "float64") return PlyType::Float64;
  throw Error(ErrorCode::Io, "unknown PLY property type '" + s + "'");
}

inline std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::Int8:
    case PlyType::UInt8: return 1;
    case PlyType::Int16:
    case PlyType::UInt16: return 2;
    case PlyType::Int32:
    case PlyType::UInt32:
    case PlyType::Float32: return 4;
    case PlyType::Float64: return 8;
  }
  return 0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::Float32;
  bool is_list = false;
  PlyType count_type = PlyType::UInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;

  int find(const std::string& n) const {
    for (std::size_t i = 0; i < props.size(); ++i)
      if (props[i].name == n) return static_cast<int>(i);
    return -1;
  }
};

class PlyValueReader {
 public:
  PlyValueReader(std::istream& in, bool ascii) : in_(in), ascii_(ascii) {}

  double read(PlyType t) {
    if (ascii_) {
      double v;
      if (!(in_ >> v)) throw Error(ErrorCode::Io, "truncated ASCII PLY data");
      return v;
    }
    unsigned char b[8];
    in_.read(reinterpret_cast<char*>(b), static_cast<std::streamsize>(ply_size(t)));
    if (!in_) throw Error(ErrorCode::Io, "truncated binary PLY data");
    switch (t) {
      case PlyType::Int8: return static_cast<std::int8_t>(b[0]);
      case PlyType::UInt8: return b[0];
      case PlyType::Int16: return static_cast<std::int16_t>(b[0] | (b[1] << 8));
      case PlyType::UInt16: return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
      case PlyType::Int32:
      case PlyType::UInt32:
      case PlyType::Float32: {
        std::uint32_t u = 0;
        for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        if (t == PlyType::Int32) return static_cast<std::int32_t>(u);
        if (t == PlyType::UInt32) return u;
        float f;
        std::memcpy(&f, &u, 4);
        return f;
      }
      case PlyType::Float64: {
        std::uint64_t u = 0;
        for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        double d;
        std::memcpy(&d, &u, 8);
        return d;
      }
    }
    return 0.0;
  }

 private:
  std::istream& in_;
  bool ascii_;
};

inline void put_f64(std::string& s, double d) {
  std::uint64_t u;
  std::memcpy(&u, &d, 8);
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

inline void put_i32(std::string& s, std::int32_t v) {
  const auto u = static_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

}  // namespace detail

struct PlyData {
  PointCloud cloud;              // vertex positions with optional colors/normals
  std::vector<Triangle> faces;   // polygons fan-triangulated
};

/// Reads ASCII or binary little-endian PLY files.
inline PlyData read_ply(const std::filesystem::path& path) {
  using namespace detail;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw Error(ErrorCode::Io, path.string() + " is not a PLY file");
  bool ascii = false;
  std::vector<PlyElement> elements;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii")
        ascii = true;
      else if (fmt != "binary_little_endian")
        throw Error(ErrorCode::Io, "unsupported PLY format " + fmt);
    } else if (key == "element") {
      PlyElement e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (key == "property") {
      if (elements.empty()) throw Error(ErrorCode::Io, "PLY property before element");
      PlyProperty p;
      std::string t;
      ls >> t;
      if (t == "list") {
        std::string ct, vt;
        ls >> ct >> vt;
        p.is_list = true;
        p.count_type = ply_type(ct);
        p.type = ply_type(vt);
      } else {
        p.type = ply_type(t);
      }
      ls >> p.name;
      elements.back().props.push_back(p);
    } else if (key == "end_header") {
      break;
    }
  }

  PlyData out;
  PlyValueReader reader(in, ascii);
  for (const auto& e : elements) {
    const bool is_vertex = e.name == "vertex";
    const bool is_face = e.name == "face";
    const int ix = e.find("x"), iy = e.find("y"), iz = e.find("z");
    const int ir = e.find("red"), ig = e.find("green"), ib = e.find("blue");
    const int inx = e.find("nx"), iny = e.find("ny"), inz = e.find("nz");
    int iface = e.find("vertex_indices");
    if (iface < 0) iface = e.find("vertex_index");
    if (is_vertex && (ix < 0 || iy < 0 || iz < 0)) throw Error(ErrorCode::Io, "PLY vertex lacks x/y/z");
    const bool colors = is_vertex && ir >= 0 && ig >= 0 && ib >= 0;
    const bool normals = is_vertex && inx >= 0 && iny >= 0 && inz >= 0;
    std::vector<double> values(e.props.size());
    for (std::size_t k = 0; k < e.count; ++k) {
      std::vector<std::uint32_t> poly;
      for (std::size_t p = 0; p < e.props.size(); ++p) {
        const auto& prop = e.props[p];
        if (prop.is_list) {
          const auto n = static_cast<std::size_t>(reader.read(prop.count_type));
          for (std::size_t j = 0; j < n; ++j) {
            const double v = reader.read(prop.type);
            if (is_face && static_cast<int>(p) == iface) poly.push_back(static_cast<std::uint32_t>(v));
          }
        } else {
          values[p] = reader.read(prop.type);
        }
      }
      if (is_vertex) {
        out.cloud.points.emplace_back(values[ix], values[iy], values[iz]);
        if (colors) {
          const double scale = e.props[ir].type == PlyType::UInt8 ? 1.0 / 255.0 : 1.0;
          out.cloud.colors.emplace_back(values[ir] * scale, values[ig] * scale, values[ib] * scale);
        }
        if (normals) {
          Vec3 n(values[inx], values[iny], values[inz]);
          out.cloud.normals.push_back(n.norm() > 0.0 ? Vec3(n.normalized()) : n);
        }
      } else if (is_face) {
        for (std::size_t j = 1; j + 1 < poly.size(); ++j) out.faces.push_back({poly[0], poly[j], poly[j + 1]});
      }
    }
  }
  for (const auto& f : out.faces)
    for (auto v : f)
      if (v >= out.cloud.size()) throw Error(ErrorCode::Io, "PLY face index out of range");
  return out;
}

inline PointCloud read_ply_cloud(const std::filesystem::path& path) { return read_ply(path).cloud; }

/// Binary little-endian PLY: double x/y/z, optional uchar red/green/blue,
/// optional double nx/ny/nz, optional int32 triangle list.
inline void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
                      const std::vector<Triangle>& faces = {}) {
  using namespace detail;
  cloud.validate();
  std::string header = "ply\nformat binary_little_endian 1.0\ncomment scenetex\n";
  header += "element vertex " + std::to_string(cloud.size()) + "\n";
  header += "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_colors()) header += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (cloud.has_normals()) header += "property double nx\nproperty double ny\nproperty double nz\n";
  if (!faces.empty())
    header += "element face " + std::to_string(faces.size()) + "\nproperty list uchar int vertex_indices\n";
  header += "end_header\n";
  std::string body;
  body.reserve(cloud.size() * 51 + faces.size() * 13);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int a = 0; a < 3; ++a) put_f64(body, cloud.points[i](a));
    if (cloud.has_colors())
      for (int a = 0; a < 3; ++a)
        body.push_back(static_cast<char>(std::lround(std::clamp(cloud.colors[i](a), 0.0, 1.0) * 255.0)));
    if (cloud.has_normals())
      for (int a = 0; a < 3; ++a) put_f64(body, cloud.normals[i](a));
  }
  for (const auto& f : faces) {
    body.push_back(3);
    for (auto v : f) put_i32(body, static_cast<std::int32_t>(v));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << header;
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

}  // namespace scenetex::io
