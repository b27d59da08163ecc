#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "scenetex/error.hpp"
#include "scenetex/geometry.hpp"

namespace scenetex::io {

struct ObjData {
  TriangleMesh mesh;
  std::optional<std::filesystem::path> texture;  // map_Kd of the first material, resolved
};

namespace detail {

inline long obj_index(const std::string& token, std::size_t count, const std::string& what) {
  long i = 0;
  try {
    i = std::stol(token);
  } catch (const std::exception&) {
    throw Error(ErrorCode::Io, "bad OBJ " + what + " index '" + token + "'");
  }
  const long resolved = i < 0 ? static_cast<long>(count) + i : i - 1;
  if (resolved < 0 || resolved >= static_cast<long>(count))
    throw Error(ErrorCode::Io, "OBJ " + what + " index out of range");
  return resolved;
}

inline std::optional<std::filesystem::path> mtl_texture(const std::filesystem::path& mtl) {
  std::ifstream in(mtl);
  if (!in) return std::nullopt;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "map_Kd") {
      std::string rest, last;
      while (ls >> rest) last = rest;  // options precede the file name
      if (!last.empty()) return mtl.parent_path() / last;
    }
  }
  return std::nullopt;
}

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Reads positions, texture coordinates and faces. Polygons are fan
/// triangulated; uvs are flipped so that v = 0 is the top image row. An
/// optional "v x y z r g b" color extension fills vertex_colors.
inline ObjData read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  ObjData out;
  TriangleMesh& mesh = out.mesh;
  std::vector<Vec2> vt;
  std::vector<Vec2> corner_uvs;
  bool all_uv = true;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw Error(ErrorCode::Io, "bad OBJ vertex: " + line);
      mesh.vertices.emplace_back(x, y, z);
      double r, g, b;
      if (ls >> r >> g >> b) mesh.vertex_colors.emplace_back(r, g, b);
    } else if (key == "vt") {
      double u, v;
      if (!(ls >> u >> v)) throw Error(ErrorCode::Io, "bad OBJ texture coordinate: " + line);
      vt.emplace_back(u, 1.0 - v);
    } else if (key == "f") {
      std::vector<std::uint32_t> vi;
      std::vector<long> ti;
      std::string tok;
      while (ls >> tok) {
        const auto s1 = tok.find('/');
        vi.push_back(static_cast<std::uint32_t>(detail::obj_index(tok.substr(0, s1), mesh.vertices.size(), "vertex")));
        long t = -1;
        if (s1 != std::string::npos) {
          const auto s2 = tok.find('/', s1 + 1);
          const std::string ts = tok.substr(s1 + 1, s2 == std::string::npos ? std::string::npos : s2 - s1 - 1);
          if (!ts.empty()) t = detail::obj_index(ts, vt.size(), "texture");
        }
        ti.push_back(t);
      }
      if (vi.size() < 3) throw Error(ErrorCode::Io, "OBJ face with fewer than 3 vertices");
      for (std::size_t j = 1; j + 1 < vi.size(); ++j) {
        mesh.triangles.push_back({vi[0], vi[j], vi[j + 1]});
        for (std::size_t k : {std::size_t{0}, j, j + 1}) {
          if (ti[k] < 0) {
            all_uv = false;
            corner_uvs.emplace_back(0.0, 0.0);
          } else {
            corner_uvs.push_back(vt[static_cast<std::size_t>(ti[k])]);
          }
        }
      }
    } else if (key == "mtllib" && !out.texture) {
      std::string name;
      std::getline(ls >> std::ws, name);
      out.texture = detail::mtl_texture(path.parent_path() / name);
    }
  }
  if (all_uv && !mesh.triangles.empty()) mesh.uvs = std::move(corner_uvs);
  if (!mesh.vertex_colors.empty() && mesh.vertex_colors.size() != mesh.vertices.size()) mesh.vertex_colors.clear();
  return out;
}

/// Writes an OBJ and, when `texture_file` is given, a sibling MTL whose
/// map_Kd refers to it by relative name.
inline void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh,
                      const std::string& texture_file = {}) {
  using detail::fmt_double;
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  if (!texture_file.empty()) {
    auto mtl_path = path;
    mtl_path.replace_extension(".mtl");
    std::ofstream mtl(mtl_path);
    if (!mtl) throw Error(ErrorCode::Io, "cannot write " + mtl_path.string());
    mtl << "newmtl material0\nKd 1 1 1\nmap_Kd " << texture_file << "\n";
    out << "mtllib " << mtl_path.filename().string() << "\nusemtl material0\n";
  }
  const bool colors = mesh.vertex_colors.size() == mesh.vertices.size() && !mesh.vertex_colors.empty();
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& v = mesh.vertices[i];
    out << "v " << fmt_double(v.x()) << ' ' << fmt_double(v.y()) << ' ' << fmt_double(v.z());
    if (colors) {
      const Vec3& c = mesh.vertex_colors[i];
      out << ' ' << fmt_double(c.x()) << ' ' << fmt_double(c.y()) << ' ' << fmt_double(c.z());
    }
    out << '\n';
  }
  for (const auto& uv : mesh.uvs) out << "vt " << fmt_double(uv.x()) << ' ' << fmt_double(1.0 - uv.y()) << '\n';
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    out << 'f';
    for (int c = 0; c < 3; ++c) {
      out << ' ' << mesh.triangles[t][static_cast<std::size_t>(c)] + 1;
      if (mesh.has_uvs()) out << '/' << 3 * t + static_cast<std::size_t>(c) + 1;
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

}  // namespace scenetex::io
