#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Geometry>
#include <json.hpp>

#include "scenetex/error.hpp"
#include "scenetex/geometry.hpp"
#include "scenetex/layout.hpp"

namespace scenetex::io {

namespace detail {

inline constexpr char kBase64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(const std::string& in) {
  std::string out;
  out.reserve((in.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < in.size(); i += 3) {
    const std::uint32_t n = (static_cast<std::uint8_t>(in[i]) << 16) | (static_cast<std::uint8_t>(in[i + 1]) << 8) |
                            static_cast<std::uint8_t>(in[i + 2]);
    for (int s = 18; s >= 0; s -= 6) out.push_back(kBase64[(n >> s) & 63]);
  }
  if (i < in.size()) {
    std::uint32_t n = static_cast<std::uint8_t>(in[i]) << 16;
    if (i + 1 < in.size()) n |= static_cast<std::uint8_t>(in[i + 1]) << 8;
    out.push_back(kBase64[(n >> 18) & 63]);
    out.push_back(kBase64[(n >> 12) & 63]);
    out.push_back(i + 1 < in.size() ? kBase64[(n >> 6) & 63] : '=');
    out.push_back('=');
  }
  return out;
}

inline std::string base64_decode(const std::string& in) {
  std::string out;
  std::uint32_t acc = 0;
  int bits = 0;
  for (char ch : in) {
    if (ch == '=') break;
    const char* p = std::strchr(kBase64, ch);
    if (ch == '\0' || p == nullptr) {
      if (std::isspace(static_cast<unsigned char>(ch))) continue;
      throw Error(ErrorCode::Io, "invalid base64 data");
    }
    acc = (acc << 6) | static_cast<std::uint32_t>(p - kBase64);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((acc >> bits) & 0xff));
    }
  }
  return out;
}

template <typename T>
void append_raw(std::string& buf, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  buf.append(b, sizeof(T));
}

inline void pad4(std::string& buf) {
  while (buf.size() % 4) buf.push_back('\0');
}

}  // namespace detail

/// Serializes a scene as glTF 2.0 with a single embedded buffer. Each scene
/// node becomes one glTF node carrying its pose as translation / rotation
/// (unit quaternion) / uniform scale and its canonical-space mesh; background
/// nodes are tagged with extras.background. Meshes with per-corner uvs are
/// written unwelded.
inline nlohmann::json scene_to_gltf(const SceneGraph& scene) {
  using nlohmann::json;
  std::string buffer;
  json accessors = json::array(), views = json::array(), meshes = json::array(), nodes = json::array();
  json node_ids = json::array();

  auto add_view = [&](std::size_t offset, std::size_t length, int target) {
    views.push_back({{"buffer", 0}, {"byteOffset", offset}, {"byteLength", length}, {"target", target}});
    return views.size() - 1;
  };

  for (const auto& node : scene.nodes) {
    const TriangleMesh& m = node.mesh;
    const bool unweld = m.has_uvs();
    std::vector<Vec3> pos;
    std::vector<Vec2> uv;
    std::vector<Vec3> col;
    std::vector<std::uint32_t> idx;
    const bool colors = !m.vertex_colors.empty();
    if (unweld) {
      for (std::size_t t = 0; t < m.triangles.size(); ++t)
        for (int c = 0; c < 3; ++c) {
          idx.push_back(static_cast<std::uint32_t>(pos.size()));
          pos.push_back(m.corner(t, c));
          uv.push_back(m.uv(t, c));
          if (colors) col.push_back(m.vertex_colors[m.triangles[t][static_cast<std::size_t>(c)]]);
        }
    } else {
      pos = m.vertices;
      col = m.vertex_colors;
      for (const auto& tri : m.triangles) idx.insert(idx.end(), tri.begin(), tri.end());
    }
    if (pos.empty() || idx.empty()) throw Error(ErrorCode::InvalidInput, "scene node '" + node.name + "' has no geometry");

    json attributes;
    {
      const std::size_t off = buffer.size();
      Eigen::Vector3f lo = Eigen::Vector3f::Constant(std::numeric_limits<float>::infinity());
      Eigen::Vector3f hi = -lo;
      for (const auto& p : pos) {
        const Eigen::Vector3f f = p.cast<float>();
        lo = lo.cwiseMin(f);
        hi = hi.cwiseMax(f);
        for (int a = 0; a < 3; ++a) detail::append_raw(buffer, f(a));
      }
      const auto v = add_view(off, buffer.size() - off, 34962);
      accessors.push_back({{"bufferView", v},
                           {"componentType", 5126},
                           {"count", pos.size()},
                           {"type", "VEC3"},
                           {"min", {lo.x(), lo.y(), lo.z()}},
                           {"max", {hi.x(), hi.y(), hi.z()}}});
      attributes["POSITION"] = accessors.size() - 1;
    }
    if (unweld) {
      const std::size_t off = buffer.size();
      for (const auto& t : uv) {
        detail::append_raw(buffer, static_cast<float>(t.x()));
        detail::append_raw(buffer, static_cast<float>(t.y()));
      }
      const auto v = add_view(off, buffer.size() - off, 34962);
      accessors.push_back({{"bufferView", v}, {"componentType", 5126}, {"count", uv.size()}, {"type", "VEC2"}});
      attributes["TEXCOORD_0"] = accessors.size() - 1;
    }
    if (colors) {
      const std::size_t off = buffer.size();
      for (const auto& c : col)
        for (int a = 0; a < 3; ++a) detail::append_raw(buffer, static_cast<float>(c(a)));
      const auto v = add_view(off, buffer.size() - off, 34962);
      accessors.push_back({{"bufferView", v}, {"componentType", 5126}, {"count", col.size()}, {"type", "VEC3"}});
      attributes["COLOR_0"] = accessors.size() - 1;
    }
    std::size_t indices;
    {
      const std::size_t off = buffer.size();
      for (auto i : idx) detail::append_raw(buffer, i);
      const auto v = add_view(off, buffer.size() - off, 34963);
      accessors.push_back({{"bufferView", v}, {"componentType", 5125}, {"count", idx.size()}, {"type", "SCALAR"}});
      indices = accessors.size() - 1;
    }
    detail::pad4(buffer);
    meshes.push_back({{"name", node.name}, {"primitives", {{{"attributes", attributes}, {"indices", indices}, {"mode", 4}}}}});

    const Eigen::Quaterniond q(Eigen::AngleAxisd(node.pose.rotation.norm(), node.pose.rotation.norm() > 0.0
                                                                                ? Vec3(node.pose.rotation.normalized())
                                                                                : Vec3(Vec3::UnitX())));
    const double s = node.pose.scale();
    const Vec3& t = node.pose.translation;
    node_ids.push_back(nodes.size());
    nodes.push_back({{"name", node.name},
                     {"mesh", meshes.size() - 1},
                     {"translation", {t.x(), t.y(), t.z()}},
                     {"rotation", {q.x(), q.y(), q.z(), q.w()}},
                     {"scale", {s, s, s}},
                     {"extras", {{"background", node.background}}}});
  }

  json doc;
  doc["asset"] = {{"version", "2.0"}, {"generator", "scenetex"}};
  doc["scene"] = 0;
  doc["scenes"] = json::array({{{"nodes", node_ids}}});
  doc["nodes"] = nodes;
  doc["meshes"] = meshes;
  doc["accessors"] = accessors;
  doc["bufferViews"] = views;
  doc["buffers"] = json::array(
      {{{"byteLength", buffer.size()}, {"uri", "data:application/octet-stream;base64," + detail::base64_encode(buffer)}}});
  return doc;
}

inline void write_gltf(const std::filesystem::path& path, const SceneGraph& scene) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << scene_to_gltf(scene).dump(1) << '\n';
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

/// Reads glTF files whose buffers are embedded data URIs or sibling .bin
/// files, with float positions and uint8/16/32 triangle indices. Node
/// transforms must be TRS with uniform scale.
inline SceneGraph read_gltf(const std::filesystem::path& path) {
  using nlohmann::json;
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Io, path.string() + ": " + e.what());
  }
  try {
    std::vector<std::string> buffers;
    for (const auto& b : doc.at("buffers")) {
      const std::string uri = b.at("uri");
      const auto comma = uri.find(',');
      if (uri.rfind("data:", 0) == 0 && comma != std::string::npos) {
        buffers.push_back(detail::base64_decode(uri.substr(comma + 1)));
      } else {
        std::ifstream bin(path.parent_path() / uri, std::ios::binary);
        if (!bin) throw Error(ErrorCode::Io, "missing glTF buffer " + uri);
        buffers.emplace_back(std::istreambuf_iterator<char>(bin), std::istreambuf_iterator<char>());
      }
    }
    auto element = [&](std::size_t accessor, std::size_t i, int comp) -> double {
      const json& a = doc.at("accessors").at(accessor);
      const json& v = doc.at("bufferViews").at(a.at("bufferView").get<std::size_t>());
      const std::string& buf = buffers.at(v.at("buffer").get<std::size_t>());
      const int type = a.at("componentType");
      const std::size_t csize = type == 5126 || type == 5125 ? 4 : type == 5123 ? 2 : 1;
      const std::string kind = a.at("type");
      const std::size_t ncomp = kind == "VEC3" ? 3 : kind == "VEC2" ? 2 : kind == "VEC4" ? 4 : 1;
      const std::size_t stride = v.value("byteStride", csize * ncomp);
      const std::size_t off = v.value("byteOffset", std::size_t{0}) + a.value("byteOffset", std::size_t{0}) +
                              i * stride + static_cast<std::size_t>(comp) * csize;
      if (off + csize > buf.size()) throw Error(ErrorCode::Io, "glTF accessor out of buffer range");
      const char* p = buf.data() + off;
      switch (type) {
        case 5126: {
          float f;
          std::memcpy(&f, p, 4);
          return f;
        }
        case 5125: {
          std::uint32_t u;
          std::memcpy(&u, p, 4);
          return u;
        }
        case 5123: {
          std::uint16_t u;
          std::memcpy(&u, p, 2);
          return u;
        }
        case 5121: return static_cast<std::uint8_t>(*p);
        default: throw Error(ErrorCode::Io, "unsupported glTF component type");
      }
    };

    SceneGraph scene;
    for (const auto& n : doc.at("nodes")) {
      if (!n.contains("mesh")) continue;
      if (n.contains("matrix")) throw Error(ErrorCode::Io, "glTF node matrices are not supported; use TRS");
      SceneNode node;
      node.name = n.value("name", "node_" + std::to_string(scene.nodes.size()));
      if (n.contains("extras")) node.background = n["extras"].value("background", false);
      if (n.contains("translation")) {
        const auto& t = n["translation"];
        node.pose.translation = Vec3(t[0], t[1], t[2]);
      }
      if (n.contains("rotation")) {
        const auto& r = n["rotation"];
        const Eigen::AngleAxisd aa(Eigen::Quaterniond(r[3], r[0], r[1], r[2]).normalized());
        node.pose.rotation = aa.angle() * aa.axis();
      }
      if (n.contains("scale")) {
        const auto& s = n["scale"];
        const double sx = s[0], sy = s[1], sz = s[2];
        if (std::abs(sx - sy) > 1e-6 * std::abs(sx) || std::abs(sx - sz) > 1e-6 * std::abs(sx) || !(sx > 0.0))
          throw Error(ErrorCode::Io, "glTF node '" + node.name + "' has non-uniform scale");
        node.pose.log_scale = std::log(sx);
      }
      for (const auto& prim : doc.at("meshes").at(n.at("mesh").get<std::size_t>()).at("primitives")) {
        if (prim.value("mode", 4) != 4) throw Error(ErrorCode::Io, "only triangle primitives are supported");
        const auto& attr = prim.at("attributes");
        const std::size_t pa = attr.at("POSITION");
        const std::size_t count = doc["accessors"][pa].at("count");
        const auto base = static_cast<std::uint32_t>(node.mesh.vertices.size());
        for (std::size_t i = 0; i < count; ++i)
          node.mesh.vertices.emplace_back(element(pa, i, 0), element(pa, i, 1), element(pa, i, 2));
        if (attr.contains("COLOR_0")) {
          const std::size_t ca = attr["COLOR_0"];
          for (std::size_t i = 0; i < count; ++i)
            node.mesh.vertex_colors.emplace_back(element(ca, i, 0), element(ca, i, 1), element(ca, i, 2));
        }
        std::vector<std::uint32_t> idx;
        if (prim.contains("indices")) {
          const std::size_t ia = prim["indices"];
          const std::size_t n_idx = doc["accessors"][ia].at("count");
          for (std::size_t i = 0; i < n_idx; ++i) idx.push_back(static_cast<std::uint32_t>(element(ia, i, 0)));
        } else {
          for (std::size_t i = 0; i < count; ++i) idx.push_back(static_cast<std::uint32_t>(i));
        }
        for (std::size_t i = 0; i + 2 < idx.size(); i += 3) {
          node.mesh.triangles.push_back({base + idx[i], base + idx[i + 1], base + idx[i + 2]});
          if (attr.contains("TEXCOORD_0")) {
            const std::size_t ta = attr["TEXCOORD_0"];
            for (int c = 0; c < 3; ++c)
              node.mesh.uvs.emplace_back(element(ta, idx[i + static_cast<std::size_t>(c)], 0),
                                         element(ta, idx[i + static_cast<std::size_t>(c)], 1));
          }
        }
      }
      if (!node.mesh.uvs.empty() && node.mesh.uvs.size() != 3 * node.mesh.triangles.size()) node.mesh.uvs.clear();
      if (!node.mesh.vertex_colors.empty() && node.mesh.vertex_colors.size() != node.mesh.vertices.size())
        node.mesh.vertex_colors.clear();
      scene.nodes.push_back(std::move(node));
    }
    return scene;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Io, path.string() + ": malformed glTF: " + e.what());
  }
}

}  // namespace scenetex::io
