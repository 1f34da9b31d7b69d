#pragma once

// Triangulated square tori T_c = { |r - 1| + |z| = c } and their images,
// with Euler characteristic, manifold checks and an OBJ writer.
//
// Layout for angular resolution N and M = 4 * ceil(N / 4) profile segments:
//   0 < c < 1   torus          V = N*M          F = 2*N*M
//   c = 1       pinched torus  V = N*(M-1) + 1  F = 2*N*(M-1)
//   c > 1       sphere         V = N*(M-1) + 2  F = 2*N*(M-1)
// Ring j sits at theta_j = 2*pi*j/N wrapped into (-pi, pi], so ring 0 is
// the half-plane theta = 0.

#include "fdlab/bingmap.hpp"
#include "fdlab/coords.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace fdlab {

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<CylPoint> params;  // domain point each vertex came from
  std::vector<std::array<int, 3>> faces;
  std::vector<std::vector<int>> polylines;

  std::size_t edge_count() const {
    std::map<std::pair<int, int>, int> edges;
    for (const auto& f : faces)
      for (int i = 0; i < 3; ++i) edges[std::minmax(f[i], f[(i + 1) % 3])]++;
    return edges.size();
  }

  long euler_characteristic() const {
    return static_cast<long>(vertices.size()) - static_cast<long>(edge_count()) + static_cast<long>(faces.size());
  }

  /// Every undirected edge has exactly two faces and every directed edge
  /// appears once, so the faces are coherently oriented.
  bool closed_oriented() const {
    std::map<std::pair<int, int>, int> directed;
    for (const auto& f : faces)
      for (int i = 0; i < 3; ++i) {
        if (f[i] == f[(i + 1) % 3]) return false;
        if (++directed[{f[i], f[(i + 1) % 3]}] > 1) return false;
      }
    for (const auto& [e, n] : directed)
      if (!directed.count({e.second, e.first})) return false;
    return !faces.empty();
  }

  /// Volume enclosed with the faces' orientation; positive when the normals
  /// given by the counterclockwise order point outwards.
  double signed_volume() const {
    double v = 0.0;
    for (const auto& f : faces)
      v += vertices[f[0]].dot(vertices[f[1]].cross(vertices[f[2]]));
    return v / 6.0;
  }
};

inline int mesh_profile_segments(int resolution) { return 4 * ((resolution + 3) / 4); }

inline double mesh_ring_angle(int j, int resolution) {
  return CylPoint::make(1.0, 2.0 * pi * j / resolution, 0.0).theta;
}

namespace detail {

inline void add_quad(Mesh& m, int a, int b, int c, int d) {
  m.faces.push_back({a, b, c});
  m.faces.push_back({a, c, d});
}

inline void orient_outward(Mesh& m) {
  if (m.signed_volume() < 0.0)
    for (auto& f : m.faces) std::swap(f[1], f[2]);
}

inline void push_vertex(Mesh& m, const CylPoint& u) {
  m.params.push_back(u);
  m.vertices.push_back(cyl_to_cart(u).vec());
}

}  // namespace detail

inline Mesh domain_mesh(double c, int resolution) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw Error(ErrorCode::OutOfRange, "domain_mesh: level must be >= 0");
  if (c == 0.0) throw Error(ErrorCode::DegenerateLevel, "domain_mesh: T_0 is the circle r = 1, z = 0");
  if (resolution < 16) throw Error(ErrorCode::OutOfRange, "domain_mesh: resolution must be >= 16");
  const int n = resolution;
  const int m = mesh_profile_segments(resolution);
  Mesh mesh;

  if (c < 1.0) {
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < m; ++i)
        detail::push_vertex(mesh, slice_param(c, mesh_ring_angle(j, n), static_cast<double>(i) / m));
    auto id = [&](int j, int i) { return (j % n) * m + (i % m); };
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < m; ++i) detail::add_quad(mesh, id(j, i), id(j + 1, i), id(j + 1, i + 1), id(j, i + 1));
    detail::orient_outward(mesh);
    return mesh;
  }

  // Profile from the bottom axis point through the outer corner to the top
  // axis point, m segments with m / 4 per side.
  const std::array<std::array<double, 2>, 5> keys{{{0.0, -(c - 1.0)}, {1.0, -c}, {1.0 + c, 0.0}, {1.0, c}, {0.0, c - 1.0}}};
  auto profile = [&](int i) {
    const int q = m / 4;
    const int side = std::min(i / q, 3);
    const double f = static_cast<double>(i - side * q) / q;
    return std::array<double, 2>{keys[side][0] + f * (keys[side + 1][0] - keys[side][0]),
                                 keys[side][1] + f * (keys[side + 1][1] - keys[side][1])};
  };
  for (int j = 0; j < n; ++j)
    for (int i = 1; i < m; ++i) {
      const auto rz = profile(i);
      detail::push_vertex(mesh, CylPoint::make(rz[0], mesh_ring_angle(j, n), rz[1]));
    }
  const int bottom = n * (m - 1);
  detail::push_vertex(mesh, CylPoint::make(0.0, 0.0, -(c - 1.0)));
  const int top = c > 1.0 ? bottom + 1 : bottom;
  if (c > 1.0) detail::push_vertex(mesh, CylPoint::make(0.0, 0.0, c - 1.0));

  auto id = [&](int j, int i) { return (j % n) * (m - 1) + (i - 1); };
  for (int j = 0; j < n; ++j) {
    mesh.faces.push_back({bottom, id(j + 1, 1), id(j, 1)});
    for (int i = 1; i + 1 < m; ++i) detail::add_quad(mesh, id(j, i), id(j + 1, i), id(j + 1, i + 1), id(j, i + 1));
    mesh.faces.push_back({top, id(j, m - 1), id(j + 1, m - 1)});
  }
  detail::orient_outward(mesh);
  return mesh;
}

/// Same connectivity, vertices moved by h. Faces keep the domain
/// orientation; image meshes are generally not embedded.
inline Mesh image_mesh(double c, int resolution) {
  Mesh mesh = domain_mesh(c, resolution);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) mesh.vertices[i] = eval(mesh.params[i]).vec();
  return mesh;
}

/// T_0 as a closed polyline of `resolution` vertices on r = 1, z = 0.
inline Mesh level_zero_polyline(int resolution, bool image) {
  if (resolution < 16) throw Error(ErrorCode::OutOfRange, "level_zero_polyline: resolution must be >= 16");
  Mesh mesh;
  std::vector<int> loop;
  for (int j = 0; j < resolution; ++j) {
    const CylPoint u = CylPoint::make(1.0, mesh_ring_angle(j, resolution), 0.0);
    detail::push_vertex(mesh, u);
    if (image) mesh.vertices.back() = eval(u).vec();
    loop.push_back(j);
  }
  loop.push_back(0);
  mesh.polylines.push_back(std::move(loop));
  return mesh;
}

/// Largest distance of a ring-0 (theta = 0) vertex from the first one.
inline double ring_spread(const Mesh& mesh, double theta = 0.0) {
  std::optional<Vec3> first;
  double spread = 0.0;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    if (mesh.params[i].theta != theta || mesh.params[i].r == 0.0) continue;
    if (!first) first = mesh.vertices[i];
    spread = std::max(spread, (mesh.vertices[i] - *first).norm());
  }
  return spread;
}

/// ASCII OBJ: `v` records, then 1-based `f` and `l` records.
inline void write_obj(const Mesh& mesh, const std::string& path, const std::string& name = "fdlab") {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing");
  std::fprintf(f, "o %s\n", name.c_str());
  for (const auto& v : mesh.vertices) std::fprintf(f, "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
  for (const auto& t : mesh.faces) std::fprintf(f, "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
  for (const auto& line : mesh.polylines) {
    std::fprintf(f, "l");
    for (int i : line) std::fprintf(f, " %d", i + 1);
    std::fprintf(f, "\n");
  }
  const bool bad = std::ferror(f) != 0;
  if (std::fclose(f) != 0 || bad) throw Error(ErrorCode::IoError, "failed writing '" + path + "'");
}

/// Minimal OBJ reader for `v`, `f` and `l` records (1-based, no slashes).
inline Mesh read_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  Mesh mesh;
  std::string tag;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      ls >> v.x() >> v.y() >> v.z();
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::array<int, 3> t{};
      ls >> t[0] >> t[1] >> t[2];
      for (int& i : t) --i;
      mesh.faces.push_back(t);
    } else if (tag == "l") {
      std::vector<int> poly;
      for (int i; ls >> i;) poly.push_back(i - 1);
      mesh.polylines.push_back(std::move(poly));
    }
  }
  return mesh;
}

}  // namespace fdlab
