#pragma once
// Structured P1 triangulations of the two benchmark domains.
//
// The grid has nx*ny rectangular cells, each split along the same diagonal
// (lower-left to upper-right) into two counterclockwise triangles. Boundary
// vertices carry the tags of every closed boundary segment they lie on, so
// corners carry two tags.
//
//   GraetzRect, [0,2]x[0,1]:         UnitSquare, [0,1]^2:
//     1: [0,1] x {0}                   1: {0} x [0,0.25]
//     2: [1,2] x {0}                   2: [0,1] x {0}
//     3: {2} x [0,1]                   3: {1} x [0,1]
//     4: [1,2] x {1}                   4: [0,1] x {1}
//     5: [0,1] x {1}                   5: {0} x [0.25,1]
//     6: {0} x [0,1]
//
// Observation regions (axis-aligned rectangles):
//   GraetzRect: [1,2]x[0,0.2] and [1,2]x[0.8,1]
//   UnitSquare: [0.25,1]x[0.75,1]

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace supgrom {

enum class Domain { GraetzRect, UnitSquare };

struct Rect {
  double x0_lo, x0_hi, x1_lo, x1_hi;
};

inline std::vector<Rect> observation_rectangles(Domain d) {
  if (d == Domain::GraetzRect) return {{1.0, 2.0, 0.0, 0.2}, {1.0, 2.0, 0.8, 1.0}};
  return {{0.25, 1.0, 0.75, 1.0}};
}

struct Mesh {
  Domain domain;
  int nx = 0, ny = 0;
  double x0_min = 0.0, x0_max = 0.0, x1_min = 0.0, x1_max = 0.0;
  std::vector<std::array<double, 2>> vertices;
  std::vector<std::array<int, 3>> triangles;  // counterclockwise
  std::vector<double> h;                      // longest edge per triangle
  std::vector<std::vector<int>> boundary_tags;  // per vertex, sorted; empty for interior

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_triangles() const { return static_cast<int>(triangles.size()); }
  int vertex_id(int ix, int iy) const { return iy * (nx + 1) + ix; }
  double dx() const { return (x0_max - x0_min) / nx; }
  double dy() const { return (x1_max - x1_min) / ny; }

  std::array<double, 2> centroid(int e) const {
    const auto& t = triangles[e];
    return {(vertices[t[0]][0] + vertices[t[1]][0] + vertices[t[2]][0]) / 3.0,
            (vertices[t[0]][1] + vertices[t[1]][1] + vertices[t[2]][1]) / 3.0};
  }

  double area(int e) const {
    const auto& t = triangles[e];
    const auto &a = vertices[t[0]], &b = vertices[t[1]], &c = vertices[t[2]];
    return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
  }
};

namespace detail {

inline bool on_segment_1d(double v, double lo, double hi) {
  const double tol = 1e-12;
  return v >= lo - tol && v <= hi + tol;
}

inline std::vector<int> boundary_tags_at(Domain d, double x0, double x1, double x0_max) {
  const double tol = 1e-12;
  std::vector<int> tags;
  if (d == Domain::GraetzRect) {
    if (std::abs(x1 - 0.0) < tol && on_segment_1d(x0, 0.0, 1.0)) tags.push_back(1);
    if (std::abs(x1 - 0.0) < tol && on_segment_1d(x0, 1.0, 2.0)) tags.push_back(2);
    if (std::abs(x0 - x0_max) < tol) tags.push_back(3);
    if (std::abs(x1 - 1.0) < tol && on_segment_1d(x0, 1.0, 2.0)) tags.push_back(4);
    if (std::abs(x1 - 1.0) < tol && on_segment_1d(x0, 0.0, 1.0)) tags.push_back(5);
    if (std::abs(x0 - 0.0) < tol) tags.push_back(6);
  } else {
    if (std::abs(x0 - 0.0) < tol && on_segment_1d(x1, 0.0, 0.25)) tags.push_back(1);
    if (std::abs(x1 - 0.0) < tol) tags.push_back(2);
    if (std::abs(x0 - 1.0) < tol) tags.push_back(3);
    if (std::abs(x1 - 1.0) < tol) tags.push_back(4);
    if (std::abs(x0 - 0.0) < tol && on_segment_1d(x1, 0.25, 1.0)) tags.push_back(5);
  }
  std::sort(tags.begin(), tags.end());
  return tags;
}

}  // namespace detail

inline Mesh build_structured_mesh(Domain domain, int nx, int ny) {
  if (nx < 1 || ny < 1)
    throw std::invalid_argument("build_structured_mesh: nx and ny must be at least 1");
  Mesh m;
  m.domain = domain;
  m.nx = nx;
  m.ny = ny;
  m.x0_min = 0.0;
  m.x0_max = domain == Domain::GraetzRect ? 2.0 : 1.0;
  m.x1_min = 0.0;
  m.x1_max = 1.0;
  m.vertices.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  m.boundary_tags.reserve(m.vertices.capacity());
  for (int iy = 0; iy <= ny; ++iy)
    for (int ix = 0; ix <= nx; ++ix) {
      double x0 = m.x0_min + ix * (m.x0_max - m.x0_min) / nx;
      double x1 = m.x1_min + iy * (m.x1_max - m.x1_min) / ny;
      m.vertices.push_back({x0, x1});
      m.boundary_tags.push_back(detail::boundary_tags_at(domain, x0, x1, m.x0_max));
    }
  const double diag = std::hypot(m.dx(), m.dy());
  m.triangles.reserve(2u * nx * ny);
  m.h.reserve(2u * nx * ny);
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      int v00 = m.vertex_id(ix, iy), v10 = m.vertex_id(ix + 1, iy);
      int v01 = m.vertex_id(ix, iy + 1), v11 = m.vertex_id(ix + 1, iy + 1);
      m.triangles.push_back({v00, v10, v11});
      m.triangles.push_back({v00, v11, v01});
      m.h.push_back(diag);  // the shared diagonal is the longest edge of both
      m.h.push_back(diag);
    }
  return m;
}

struct ObservationMask {
  std::vector<std::uint8_t> element;  // 1 where the closed triangle lies in the region
  int n_flagged = 0;
};

inline ObservationMask observation_mask(const Mesh& mesh) {
  const double tol = 1e-12;
  auto require_grid_line = [&](double c, double lo, double step, int count, const char* axis) {
    double t = (c - lo) / step;
    if (std::abs(t - std::round(t)) > 1e-9 || t < -1e-9 || t > count + 1e-9)
      throw std::invalid_argument("observation_mask: region boundary " + std::string(axis) + "=" +
                                  std::to_string(c) + " is not a mesh grid line (nx=" +
                                  std::to_string(mesh.nx) + ", ny=" + std::to_string(mesh.ny) +
                                  ")");
  };
  const std::vector<Rect> rects = observation_rectangles(mesh.domain);
  for (const Rect& r : rects) {
    require_grid_line(r.x0_lo, mesh.x0_min, mesh.dx(), mesh.nx, "x0");
    require_grid_line(r.x0_hi, mesh.x0_min, mesh.dx(), mesh.nx, "x0");
    require_grid_line(r.x1_lo, mesh.x1_min, mesh.dy(), mesh.ny, "x1");
    require_grid_line(r.x1_hi, mesh.x1_min, mesh.dy(), mesh.ny, "x1");
  }
  ObservationMask mask;
  mask.element.assign(mesh.n_triangles(), 0);
  for (int e = 0; e < mesh.n_triangles(); ++e) {
    for (const Rect& r : rects) {
      bool inside = true;
      for (int v : mesh.triangles[e]) {
        const auto& p = mesh.vertices[v];
        if (p[0] < r.x0_lo - tol || p[0] > r.x0_hi + tol || p[1] < r.x1_lo - tol ||
            p[1] > r.x1_hi + tol) {
          inside = false;
          break;
        }
      }
      if (inside) {
        mask.element[e] = 1;
        ++mask.n_flagged;
        break;
      }
    }
  }
  if (mask.n_flagged == 0)
    throw std::invalid_argument("observation_mask: no element lies inside the observation region");
  return mask;
}

inline double local_peclet(double advection_norm, double h_elem, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("local_peclet: diffusion must be positive");
  if (advection_norm < 0.0 || h_elem <= 0.0)
    throw std::invalid_argument("local_peclet: invalid advection norm or element size");
  return advection_norm * h_elem / (2.0 * eps);
}

}  // namespace supgrom
