#pragma once

// Shared fixtures for the test binaries: small procedurally built meshes,
// seeded random feature tables, and temp-file helpers. Everything here is
// deterministic so the suite produces identical results across runs.

#include "gcm/cost.hpp"
#include "gcm/mesh.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

namespace tu {

// Regular tetrahedron with unit edge length. Faces are wound consistently;
// surface area is sqrt(3).
inline gcm::TriMesh tetra() {
  gcm::TriMesh m;
  const double s3 = std::sqrt(3.0), s6 = std::sqrt(6.0);
  m.vertices.resize(4, 3);
  m.vertices << 0.0, 0.0, 0.0,
                1.0, 0.0, 0.0,
                0.5, s3 / 2.0, 0.0,
                0.5, s3 / 6.0, s6 / 3.0;
  m.faces.resize(4, 3);
  m.faces << 0, 1, 2,
             0, 2, 3,
             0, 3, 1,
             1, 3, 2;
  return m;
}

// One triangle in the z=0 plane: the smallest mesh with an all-boundary
// shape graph.
inline gcm::TriMesh triangle() {
  gcm::TriMesh m;
  m.vertices.resize(3, 3);
  m.vertices << 0, 0, 0,
                1, 0, 0,
                0, 1, 0;
  m.faces.resize(1, 3);
  m.faces << 0, 1, 2;
  return m;
}

// Unit square split into two triangles: one interior edge, four boundary
// edges, planar (z = 0).
inline gcm::TriMesh square() {
  gcm::TriMesh m;
  m.vertices.resize(4, 3);
  m.vertices << 0, 0, 0,
                1, 0, 0,
                1, 1, 0,
                0, 1, 0;
  m.faces.resize(2, 3);
  m.faces << 0, 1, 2,
             0, 2, 3;
  return m;
}

// Unit icosahedron (12 vertices, 20 faces, all vertices on the unit sphere).
inline gcm::TriMesh icosa() {
  gcm::TriMesh m;
  const double a = 0.5257311121191336, b = 0.8506508083520400;
  m.vertices.resize(12, 3);
  m.vertices << -a,  b,  0,
                 a,  b,  0,
                -a, -b,  0,
                 a, -b,  0,
                 0, -a,  b,
                 0,  a,  b,
                 0, -a, -b,
                 0,  a, -b,
                 b,  0, -a,
                 b,  0,  a,
                -b,  0, -a,
                -b,  0,  a;
  m.faces.resize(20, 3);
  m.faces <<  0, 11,  5,
              0,  5,  1,
              0,  1,  7,
              0,  7, 10,
              0, 10, 11,
              1,  5,  9,
              5, 11,  4,
             11, 10,  2,
             10,  7,  6,
              7,  1,  8,
              3,  9,  4,
              3,  4,  2,
              3,  2,  6,
              3,  6,  8,
              3,  8,  9,
              4,  9,  5,
              2,  4, 11,
              6,  2, 10,
              8,  6,  7,
              9,  8,  1;
  return m;
}

// 60-face sphere: every icosahedron face split at its centroid (projected
// back to the unit sphere). 32 vertices, 60 faces.
inline gcm::TriMesh sphere60() {
  const gcm::TriMesh ico = icosa();
  gcm::TriMesh m;
  m.vertices.resize(32, 3);
  m.vertices.topRows(12) = ico.vertices;
  m.faces.resize(60, 3);
  for (int f = 0; f < 20; ++f) {
    const int a = ico.faces(f, 0), b = ico.faces(f, 1), c = ico.faces(f, 2);
    Eigen::RowVector3d mid = (ico.vertices.row(a) + ico.vertices.row(b) +
                              ico.vertices.row(c)) / 3.0;
    mid /= mid.norm();
    const int v = 12 + f;
    m.vertices.row(v) = mid;
    m.faces.row(3 * f + 0) << a, b, v;
    m.faces.row(3 * f + 1) << b, c, v;
    m.faces.row(3 * f + 2) << c, a, v;
  }
  return m;
}

// Latitude/longitude sphere: poles plus (stacks-1) rings of `slices`
// vertices. uv_sphere(11, 10) has 102 vertices and 200 faces.
inline gcm::TriMesh uv_sphere(int stacks, int slices) {
  const double pi = 3.14159265358979323846;
  gcm::TriMesh m;
  const int nv = 2 + (stacks - 1) * slices;
  m.vertices.resize(nv, 3);
  m.vertices.row(0) << 0, 0, 1;
  for (int i = 1; i < stacks; ++i) {
    const double theta = pi * i / stacks;
    for (int j = 0; j < slices; ++j) {
      const double phi = 2.0 * pi * j / slices;
      m.vertices.row(1 + (i - 1) * slices + j)
          << std::sin(theta) * std::cos(phi),
             std::sin(theta) * std::sin(phi), std::cos(theta);
    }
  }
  const int south = nv - 1;
  m.vertices.row(south) << 0, 0, -1;

  const int nf = 2 * slices + (stacks - 2) * slices * 2;
  m.faces.resize(nf, 3);
  int f = 0;
  for (int j = 0; j < slices; ++j)
    m.faces.row(f++) << 0, 1 + j, 1 + (j + 1) % slices;
  for (int i = 1; i < stacks - 1; ++i) {
    const int u = 1 + (i - 1) * slices, l = 1 + i * slices;
    for (int j = 0; j < slices; ++j) {
      const int jn = (j + 1) % slices;
      m.faces.row(f++) << u + j, l + j, l + jn;
      m.faces.row(f++) << u + j, l + jn, u + jn;
    }
  }
  const int base = 1 + (stacks - 2) * slices;
  for (int j = 0; j < slices; ++j)
    m.faces.row(f++) << south, base + (j + 1) % slices, base + j;
  return m;
}

// Copy of a mesh with every coordinate shifted by an independent uniform
// draw from [-eps, eps].
inline gcm::TriMesh perturbed(const gcm::TriMesh& mesh, double eps,
                              std::uint32_t seed) {
  gcm::TriMesh out = mesh;
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> noise(-eps, eps);
  for (Eigen::Index i = 0; i < out.vertex_count(); ++i)
    for (int c = 0; c < 3; ++c) out.vertices(i, c) += noise(rng);
  return out;
}

// Mesh with the listed faces removed (vertex table untouched). The caller
// is responsible for keeping every vertex covered.
inline gcm::TriMesh drop_faces(const gcm::TriMesh& mesh,
                               const std::vector<int>& drop) {
  std::vector<char> gone(mesh.face_count(), 0);
  for (int f : drop) gone[f] = 1;
  gcm::TriMesh out;
  out.vertices = mesh.vertices;
  out.faces.resize(mesh.face_count() - std::int64_t(drop.size()), 3);
  Eigen::Index w = 0;
  for (Eigen::Index f = 0; f < mesh.face_count(); ++f)
    if (!gone[f]) out.faces.row(w++) = mesh.faces.row(f);
  return out;
}

// Feature table of independent uniform draws from [-1, 1].
inline gcm::FeatureTable random_features(Eigen::Index rows, Eigen::Index dim,
                                         std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  gcm::FeatureTable t;
  t.values.resize(rows, dim);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) t.values(i, j) = u(rng);
  return t;
}

inline std::vector<std::int32_t> identity_map(std::int32_t n) {
  std::vector<std::int32_t> phi(n);
  for (std::int32_t i = 0; i < n; ++i) phi[i] = i;
  return phi;
}

// Unique per-process scratch directory, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("gcm_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path file(const std::string& name) const {
    return path / name;
  }
};

}  // namespace tu
