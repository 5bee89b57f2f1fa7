#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace gcm {

// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input file could not be parsed (bad header, malformed counts, short file).
class ParseError : public Error {
 public:
  using Error::Error;
};

// A function argument is outside its documented domain (e.g. odd distortion
// budget, negative counts, mismatched dimensions).
class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

// Mesh has an undirected edge shared by more than two faces.
class NonManifoldError : public Error {
 public:
  using Error::Error;
};

// Two adjacent faces traverse a shared edge in the same direction, i.e. the
// face windings disagree and no consistent orientation exists.
class OrientationError : public Error {
 public:
  using Error::Error;
};

// Mesh fails a structural requirement other than manifoldness/orientation
// (vertex index out of range, face with a repeated vertex, isolated vertex,
// more than one connected component, ...).
class InvalidMeshError : public Error {
 public:
  using Error::Error;
};

// Triangle mesh with vertices in rows of `vertices` and one CCW-ordered
// vertex triple per row of `faces`. Optional per-vertex RGB colors (used by
// the PLY writer when non-empty).
struct TriMesh {
  Eigen::MatrixX3d vertices;
  Eigen::MatrixX3i faces;
  std::vector<std::array<std::uint8_t, 3>> colors;

  Eigen::Index vertex_count() const { return vertices.rows(); }
  Eigen::Index face_count() const { return faces.rows(); }
};

enum class MeshFormat { Off, Ply, Auto };

// Loads a triangle mesh from OFF or ASCII-PLY. With MeshFormat::Auto the
// format is chosen by file extension (".off" / ".ply", case-insensitive).
// Throws ParseError on malformed input and InvalidMeshError when a face
// references a vertex out of range, repeats a vertex, or is not a triangle.
TriMesh load_mesh(const std::filesystem::path& path,
                  MeshFormat format = MeshFormat::Auto);

// Writes a mesh in the requested format (Auto picks by extension).
// Coordinates are written with 9 significant digits so that write/read
// round-trips are stable at double precision for test purposes.
void save_mesh(const TriMesh& mesh, const std::filesystem::path& path,
               MeshFormat format = MeshFormat::Auto);

// Total surface area (sum of triangle areas).
double surface_area(const TriMesh& mesh);

// Number of zero-area faces (collinear or coincident corners). Such faces
// are tolerated by validation but reported so callers can warn.
int degenerate_face_count(const TriMesh& mesh, double eps = 1e-12);

// Structural validation beyond per-face checks done at load time: rejects
// non-manifold edges (NonManifoldError), inconsistent winding
// (OrientationError), isolated vertices and multiple connected components
// (InvalidMeshError). Boundary edges are allowed.
void validate_mesh(const TriMesh& mesh);

using EdgeId = std::int32_t;
constexpr EdgeId kNoEdge = -1;

// Directed-halfedge view of an oriented triangle mesh. Each face contributes
// its three boundary edges in winding order, so edge 3*f + j runs from
// faces(f, j) to faces(f, (j+1)%3). `opposite[e]` is the reversed twin edge
// in the adjacent face, or kNoEdge on the boundary.
//
// The structure is deliberately independent of vertex positions so targets
// without geometry (e.g. a single free vertex) can be expressed directly.
struct ShapeGraph {
  std::int32_t vertex_count = 0;
  Eigen::MatrixX2i edges;            // row e = (tail, head)
  std::vector<EdgeId> opposite;      // twin edge or kNoEdge
  std::vector<std::vector<EdgeId>> out_edges;  // per tail vertex, ascending

  Eigen::Index edge_count() const { return edges.rows(); }
  // Edges plus one degenerate self-loop per vertex.
  Eigen::Index extended_edge_count() const {
    return edges.rows() + vertex_count;
  }
  std::int32_t tail(EdgeId e) const { return edges(e, 0); }
  std::int32_t head(EdgeId e) const { return edges(e, 1); }
  bool is_boundary(EdgeId e) const { return opposite[e] == kNoEdge; }
  int boundary_edge_count() const;
  // True iff some directed edge joins v and w in either direction.
  bool connected(std::int32_t v, std::int32_t w) const;
  // Directed edge from v to w, or kNoEdge.
  EdgeId find_edge(std::int32_t v, std::int32_t w) const;
};

// Builds the directed-halfedge graph of a validated mesh. Runs
// validate_mesh first; the same exceptions apply.
ShapeGraph build_shape_graph(const TriMesh& mesh);

// Graph with `vertex_count` vertices and no edges. Matching against such a
// target collapses every source vertex onto one target vertex.
ShapeGraph vertex_only_graph(std::int32_t vertex_count);

// V - E + F over undirected edges; 2 - 2g for closed orientable meshes.
int euler_characteristic(const TriMesh& mesh);

}  // namespace gcm
