#pragma once

#include "gcm/mesh.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <vector>

namespace gcm {

// Ground truth lacks an entry for a matched source vertex.
class MissingGroundTruthError : public Error {
 public:
  using Error::Error;
};

// Shortest-path distances from source_vertex to every vertex of the mesh
// along its edge graph with Euclidean edge lengths (Dijkstra).
Eigen::VectorXd geodesic_distances(const TriMesh& mesh,
                                   std::int32_t source_vertex);

// Per-source-vertex geodesic error of a predicted map against ground truth,
// measured on the target mesh and normalised by sqrt(target surface area).
// Unmatched predictions (-1) yield NaN and are skipped by downstream
// aggregation; a matched prediction whose ground-truth entry is missing
// (index beyond the table or -1) throws MissingGroundTruthError.
Eigen::VectorXd geodesic_errors(const std::vector<std::int32_t>& predicted,
                                const std::vector<std::int32_t>& ground_truth,
                                const TriMesh& target);

// Fraction of finite errors at or below each threshold, as (threshold,
// fraction) pairs; thresholds are used as given.
std::vector<std::pair<double, double>> pck_curve(
    const Eigen::VectorXd& errors, const std::vector<double>& thresholds);

// Writes a PCK curve as CSV with a "threshold,fraction" header.
void write_pck_csv(const std::vector<std::pair<double, double>>& curve,
                   const std::filesystem::path& path);

// Smoothness of the map: sum over undirected source edges of the squared
// distance between the images of the edge's endpoints, with target
// coordinates scaled by 1/area(target). Under that scaling the identity map
// on the unit-edge regular tetrahedron scores exactly 2 (six edges, each
// contributing 1/3). Edges with an unmatched endpoint are skipped; constant
// maps score 0.
double dirichlet_energy(const std::vector<std::int32_t>& vertex_map,
                        const TriMesh& source, const TriMesh& target);

// Source connectivity with every vertex moved to the position of its match
// on the target; optional per-target-vertex colors travel along. Unmatched
// vertices keep their source position.
TriMesh transfer(const std::vector<std::int32_t>& vertex_map,
                 const TriMesh& source, const TriMesh& target,
                 const std::vector<std::array<std::uint8_t, 3>>&
                     target_colors = {});

}  // namespace gcm
