#pragma once

#include "gcm/hypergraph.hpp"
#include "gcm/mesh.hpp"

#include <Eigen/Core>

#include <filesystem>

namespace gcm {

// Feature table row count does not match the mesh vertex count.
class RowCountMismatchError : public Error {
 public:
  using Error::Error;
};

// Feature table contains NaN or infinity.
class NonFiniteEntryError : public Error {
 public:
  using Error::Error;
};

// Two feature tables that must share a dimension do not.
class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

// One descriptor row per mesh vertex.
struct FeatureTable {
  Eigen::MatrixXd values;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index dim() const { return values.cols(); }
};

enum class FeatureNorm { L2, L1, Cosine };

// Parses "l2" / "l1" / "cosine" (case-insensitive).
FeatureNorm parse_feature_norm(const std::string& name);
std::string feature_norm_name(FeatureNorm norm);

// Distance between two descriptor rows under the chosen norm. Cosine is
// 1 - cos(angle): 0 for the zero vector against itself, 1 against anything
// else (a zero descriptor carries no direction).
double feature_distance(const Eigen::RowVectorXd& a,
                        const Eigen::RowVectorXd& b, FeatureNorm norm);

// Loads a per-vertex feature table and checks it against the mesh:
//   .csv            comma-separated, one row per vertex, no header
//   .bin / .f32     8-byte header (uint32 LE rows, uint32 LE dim) followed
//                   by rows*dim float32 LE values
//   anything else   whitespace-separated text, one row per line
// Throws RowCountMismatchError / NonFiniteEntryError / ParseError.
FeatureTable load_features(const std::filesystem::path& path,
                           const TriMesh& mesh);

// Raw vertex positions as a 3-column feature table. With `normalize` the
// positions are centered on their mean and scaled by 1/sqrt(surface area),
// making costs invariant under rigid motion plus global scaling.
FeatureTable xyz_features(const TriMesh& mesh, bool normalize = false);

// Per-source-vertex nearest neighbour in feature space (ties break to the
// lower target index). A cheap initial vertex map for warm starts.
std::vector<std::int32_t> nearest_vertex_map(const FeatureTable& fx,
                                             const FeatureTable& fy,
                                             FeatureNorm norm = FeatureNorm::L2);

// Cost of every column of the system: descriptor distance of the matched
// tail vertices plus that of the matched head vertices. Match columns pay
// for both source endpoints, collapse columns pay both endpoints against
// one target vertex, and distortion-step columns pay the held corner
// against both endpoints of the walked target edge. For a reduced system
// the cost of a merged column is the sum over its two pre-image columns.
// All costs are finite and non-negative.
Eigen::VectorXd compute_costs(const FeatureTable& fx, const FeatureTable& fy,
                              const ConstraintSystem& sys,
                              FeatureNorm norm = FeatureNorm::L2);

}  // namespace gcm
