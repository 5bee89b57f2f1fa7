#pragma once

#include "gcm/cost.hpp"
#include "gcm/hypergraph.hpp"
#include "gcm/mesh.hpp"

#include <filesystem>
#include <vector>

namespace gcm {

// A solution decodes to contradictory vertex assignments (one source vertex
// matched to two different target vertices) or has a broken structure
// (non-integral, infeasible, or no active match columns).
class DecodeError : public Error {
 public:
  using Error::Error;
};

// Result of checking a vertex map: every directed source edge whose matched
// endpoints are neither equal nor joined by a target edge is listed.
struct ConsistencyReport {
  struct Violation {
    EdgeId x_edge;
    std::int32_t x_tail, x_head;
    std::int32_t y_tail, y_head;
  };
  std::vector<Violation> violations;
  std::int64_t checked_edges = 0;
  bool ok() const { return violations.empty(); }
};

// Checks that vertex_map sends connected source vertices to connected or
// identical target vertices (the geometric-consistency certificate).
// Entries of -1 are unmatched and skipped.
ConsistencyReport verify_consistency(const std::vector<std::int32_t>& vertex_map,
                                     const ShapeGraph& source,
                                     const ShapeGraph& target);

struct Matching {
  // Target vertex of each source vertex, -1 when unmatched.
  std::vector<std::int32_t> vertex_map;
  struct EdgeMatch {
    EdgeId x_edge;
    std::int32_t y_tail, y_head;  // equal when the edge collapses
  };
  std::vector<EdgeMatch> edge_matches;  // one per active source edge
  ConsistencyReport certificate;
  // Fraction of matched source vertices sharing the most popular target.
  double collapse_fraction = 0.0;
  // Number of active distortion-step columns in the solution.
  std::int64_t distortion_steps = 0;
};

// Reads a 0/1 solution of the *full* system back into a vertex map and edge
// matches, then verifies the certificate. Requirements checked up front:
// x integral within kIntegralityTol, rounded x satisfies H x = b exactly
// (integer arithmetic), at least one active match column. Reduced solutions
// must be expanded with expand_solution first.
Matching decode(const Eigen::VectorXd& x, const ConstraintSystem& full_sys,
                const ShapeGraph& source, const ShapeGraph& target);

// Inverse of decode for exact vertex maps: the layer-0 match columns of the
// full system realising `vertex_map`, one per directed source edge. Returns
// an empty vector when the map cannot be realised exactly: an endpoint is
// unmatched (-1), an edge image is absent from the target, or the image lies
// on the target boundary where the twin-coupling rows pin the column to
// zero. The result is a feasible 0/1 point of the system and doubles as a
// solver warm start (LpProblem::warm_at_one).
std::vector<std::int64_t> encode_vertex_map(
    const std::vector<std::int32_t>& vertex_map,
    const ConstraintSystem& full_sys, const ShapeGraph& source,
    const ShapeGraph& target);

// Exhaustive baseline for small instances: scores every vertex map
// target^source, keeps geometrically consistent ones, and returns the
// minimum total cost (sum over directed source edges of the tail and head
// descriptor distances, i.e. the same objective the LP optimises at k = 0).
struct OracleResult {
  double min_cost = 0.0;
  std::vector<std::int32_t> argmin;
  std::int64_t maps_scored = 0;
  std::int64_t maps_consistent = 0;
};

// Throws InvalidArgumentError when target^source exceeds max_maps.
OracleResult oracle_enumerate(const ShapeGraph& source,
                              const ShapeGraph& target,
                              const FeatureTable& fx, const FeatureTable& fy,
                              FeatureNorm norm = FeatureNorm::L2,
                              std::int64_t max_maps = 10'000'000);

// Correspondence file: one "source_index target_index" pair per line,
// target -1 for unmatched. Doubles as the ground-truth format.
void write_correspondence(const std::filesystem::path& path,
                          const std::vector<std::int32_t>& vertex_map);
std::vector<std::int32_t> read_correspondence(
    const std::filesystem::path& path);

}  // namespace gcm
