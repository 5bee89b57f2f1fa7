#pragma once

#include "gcm/mesh.hpp"

#include <array>
#include <iosfwd>
#include <vector>

namespace gcm {

// One oriented triangle boundary: three directed edges forming a closed
// 3-cycle. `vertices[j]` is the tail of `edges[j]`, and the head of
// `edges[j]` is `vertices[(j+1)%3]`.
struct SurfaceCycle {
  std::int32_t id = 0;
  std::array<std::int32_t, 3> vertices{};
  std::array<EdgeId, 3> edges{};
};

// Position of a directed edge inside the collection: cycle index plus the
// slot (0..2) it occupies there.
struct EdgeSlot {
  std::int32_t cycle = -1;
  std::int32_t slot = -1;
};

// Two slots holding a directed edge and its reversed twin. `a` is the slot
// of the smaller edge id, so pairs are deterministic.
struct OppositePair {
  EdgeSlot a, b;
  EdgeId edge_a = kNoEdge, edge_b = kNoEdge;
};

// Decomposition of a shape graph into triangle boundary cycles. Every
// directed edge belongs to exactly one cycle; interior edges additionally
// appear in `opposite_pairs`, boundary edges in `boundary_edges`.
struct SurfaceCycleCollection {
  std::vector<SurfaceCycle> cycles;
  std::vector<OppositePair> opposite_pairs;
  std::vector<EdgeSlot> boundary_edges;
  std::vector<EdgeSlot> slot_of_edge;  // indexed by EdgeId

  std::int32_t cycle_count() const { return std::int32_t(cycles.size()); }
  // Total directed edges across all cycles (3 per cycle).
  std::int64_t edge_count() const { return 3 * std::int64_t(cycles.size()); }
};

// Splits a triangle-mesh shape graph into its face boundary cycles. Cycle i
// covers edges 3i, 3i+1, 3i+2 in slot order, matching the face ordering of
// the mesh the graph came from.
SurfaceCycleCollection decompose(const ShapeGraph& graph);

// Structural audit of a collection against its graph. Collects rather than
// throws so callers can report every problem at once.
struct CollectionReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Checks that cycles close up (head of each slot equals tail of the next),
// that every graph edge is covered exactly once, that paired slots hold
// mutually reversed edges, and that boundary edges are exactly the unpaired
// ones.
CollectionReport check_collection(const SurfaceCycleCollection& coll,
                                  const ShapeGraph& graph);

// Writes the collection as JSON (cycles, pairs, boundary) for debugging.
void dump_json(const SurfaceCycleCollection& coll, std::ostream& out);

}  // namespace gcm
