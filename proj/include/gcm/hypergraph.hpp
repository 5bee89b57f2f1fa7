#pragma once

#include "gcm/cycles.hpp"
#include "gcm/mesh.hpp"

#include <Eigen/SparseCore>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace gcm {

// Extended edge set of a target graph: the real directed edges first, then
// one degenerate self-loop per vertex. Extended id d is a real edge when
// d < graph.edge_count(), otherwise the loop at vertex d - edge_count.
inline bool ext_is_loop(const ShapeGraph& g, std::int64_t d) {
  return d >= g.edge_count();
}
inline std::int32_t ext_tail(const ShapeGraph& g, std::int64_t d) {
  return ext_is_loop(g, d) ? std::int32_t(d - g.edge_count())
                           : g.tail(EdgeId(d));
}
inline std::int32_t ext_head(const ShapeGraph& g, std::int64_t d) {
  return ext_is_loop(g, d) ? std::int32_t(d - g.edge_count())
                           : g.head(EdgeId(d));
}
// Reversed extended edge: twin for real edges (kNoEdge on target boundary),
// the loop itself for loops.
inline std::int64_t ext_opposite(const ShapeGraph& g, std::int64_t d) {
  if (ext_is_loop(g, d)) return d;
  const EdgeId o = g.opposite[EdgeId(d)];
  return o == kNoEdge ? std::int64_t(kNoEdge) : std::int64_t(o);
}

enum class VarKind : std::uint8_t {
  EdgeToEdge,    // source edge matched to a real target edge
  EdgeToVertex,  // source edge collapsed onto a target vertex (self-loop)
  VertexToEdge,  // source vertex held while stepping along a target edge
};

// Bookkeeping for one column of the full system. EdgeToEdge/EdgeToVertex
// columns carry a source edge and the extended target edge it matches;
// VertexToEdge ("distortion") columns carry the held source corner and the
// real target edge walked. `layer` is the duplicate level the column leaves
// from (0..k for matches, 0..k-1 for distortion steps).
struct VariableMeta {
  VarKind kind = VarKind::EdgeToEdge;
  std::int16_t slot = 0;
  std::int16_t layer = 0;
  std::int32_t cycle = 0;
  EdgeId x_edge = kNoEdge;       // kNoEdge for VertexToEdge
  std::int32_t x_tail = -1, x_head = -1;  // equal for VertexToEdge
  std::int32_t y_tail = -1, y_head = -1;  // equal for EdgeToVertex
  std::int64_t y_ext = -1;       // extended id (matches) or real edge (steps)
};

enum class RowKind { Flow, Coupling, Injectivity };

// Sparse 0/±1 equality system H x = b in compressed-sparse-column form.
// Rows are ordered flow conservation first, then coupling, then one
// injectivity row per directed source edge; b is 1 exactly on the
// injectivity rows.
struct ConstraintSystem {
  std::int64_t row_count = 0;
  std::int64_t col_count = 0;
  std::vector<std::int64_t> col_ptr;   // size col_count + 1
  std::vector<std::int32_t> row_idx;   // ascending within each column
  std::vector<std::int8_t> values;     // each +1 or -1

  std::int64_t flow_rows = 0;
  std::int64_t coupling_rows = 0;
  std::int64_t injectivity_rows = 0;
  std::vector<std::int32_t> rhs_rows;  // rows where b = 1, ascending

  int k = 0;                     // distortion budget the system was built with
  std::int32_t cycle_count = 0;
  std::int32_t target_vertices = 0;
  std::int64_t target_edges = 0;

  // Column bookkeeping. For a full system vars[j] describes column j. For a
  // reduced system vars still describes the columns of the *full* system it
  // came from and merge_map[j] gives the reduced column of full column j
  // (or -1 when the column was fixed to zero).
  std::vector<VariableMeta> vars;
  bool reduced = false;
  std::int64_t full_col_count = 0;     // == col_count when !reduced
  std::vector<std::int32_t> merge_map;

  std::int64_t nonzeros() const { return std::int64_t(row_idx.size()); }
  RowKind row_kind(std::int64_t row) const {
    if (row < flow_rows) return RowKind::Flow;
    if (row < flow_rows + coupling_rows) return RowKind::Coupling;
    return RowKind::Injectivity;
  }
  Eigen::VectorXd rhs() const;
  Eigen::SparseMatrix<double> to_sparse() const;
};

// Assembles the full constraint system for matching the cycles of a source
// graph into a target graph with distortion budget k (even, >= 0).
//
// Columns, grouped per source cycle: for each corner slot a and each
// departure layer l in 0..k, one match column per extended target edge;
// then, when k > 0, for each slot a and layer l in 0..k-1 one distortion
// column per real target edge. Match columns always land on layer 0 of the
// next slot; distortion columns climb one layer in place.
//
// Rows: flow conservation over (cycle, slot, layer, target vertex); coupling
// that ties every interior source edge to its twin (same layer, reversed
// target edge) and every outbound distortion step to an immediate return
// step; injectivity summing the match columns of each directed source edge
// to 1. Target edges without a twin (target boundary) cannot be coupled, so
// the columns that would need them are pinned to zero by single-entry rows.
ConstraintSystem build_product_system(const SurfaceCycleCollection& coll,
                                      const ShapeGraph& target, int k);

// Eliminates every coupling row by identifying the two columns it ties
// together (their entries add; opposite-signed overlaps cancel) and dropping
// pinned columns. Roughly halves the system for closed meshes. The result
// keeps merge_map / vars so solutions and costs can be mapped back.
ConstraintSystem reduce_system(const ConstraintSystem& full);

// Lifts a reduced solution back to full coordinates: full x[j] is the value
// of merged column merge_map[j], or 0 for pinned columns.
Eigen::VectorXd expand_solution(const Eigen::VectorXd& reduced_x,
                                const std::vector<std::int32_t>& merge_map);

// Dense residual H x - b.
Eigen::VectorXd residual(const ConstraintSystem& sys, const Eigen::VectorXd& x);

// Writes <stem>.mtx (Matrix Market coordinate integer), <stem>.b.txt (dense
// right-hand side, one value per line) and <stem>.meta.json (dimensions and
// row-block sizes).
void export_system(const ConstraintSystem& sys,
                   const std::filesystem::path& stem);

}  // namespace gcm
