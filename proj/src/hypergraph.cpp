#include "gcm/hypergraph.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace gcm {

Eigen::VectorXd ConstraintSystem::rhs() const {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(row_count);
  for (std::int32_t r : rhs_rows) b[r] = 1.0;
  return b;
}

Eigen::SparseMatrix<double> ConstraintSystem::to_sparse() const {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(row_idx.size());
  for (std::int64_t c = 0; c < col_count; ++c)
    for (std::int64_t t = col_ptr[c]; t < col_ptr[c + 1]; ++t)
      trips.emplace_back(row_idx[t], c, double(values[t]));
  Eigen::SparseMatrix<double> m(row_count, col_count);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

namespace {

struct Entry {
  std::int32_t row;
  std::int8_t val;
};

void push_column(ConstraintSystem& sys, std::vector<Entry>& entries) {
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.row < b.row; });
  for (const Entry& e : entries) {
    sys.row_idx.push_back(e.row);
    sys.values.push_back(e.val);
  }
  sys.col_ptr.push_back(std::int64_t(sys.row_idx.size()));
  entries.clear();
}

}  // namespace

ConstraintSystem build_product_system(const SurfaceCycleCollection& coll,
                                      const ShapeGraph& target, int k) {
  if (k < 0 || k % 2 != 0)
    throw InvalidArgumentError("distortion budget must be even and >= 0, got " +
                               std::to_string(k));
  const std::int32_t n = coll.cycle_count();
  if (n == 0) throw InvalidArgumentError("source has no cycles");
  if (target.vertex_count <= 0)
    throw InvalidArgumentError("target has no vertices");

  const std::int64_t ne = 3 * std::int64_t(n);  // directed source edges
  std::vector<std::int32_t> pair_index(ne, -1);
  std::vector<char> pair_first(ne, 0);
  for (std::int32_t r = 0; r < std::int32_t(coll.opposite_pairs.size()); ++r) {
    const OppositePair& p = coll.opposite_pairs[r];
    if (p.edge_a < 0 || p.edge_a >= ne || p.edge_b < 0 || p.edge_b >= ne)
      throw InvalidArgumentError("opposite pair references edge out of range");
    pair_index[p.edge_a] = r;
    pair_first[p.edge_a] = 1;
    pair_index[p.edge_b] = r;
  }

  const std::int64_t tv = target.vertex_count;
  const std::int64_t te = target.edge_count();
  const std::int64_t text = target.extended_edge_count();
  const std::int64_t layers = k + 1;

  // Row offset of each extended target edge within one coupling block. An
  // edge with a twin shares one row with it; a twinless (boundary) edge
  // spends two single-entry rows pinning both sides of the pair to zero.
  std::vector<std::int64_t> pre(text + 1, 0);
  for (std::int64_t d = 0; d < text; ++d)
    pre[d + 1] = pre[d] + (ext_opposite(target, d) == kNoEdge ? 2 : 1);
  const std::int64_t block = pre[text];
  std::vector<std::int64_t> pre2(te + 1, 0);
  for (std::int64_t g = 0; g < te; ++g)
    pre2[g + 1] = pre2[g] + (target.opposite[EdgeId(g)] == kNoEdge ? 2 : 1);
  const std::int64_t block2 = pre2[te];

  ConstraintSystem sys;
  sys.k = k;
  sys.cycle_count = n;
  sys.target_vertices = std::int32_t(tv);
  sys.target_edges = te;
  sys.flow_rows = 3 * std::int64_t(n) * layers * tv;
  const std::int64_t p = std::int64_t(coll.opposite_pairs.size());
  const std::int64_t match_coupling = p * layers * block;
  const std::int64_t step_coupling = ne * (k / 2) * block2;
  sys.coupling_rows = match_coupling + step_coupling;
  sys.injectivity_rows = ne;
  sys.row_count = sys.flow_rows + sys.coupling_rows + sys.injectivity_rows;
  const std::int64_t couple_base = sys.flow_rows;
  const std::int64_t step_base = couple_base + match_coupling;
  const std::int64_t inj_base = couple_base + sys.coupling_rows;

  const std::int64_t cols_per_cycle = 3 * layers * text + 3 * k * te;
  sys.col_count = std::int64_t(n) * cols_per_cycle;
  sys.col_ptr.reserve(sys.col_count + 1);
  sys.col_ptr.push_back(0);
  sys.vars.reserve(sys.col_count);
  sys.row_idx.reserve(4 * sys.col_count);
  sys.values.reserve(4 * sys.col_count);
  sys.full_col_count = sys.col_count;

  // Flow row of (cycle i, slot a, layer l, target vertex y).
  auto flow_row = [&](std::int32_t i, int a, int l, std::int32_t y) {
    return std::int32_t((3 * std::int64_t(i) + a) * layers * tv +
                        std::int64_t(l) * tv + y);
  };

  std::vector<Entry> entries;
  for (std::int32_t i = 0; i < n; ++i) {
    const SurfaceCycle& cyc = coll.cycles[i];
    for (int a = 0; a < 3; ++a) {
      const EdgeId e = cyc.edges[a];
      if (e < 0 || e >= ne)
        throw InvalidArgumentError("cycle edge id out of range");
      for (int l = 0; l <= k; ++l)
        for (std::int64_t d = 0; d < text; ++d) {
          entries.push_back({flow_row(i, a, l, ext_tail(target, d)), -1});
          entries.push_back(
              {flow_row(i, (a + 1) % 3, 0, ext_head(target, d)), +1});
          if (pair_index[e] >= 0) {
            const std::int64_t base =
                couple_base +
                (std::int64_t(pair_index[e]) * layers + l) * block;
            const std::int64_t od = ext_opposite(target, d);
            if (pair_first[e])
              entries.push_back({std::int32_t(base + pre[d]), +1});
            else if (od != kNoEdge)
              entries.push_back({std::int32_t(base + pre[od]), -1});
            else
              entries.push_back({std::int32_t(base + pre[d] + 1), +1});
          }
          entries.push_back({std::int32_t(inj_base + e), +1});
          push_column(sys, entries);
          VariableMeta meta;
          meta.kind = ext_is_loop(target, d) ? VarKind::EdgeToVertex
                                             : VarKind::EdgeToEdge;
          meta.slot = std::int16_t(a);
          meta.layer = std::int16_t(l);
          meta.cycle = i;
          meta.x_edge = e;
          meta.x_tail = cyc.vertices[a];
          meta.x_head = cyc.vertices[(a + 1) % 3];
          meta.y_tail = ext_tail(target, d);
          meta.y_head = ext_head(target, d);
          meta.y_ext = d;
          sys.vars.push_back(meta);
        }
    }
    for (int a = 0; a < 3; ++a)
      for (int l = 0; l < k; ++l)
        for (std::int64_t g = 0; g < te; ++g) {
          entries.push_back({flow_row(i, a, l, target.tail(EdgeId(g))), -1});
          entries.push_back(
              {flow_row(i, a, l + 1, target.head(EdgeId(g))), +1});
          const std::int64_t base =
              step_base +
              ((3 * std::int64_t(i) + a) * (k / 2) + l / 2) * block2;
          const EdgeId og = target.opposite[EdgeId(g)];
          if (l % 2 == 0)
            entries.push_back({std::int32_t(base + pre2[g]), +1});
          else if (og != kNoEdge)
            entries.push_back({std::int32_t(base + pre2[og]), -1});
          else
            entries.push_back({std::int32_t(base + pre2[g] + 1), +1});
          push_column(sys, entries);
          VariableMeta meta;
          meta.kind = VarKind::VertexToEdge;
          meta.slot = std::int16_t(a);
          meta.layer = std::int16_t(l);
          meta.cycle = i;
          meta.x_edge = kNoEdge;
          meta.x_tail = cyc.vertices[a];
          meta.x_head = cyc.vertices[a];
          meta.y_tail = target.tail(EdgeId(g));
          meta.y_head = target.head(EdgeId(g));
          meta.y_ext = g;
          sys.vars.push_back(meta);
        }
  }

  sys.rhs_rows.resize(ne);
  for (std::int64_t e = 0; e < ne; ++e)
    sys.rhs_rows[e] = std::int32_t(inj_base + e);
  return sys;
}

ConstraintSystem reduce_system(const ConstraintSystem& full) {
  if (full.reduced)
    throw InvalidArgumentError("system is already reduced");
  const std::int64_t c_begin = full.flow_rows;
  const std::int64_t c_end = full.flow_rows + full.coupling_rows;

  // Columns tied by each coupling row. Every column meets at most one
  // coupling row by construction.
  std::vector<std::array<std::int64_t, 2>> row_cols(
      full.coupling_rows, {std::int64_t(-1), std::int64_t(-1)});
  std::vector<std::int64_t> couple_row_of(full.col_count, -1);
  for (std::int64_t c = 0; c < full.col_count; ++c)
    for (std::int64_t t = full.col_ptr[c]; t < full.col_ptr[c + 1]; ++t) {
      const std::int64_t r = full.row_idx[t];
      if (r < c_begin || r >= c_end) continue;
      if (couple_row_of[c] != -1)
        throw InvalidArgumentError(
            "column meets more than one coupling row; cannot reduce");
      couple_row_of[c] = r - c_begin;
      auto& rc = row_cols[r - c_begin];
      (rc[0] == -1 ? rc[0] : rc[1]) = c;
    }

  // partner[c]: column merged with c (-1: none), pinned[c]: fixed to zero.
  std::vector<std::int64_t> partner(full.col_count, -1);
  std::vector<char> pinned(full.col_count, 0);
  for (const auto& rc : row_cols) {
    if (rc[0] == -1) continue;  // all-zero coupling row (cannot happen)
    if (rc[1] == -1)
      pinned[rc[0]] = 1;
    else {
      partner[rc[0]] = rc[1];
      partner[rc[1]] = rc[0];
    }
  }

  ConstraintSystem red;
  red.k = full.k;
  red.cycle_count = full.cycle_count;
  red.target_vertices = full.target_vertices;
  red.target_edges = full.target_edges;
  red.reduced = true;
  red.full_col_count = full.col_count;
  red.vars = full.vars;
  red.flow_rows = full.flow_rows;
  red.coupling_rows = 0;
  red.injectivity_rows = full.injectivity_rows;
  red.row_count = full.flow_rows + full.injectivity_rows;
  red.merge_map.assign(full.col_count, -1);

  auto remap_row = [&](std::int64_t r) {
    return std::int32_t(r < c_begin ? r : r - full.coupling_rows);
  };

  std::vector<Entry> entries;
  red.col_ptr.push_back(0);
  for (std::int64_t c = 0; c < full.col_count; ++c) {
    if (pinned[c]) continue;
    if (partner[c] != -1 && partner[c] < c) {
      red.merge_map[c] = red.merge_map[partner[c]];
      continue;
    }
    entries.clear();
    for (std::int64_t src : {c, partner[c]}) {
      if (src == -1) continue;
      for (std::int64_t t = full.col_ptr[src]; t < full.col_ptr[src + 1]; ++t) {
        const std::int64_t r = full.row_idx[t];
        if (r >= c_begin && r < c_end) continue;
        entries.push_back({remap_row(r), full.values[t]});
      }
    }
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.row < b.row; });
    // Merge duplicates; opposite signs cancel (in-place step returns).
    std::int64_t out = 0;
    for (std::int64_t t = 0; t < std::int64_t(entries.size());) {
      std::int32_t v = 0;
      const std::int32_t row = entries[t].row;
      for (; t < std::int64_t(entries.size()) && entries[t].row == row; ++t)
        v += entries[t].val;
      if (v != 0) {
        if (v < -1 || v > 1)
          throw InvalidArgumentError("merged coefficient out of range");
        entries[out++] = {row, std::int8_t(v)};
      }
    }
    for (std::int64_t t = 0; t < out; ++t) {
      red.row_idx.push_back(entries[t].row);
      red.values.push_back(entries[t].val);
    }
    red.merge_map[c] = std::int32_t(red.col_ptr.size() - 1);
    red.col_ptr.push_back(std::int64_t(red.row_idx.size()));
  }
  red.col_count = std::int64_t(red.col_ptr.size()) - 1;

  red.rhs_rows.reserve(full.rhs_rows.size());
  for (std::int32_t r : full.rhs_rows) red.rhs_rows.push_back(remap_row(r));
  return red;
}

Eigen::VectorXd expand_solution(const Eigen::VectorXd& reduced_x,
                                const std::vector<std::int32_t>& merge_map) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(merge_map.size());
  for (std::int64_t c = 0; c < std::int64_t(merge_map.size()); ++c)
    if (merge_map[c] >= 0) {
      if (merge_map[c] >= reduced_x.size())
        throw InvalidArgumentError("merge map exceeds reduced solution size");
      x[c] = reduced_x[merge_map[c]];
    }
  return x;
}

Eigen::VectorXd residual(const ConstraintSystem& sys,
                         const Eigen::VectorXd& x) {
  if (x.size() != sys.col_count)
    throw InvalidArgumentError("solution size " + std::to_string(x.size()) +
                               " does not match column count " +
                               std::to_string(sys.col_count));
  Eigen::VectorXd r = -sys.rhs();
  for (std::int64_t c = 0; c < sys.col_count; ++c) {
    const double xc = x[c];
    if (xc == 0.0) continue;
    for (std::int64_t t = sys.col_ptr[c]; t < sys.col_ptr[c + 1]; ++t)
      r[sys.row_idx[t]] += double(sys.values[t]) * xc;
  }
  return r;
}

void export_system(const ConstraintSystem& sys,
                   const std::filesystem::path& stem) {
  {
    std::ofstream out(stem.string() + ".mtx");
    if (!out) throw Error("cannot open " + stem.string() + ".mtx");
    out << "%%MatrixMarket matrix coordinate integer general\n"
        << sys.row_count << ' ' << sys.col_count << ' ' << sys.nonzeros()
        << '\n';
    for (std::int64_t c = 0; c < sys.col_count; ++c)
      for (std::int64_t t = sys.col_ptr[c]; t < sys.col_ptr[c + 1]; ++t)
        out << (sys.row_idx[t] + 1) << ' ' << (c + 1) << ' '
            << int(sys.values[t]) << '\n';
    if (!out) throw Error("write to " + stem.string() + ".mtx failed");
  }
  {
    std::ofstream out(stem.string() + ".b.txt");
    if (!out) throw Error("cannot open " + stem.string() + ".b.txt");
    std::int64_t next = 0;
    std::vector<std::int32_t> ones(sys.rhs_rows.begin(), sys.rhs_rows.end());
    std::sort(ones.begin(), ones.end());
    for (std::int64_t r = 0; r < sys.row_count; ++r) {
      const bool one = next < std::int64_t(ones.size()) && ones[next] == r;
      if (one) ++next;
      out << (one ? 1 : 0) << '\n';
    }
    if (!out) throw Error("write to " + stem.string() + ".b.txt failed");
  }
  {
    nlohmann::json meta;
    meta["rows"] = sys.row_count;
    meta["cols"] = sys.col_count;
    meta["nonzeros"] = sys.nonzeros();
    meta["flow_rows"] = sys.flow_rows;
    meta["coupling_rows"] = sys.coupling_rows;
    meta["injectivity_rows"] = sys.injectivity_rows;
    meta["rhs_ones"] = sys.rhs_rows.size();
    meta["k"] = sys.k;
    meta["cycles"] = sys.cycle_count;
    meta["target_vertices"] = sys.target_vertices;
    meta["target_edges"] = sys.target_edges;
    meta["reduced"] = sys.reduced;
    meta["full_cols"] = sys.full_col_count;
    std::ofstream out(stem.string() + ".meta.json");
    if (!out) throw Error("cannot open " + stem.string() + ".meta.json");
    out << meta.dump(2) << '\n';
  }
}

}  // namespace gcm
