#include "gcm/matching.hpp"

#include "gcm/solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace gcm {

ConsistencyReport verify_consistency(
    const std::vector<std::int32_t>& vertex_map, const ShapeGraph& source,
    const ShapeGraph& target) {
  if (std::int64_t(vertex_map.size()) != source.vertex_count)
    throw InvalidArgumentError("vertex map has " +
                               std::to_string(vertex_map.size()) +
                               " entries for " +
                               std::to_string(source.vertex_count) +
                               " source vertices");
  ConsistencyReport report;
  for (EdgeId e = 0; e < source.edge_count(); ++e) {
    const std::int32_t xt = source.tail(e), xh = source.head(e);
    const std::int32_t yt = vertex_map[xt], yh = vertex_map[xh];
    if (yt < 0 || yh < 0) continue;  // unmatched endpoints are not checked
    ++report.checked_edges;
    if (yt == yh) continue;
    if (yt >= target.vertex_count || yh >= target.vertex_count ||
        !target.connected(yt, yh))
      report.violations.push_back({e, xt, xh, yt, yh});
  }
  return report;
}

Matching decode(const Eigen::VectorXd& x, const ConstraintSystem& full_sys,
                const ShapeGraph& source, const ShapeGraph& target) {
  if (full_sys.reduced)
    throw InvalidArgumentError(
        "decode needs the full system; expand the solution first");
  if (x.size() != full_sys.col_count)
    throw InvalidArgumentError("solution size does not match column count");

  double max_frac = 0.0;
  for (std::int64_t j = 0; j < x.size(); ++j)
    max_frac = std::max(max_frac, std::abs(x[j] - std::round(x[j])));
  if (max_frac > kIntegralityTol)
    throw DecodeError("solution is not integral (max fractionality " +
                      std::to_string(max_frac) + ")");

  // Exact feasibility of the rounded solution, in integer arithmetic.
  std::vector<std::int64_t> res(full_sys.row_count, 0);
  std::vector<char> xi(full_sys.col_count, 0);
  for (std::int64_t j = 0; j < full_sys.col_count; ++j) {
    const long r = std::lround(x[j]);
    if (r != 0 && r != 1)
      throw DecodeError("rounded solution entry " + std::to_string(r) +
                        " at column " + std::to_string(j) +
                        " is outside {0, 1}");
    xi[j] = char(r);
    if (r)
      for (std::int64_t t = full_sys.col_ptr[j]; t < full_sys.col_ptr[j + 1];
           ++t)
        res[full_sys.row_idx[t]] += full_sys.values[t];
  }
  for (std::int32_t r : full_sys.rhs_rows) res[r] -= 1;
  for (std::int64_t r = 0; r < full_sys.row_count; ++r)
    if (res[r] != 0)
      throw DecodeError("rounded solution violates row " + std::to_string(r) +
                        " by " + std::to_string(res[r]));

  Matching m;
  m.vertex_map.assign(source.vertex_count, -1);
  auto assign = [&](std::int32_t xv, std::int32_t yv) {
    if (xv < 0 || xv >= source.vertex_count)
      throw DecodeError("column references source vertex out of range");
    if (m.vertex_map[xv] == -1)
      m.vertex_map[xv] = yv;
    else if (m.vertex_map[xv] != yv)
      throw DecodeError("inconsistent vertex map: source vertex " +
                        std::to_string(xv) + " matched to both " +
                        std::to_string(m.vertex_map[xv]) + " and " +
                        std::to_string(yv));
  };

  bool any = false;
  for (std::int64_t j = 0; j < full_sys.col_count; ++j) {
    if (!xi[j]) continue;
    const VariableMeta& meta = full_sys.vars[j];
    if (meta.kind == VarKind::VertexToEdge) {
      ++m.distortion_steps;
      continue;
    }
    any = true;
    assign(meta.x_tail, meta.y_tail);
    assign(meta.x_head, meta.y_head);
    m.edge_matches.push_back({meta.x_edge, meta.y_tail, meta.y_head});
  }
  if (!any) throw DecodeError("solution has no active match columns");
  std::sort(m.edge_matches.begin(), m.edge_matches.end(),
            [](const Matching::EdgeMatch& a, const Matching::EdgeMatch& b) {
              return a.x_edge < b.x_edge;
            });

  m.certificate = verify_consistency(m.vertex_map, source, target);

  std::map<std::int32_t, std::int64_t> popularity;
  std::int64_t matched = 0;
  for (std::int32_t y : m.vertex_map)
    if (y >= 0) {
      ++matched;
      ++popularity[y];
    }
  std::int64_t top = 0;
  for (const auto& [y, count] : popularity) top = std::max(top, count);
  m.collapse_fraction = matched ? double(top) / double(matched) : 0.0;
  return m;
}

std::vector<std::int64_t> encode_vertex_map(
    const std::vector<std::int32_t>& vertex_map,
    const ConstraintSystem& full_sys, const ShapeGraph& source,
    const ShapeGraph& target) {
  if (full_sys.reduced)
    throw InvalidArgumentError(
        "encode needs the full system; map the columns afterwards");
  if (std::int64_t(vertex_map.size()) != source.vertex_count)
    throw InvalidArgumentError("vertex map has " +
                               std::to_string(vertex_map.size()) +
                               " entries for " +
                               std::to_string(source.vertex_count) +
                               " source vertices");
  for (std::int32_t y : vertex_map)
    if (y >= target.vertex_count)
      throw InvalidArgumentError("vertex map references target vertex " +
                                 std::to_string(y) + " out of range");

  const std::int64_t ext = target.extended_edge_count();
  std::vector<std::int64_t> col_of(source.edge_count() * ext, -1);
  for (std::int64_t c = 0; c < full_sys.col_count; ++c) {
    const VariableMeta& m = full_sys.vars[c];
    if (m.layer == 0 && m.kind != VarKind::VertexToEdge)
      col_of[m.x_edge * ext + m.y_ext] = c;
  }
  std::vector<std::int64_t> cols;
  cols.reserve(source.edge_count());
  for (EdgeId e = 0; e < source.edge_count(); ++e) {
    const std::int32_t u = vertex_map[source.tail(e)];
    const std::int32_t v = vertex_map[source.head(e)];
    if (u < 0 || v < 0) return {};
    std::int64_t d;
    if (u == v) {
      d = target.edge_count() + u;
    } else {
      const EdgeId t = target.find_edge(u, v);
      if (t == kNoEdge || target.is_boundary(t)) return {};
      d = t;
    }
    const std::int64_t c = col_of[e * ext + d];
    if (c < 0) return {};
    cols.push_back(c);
  }
  return cols;
}

OracleResult oracle_enumerate(const ShapeGraph& source,
                              const ShapeGraph& target,
                              const FeatureTable& fx, const FeatureTable& fy,
                              FeatureNorm norm, std::int64_t max_maps) {
  const std::int32_t nx = source.vertex_count;
  const std::int32_t ny = target.vertex_count;
  if (nx <= 0 || ny <= 0)
    throw InvalidArgumentError("oracle needs non-empty vertex sets");
  if (fx.rows() != nx || fy.rows() != ny)
    throw RowCountMismatchError("feature tables do not match vertex counts");
  if (fx.dim() != fy.dim())
    throw DimensionMismatchError("feature dimensions differ");

  double total = 1.0;
  for (std::int32_t i = 0; i < nx; ++i) {
    total *= double(ny);
    if (total > double(max_maps))
      throw InvalidArgumentError(
          "oracle search space " + std::to_string(ny) + "^" +
          std::to_string(nx) + " exceeds the limit of " +
          std::to_string(max_maps) + " maps");
  }

  Eigen::MatrixXd dist(nx, ny);
  for (std::int32_t i = 0; i < nx; ++i)
    for (std::int32_t j = 0; j < ny; ++j)
      dist(i, j) = feature_distance(fx.values.row(i), fy.values.row(j), norm);

  OracleResult result;
  result.min_cost = std::numeric_limits<double>::infinity();
  std::vector<std::int32_t> phi(nx, 0);
  while (true) {
    ++result.maps_scored;
    bool consistent = true;
    for (EdgeId e = 0; e < source.edge_count() && consistent; ++e) {
      const std::int32_t yt = phi[source.tail(e)], yh = phi[source.head(e)];
      if (yt != yh && !target.connected(yt, yh)) consistent = false;
    }
    if (consistent) {
      ++result.maps_consistent;
      double cost = 0.0;
      for (EdgeId e = 0; e < source.edge_count(); ++e)
        cost += dist(source.tail(e), phi[source.tail(e)]) +
                dist(source.head(e), phi[source.head(e)]);
      if (cost < result.min_cost) {
        result.min_cost = cost;
        result.argmin = phi;
      }
    }
    // next map in lexicographic order
    std::int32_t i = 0;
    while (i < nx && ++phi[i] == ny) phi[i++] = 0;
    if (i == nx) break;
  }
  return result;
}

void write_correspondence(const std::filesystem::path& path,
                          const std::vector<std::int32_t>& vertex_map) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (std::size_t i = 0; i < vertex_map.size(); ++i)
    out << i << ' ' << vertex_map[i] << '\n';
  if (!out) throw Error("write to " + path.string() + " failed");
}

std::vector<std::int32_t> read_correspondence(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::map<std::int64_t, std::int32_t> entries;
  std::string line;
  std::int64_t max_idx = -1;
  while (std::getline(in, line)) {
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    std::istringstream row(line);
    std::int64_t src;
    std::int64_t tgt;
    if (!(row >> src)) continue;  // blank line
    if (!(row >> tgt))
      throw ParseError(path.string() + ": malformed correspondence line '" +
                       line + "'");
    if (src < 0)
      throw ParseError(path.string() + ": negative source index " +
                       std::to_string(src));
    if (entries.count(src))
      throw ParseError(path.string() + ": duplicate source index " +
                       std::to_string(src));
    entries[src] = std::int32_t(tgt < 0 ? -1 : tgt);
    max_idx = std::max(max_idx, src);
  }
  if (max_idx < 0) throw ParseError(path.string() + ": no correspondences");
  std::vector<std::int32_t> map(max_idx + 1, -1);
  for (const auto& [src, tgt] : entries) map[src] = tgt;
  return map;
}

}  // namespace gcm
