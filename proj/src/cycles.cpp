#include "gcm/cycles.hpp"

#include <json.hpp>

#include <ostream>
#include <set>

namespace gcm {

SurfaceCycleCollection decompose(const ShapeGraph& graph) {
  if (graph.edge_count() % 3 != 0)
    throw InvalidMeshError("shape graph edge count " +
                           std::to_string(graph.edge_count()) +
                           " is not a multiple of 3");
  SurfaceCycleCollection coll;
  const std::int32_t n = std::int32_t(graph.edge_count() / 3);
  coll.cycles.resize(n);
  coll.slot_of_edge.resize(graph.edge_count());
  for (std::int32_t i = 0; i < n; ++i) {
    SurfaceCycle& cyc = coll.cycles[i];
    cyc.id = i;
    for (std::int32_t j = 0; j < 3; ++j) {
      const EdgeId e = 3 * i + j;
      cyc.edges[j] = e;
      cyc.vertices[j] = graph.tail(e);
      coll.slot_of_edge[e] = {i, j};
    }
    for (int j = 0; j < 3; ++j)
      if (graph.head(cyc.edges[j]) != cyc.vertices[(j + 1) % 3])
        throw InvalidMeshError("edges of face " + std::to_string(i) +
                               " do not form a closed cycle");
  }
  for (EdgeId e = 0; e < graph.edge_count(); ++e) {
    const EdgeId o = graph.opposite[e];
    if (o == kNoEdge)
      coll.boundary_edges.push_back(coll.slot_of_edge[e]);
    else if (e < o)
      coll.opposite_pairs.push_back(
          {coll.slot_of_edge[e], coll.slot_of_edge[o], e, o});
  }
  return coll;
}

CollectionReport check_collection(const SurfaceCycleCollection& coll,
                                  const ShapeGraph& graph) {
  CollectionReport report;
  auto complain = [&report](std::string msg) {
    report.violations.push_back(std::move(msg));
  };

  std::vector<int> covered(graph.edge_count(), 0);
  for (const SurfaceCycle& cyc : coll.cycles) {
    for (int j = 0; j < 3; ++j) {
      const EdgeId e = cyc.edges[j];
      if (e < 0 || e >= graph.edge_count()) {
        complain("cycle " + std::to_string(cyc.id) + " slot " +
                 std::to_string(j) + " holds edge " + std::to_string(e) +
                 " out of range");
        continue;
      }
      ++covered[e];
      if (graph.tail(e) != cyc.vertices[j] ||
          graph.head(e) != cyc.vertices[(j + 1) % 3])
        complain("cycle " + std::to_string(cyc.id) + " slot " +
                 std::to_string(j) + " breaks the cycle: edge " +
                 std::to_string(e) + " runs (" + std::to_string(graph.tail(e)) +
                 " -> " + std::to_string(graph.head(e)) + "), expected (" +
                 std::to_string(cyc.vertices[j]) + " -> " +
                 std::to_string(cyc.vertices[(j + 1) % 3]) + ")");
    }
  }
  for (EdgeId e = 0; e < graph.edge_count(); ++e)
    if (covered[e] != 1)
      complain("edge " + std::to_string(e) + " is covered " +
               std::to_string(covered[e]) + " times, expected once");

  auto edge_at = [&coll](const EdgeSlot& s) -> EdgeId {
    if (s.cycle < 0 || s.cycle >= coll.cycle_count() || s.slot < 0 ||
        s.slot > 2)
      return kNoEdge;
    return coll.cycles[s.cycle].edges[s.slot];
  };

  std::set<EdgeId> paired;
  for (const OppositePair& p : coll.opposite_pairs) {
    const EdgeId ea = edge_at(p.a), eb = edge_at(p.b);
    if (ea == kNoEdge || eb == kNoEdge) {
      complain("opposite pair references an invalid slot");
      continue;
    }
    if (ea != p.edge_a || eb != p.edge_b)
      complain("opposite pair slots disagree with recorded edge ids (" +
               std::to_string(ea) + ", " + std::to_string(eb) + ") vs (" +
               std::to_string(p.edge_a) + ", " + std::to_string(p.edge_b) +
               ")");
    if (graph.opposite[ea] != eb || graph.opposite[eb] != ea)
      complain("edges " + std::to_string(ea) + " and " + std::to_string(eb) +
               " are paired but are not mutually opposite");
    else if (graph.tail(ea) != graph.head(eb) ||
             graph.head(ea) != graph.tail(eb))
      complain("edges " + std::to_string(ea) + " and " + std::to_string(eb) +
               " are opposite but not reversed");
    if (ea >= eb)
      complain("opposite pair (" + std::to_string(ea) + ", " +
               std::to_string(eb) + ") is not ordered by edge id");
    paired.insert(ea);
    paired.insert(eb);
  }
  std::set<EdgeId> boundary;
  for (const EdgeSlot& s : coll.boundary_edges) {
    const EdgeId e = edge_at(s);
    if (e == kNoEdge) {
      complain("boundary list references an invalid slot");
      continue;
    }
    boundary.insert(e);
  }
  for (EdgeId e = 0; e < graph.edge_count(); ++e) {
    const bool is_b = graph.is_boundary(e);
    if (is_b && !boundary.count(e))
      complain("boundary edge " + std::to_string(e) +
               " missing from boundary list");
    if (!is_b && !paired.count(e))
      complain("interior edge " + std::to_string(e) +
               " missing from opposite pairs");
    if (is_b && paired.count(e))
      complain("boundary edge " + std::to_string(e) +
               " appears in opposite pairs");
  }
  return report;
}

void dump_json(const SurfaceCycleCollection& coll, std::ostream& out) {
  nlohmann::json j;
  j["cycle_count"] = coll.cycle_count();
  j["edge_count"] = coll.edge_count();
  auto& cycles = j["cycles"] = nlohmann::json::array();
  for (const SurfaceCycle& cyc : coll.cycles)
    cycles.push_back({{"id", cyc.id},
                      {"vertices", cyc.vertices},
                      {"edges", cyc.edges}});
  auto& pairs = j["opposite_pairs"] = nlohmann::json::array();
  for (const OppositePair& p : coll.opposite_pairs)
    pairs.push_back({{"edge_a", p.edge_a},
                     {"edge_b", p.edge_b},
                     {"slot_a", {p.a.cycle, p.a.slot}},
                     {"slot_b", {p.b.cycle, p.b.slot}}});
  auto& bnd = j["boundary_edges"] = nlohmann::json::array();
  for (const EdgeSlot& s : coll.boundary_edges)
    bnd.push_back({s.cycle, s.slot});
  out << j.dump(2) << '\n';
}

}  // namespace gcm
