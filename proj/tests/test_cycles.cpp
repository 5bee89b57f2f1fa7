#include "gcm/cycles.hpp"

#include <doctest.h>
#include <json.hpp>

#include "testutil.hpp"

#include <set>
#include <sstream>

using namespace gcm;

namespace {

SurfaceCycleCollection decompose_mesh(const TriMesh& mesh) {
  return decompose(build_shape_graph(mesh));
}

}  // namespace

TEST_CASE("cycles: counts for closed and bounded shapes") {
  struct Row {
    TriMesh mesh;
    int cycles, pairs, boundary;
  };
  const Row rows[] = {
      {tu::tetra(), 4, 6, 0},
      {tu::icosa(), 20, 30, 0},
      {tu::sphere60(), 60, 90, 0},
      {tu::triangle(), 1, 0, 3},
      {tu::square(), 2, 1, 4},
  };
  for (const Row& r : rows) {
    const SurfaceCycleCollection coll = decompose_mesh(r.mesh);
    CHECK(coll.cycle_count() == r.cycles);
    CHECK(coll.edge_count() == 3 * r.cycles);
    CHECK(int(coll.opposite_pairs.size()) == r.pairs);
    CHECK(int(coll.boundary_edges.size()) == r.boundary);
    // Every directed edge is either half of a pair or on the boundary.
    CHECK(2 * int(coll.opposite_pairs.size()) +
              int(coll.boundary_edges.size()) ==
          3 * r.cycles);
  }
}

TEST_CASE("cycles: cycle i holds edges 3i..3i+2 and closes up") {
  const TriMesh mesh = tu::icosa();
  const ShapeGraph g = build_shape_graph(mesh);
  const SurfaceCycleCollection coll = decompose(g);
  for (std::int32_t i = 0; i < coll.cycle_count(); ++i) {
    const SurfaceCycle& cyc = coll.cycles[i];
    CHECK(cyc.id == i);
    for (int j = 0; j < 3; ++j) {
      CHECK(cyc.edges[j] == 3 * i + j);
      CHECK(cyc.vertices[j] == mesh.faces(i, j));
      CHECK(g.tail(cyc.edges[j]) == cyc.vertices[j]);
      CHECK(g.head(cyc.edges[j]) == cyc.vertices[(j + 1) % 3]);
    }
  }
}

TEST_CASE("cycles: slot_of_edge inverts the cycle layout") {
  const SurfaceCycleCollection coll = decompose_mesh(tu::sphere60());
  REQUIRE(coll.slot_of_edge.size() == 180);
  for (EdgeId e = 0; e < 180; ++e) {
    const EdgeSlot s = coll.slot_of_edge[e];
    CHECK(coll.cycles[s.cycle].edges[s.slot] == e);
  }
}

TEST_CASE("cycles: opposite pairs ordered by edge id and mutually reversed") {
  const ShapeGraph g = build_shape_graph(tu::icosa());
  const SurfaceCycleCollection coll = decompose(g);
  for (const OppositePair& p : coll.opposite_pairs) {
    CHECK(p.edge_a < p.edge_b);
    CHECK(coll.cycles[p.a.cycle].edges[p.a.slot] == p.edge_a);
    CHECK(coll.cycles[p.b.cycle].edges[p.b.slot] == p.edge_b);
    CHECK(g.opposite[p.edge_a] == p.edge_b);
    CHECK(g.opposite[p.edge_b] == p.edge_a);
    CHECK(g.tail(p.edge_a) == g.head(p.edge_b));
    CHECK(g.head(p.edge_a) == g.tail(p.edge_b));
  }
}

TEST_CASE("cycles: boundary list holds exactly the twinless edges") {
  const ShapeGraph g = build_shape_graph(tu::square());
  const SurfaceCycleCollection coll = decompose(g);
  std::set<EdgeId> listed;
  for (const EdgeSlot& s : coll.boundary_edges)
    listed.insert(coll.cycles[s.cycle].edges[s.slot]);
  for (EdgeId e = 0; e < g.edge_count(); ++e)
    CHECK(listed.count(e) == (g.is_boundary(e) ? 1 : 0));
}

TEST_CASE("cycles: check_collection passes for every reference shape") {
  for (const TriMesh& m : {tu::tetra(), tu::icosa(), tu::sphere60(),
                           tu::triangle(), tu::square()}) {
    const ShapeGraph g = build_shape_graph(m);
    const CollectionReport report = check_collection(decompose(g), g);
    CHECK(report.ok());
    CAPTURE(report.violations.empty() ? "" : report.violations[0]);
  }
}

TEST_CASE("cycles: check_collection flags tampering") {
  const ShapeGraph g = build_shape_graph(tu::tetra());
  const SurfaceCycleCollection good = decompose(g);
  REQUIRE(check_collection(good, g).ok());

  SUBCASE("swapped slots break closure and coverage") {
    SurfaceCycleCollection bad = good;
    std::swap(bad.cycles[0].edges[0], bad.cycles[1].edges[0]);
    CHECK_FALSE(check_collection(bad, g).ok());
  }
  SUBCASE("dropped pair leaves interior edges unaccounted") {
    SurfaceCycleCollection bad = good;
    bad.opposite_pairs.pop_back();
    const CollectionReport report = check_collection(bad, g);
    CHECK_FALSE(report.ok());
    CHECK(report.violations.size() >= 2);  // both halves go missing
  }
  SUBCASE("reversed pair ordering is reported") {
    SurfaceCycleCollection bad = good;
    std::swap(bad.opposite_pairs[0].a, bad.opposite_pairs[0].b);
    std::swap(bad.opposite_pairs[0].edge_a, bad.opposite_pairs[0].edge_b);
    CHECK_FALSE(check_collection(bad, g).ok());
  }
  SUBCASE("mismatched recorded edge ids are reported") {
    SurfaceCycleCollection bad = good;
    bad.opposite_pairs[0].edge_a = bad.opposite_pairs[1].edge_a;
    CHECK_FALSE(check_collection(bad, g).ok());
  }
  SUBCASE("duplicated cycle is reported as double coverage") {
    SurfaceCycleCollection bad = good;
    bad.cycles[3] = bad.cycles[0];
    bad.cycles[3].id = 3;
    CHECK_FALSE(check_collection(bad, g).ok());
  }
}

TEST_CASE("cycles: decompose rejects graphs without face structure") {
  // An edgeless graph decomposes to zero cycles; only a non-multiple-of-3
  // edge count is structurally impossible.
  CHECK(decompose(vertex_only_graph(4)).cycle_count() == 0);
  ShapeGraph g;
  g.vertex_count = 2;
  g.edges.resize(2, 2);
  g.edges << 0, 1, 1, 0;
  g.opposite = {1, 0};
  g.out_edges = {{0}, {1}};
  CHECK_THROWS_AS(decompose(g), InvalidMeshError);
}

TEST_CASE("cycles: decomposition is deterministic") {
  const ShapeGraph g = build_shape_graph(tu::sphere60());
  const SurfaceCycleCollection a = decompose(g);
  const SurfaceCycleCollection b = decompose(g);
  REQUIRE(a.cycle_count() == b.cycle_count());
  for (std::int32_t i = 0; i < a.cycle_count(); ++i) {
    CHECK(a.cycles[i].vertices == b.cycles[i].vertices);
    CHECK(a.cycles[i].edges == b.cycles[i].edges);
  }
  REQUIRE(a.opposite_pairs.size() == b.opposite_pairs.size());
  for (std::size_t i = 0; i < a.opposite_pairs.size(); ++i) {
    CHECK(a.opposite_pairs[i].edge_a == b.opposite_pairs[i].edge_a);
    CHECK(a.opposite_pairs[i].edge_b == b.opposite_pairs[i].edge_b);
  }
}

TEST_CASE("cycles: dump_json emits parseable JSON with full inventory") {
  const SurfaceCycleCollection coll = decompose_mesh(tu::square());
  std::ostringstream out;
  dump_json(coll, out);
  const nlohmann::json j = nlohmann::json::parse(out.str());
  CHECK(j["cycle_count"] == 2);
  CHECK(j["edge_count"] == 6);
  CHECK(j["cycles"].size() == 2);
  CHECK(j["opposite_pairs"].size() == 1);
  CHECK(j["boundary_edges"].size() == 4);
  CHECK(j["cycles"][0]["edges"] == nlohmann::json({0, 1, 2}));
}
