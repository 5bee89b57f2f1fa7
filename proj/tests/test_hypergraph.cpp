#include "gcm/hypergraph.hpp"

#include <doctest.h>
#include <json.hpp>

#include "gcm/matching.hpp"
#include "testutil.hpp"

#include <fstream>
#include <random>
#include <sstream>

using namespace gcm;

namespace {

ConstraintSystem build_for(const TriMesh& src, const TriMesh& tgt, int k) {
  const ShapeGraph sg = build_shape_graph(src);
  return build_product_system(decompose(sg), build_shape_graph(tgt), k);
}

struct Mirror {
  Eigen::SparseMatrix<double> H;
  Eigen::VectorXd b;
};

// Re-derives the documented row/column layout from first principles with
// plain loops over (cycle, slot, layer, extended target edge), straight off
// the shape graphs. Valid for closed targets, where every real edge has a
// twin and every loop is its own reverse, so no pinning rows appear.
Mirror mirror_closed(const ShapeGraph& src, const ShapeGraph& tgt, int k) {
  const std::int64_t n = src.edge_count() / 3;
  const std::int64_t tv = tgt.vertex_count, te = tgt.edge_count();
  const std::int64_t text = te + tv;
  const std::int64_t L = k + 1;

  std::vector<std::int64_t> pair_of(src.edge_count(), -1);
  std::vector<char> first(src.edge_count(), 0);
  std::int64_t p = 0;
  for (EdgeId e = 0; e < src.edge_count(); ++e) {
    const EdgeId o = src.opposite[e];
    if (o == kNoEdge || o < e) continue;
    pair_of[e] = pair_of[o] = p;
    first[e] = 1;
    ++p;
  }

  const std::int64_t flow = 3 * n * L * tv;
  const std::int64_t couple = p * L * text + 3 * n * (k / 2) * te;
  const std::int64_t inj = 3 * n;
  const std::int64_t cols_per = 3 * L * text + 3 * k * te;
  const std::int64_t couple_base = flow;
  const std::int64_t step_base = flow + p * L * text;
  const std::int64_t inj_base = flow + couple;

  auto etail = [&](std::int64_t d) {
    return d < te ? std::int64_t(tgt.tail(EdgeId(d))) : d - te;
  };
  auto ehead = [&](std::int64_t d) {
    return d < te ? std::int64_t(tgt.head(EdgeId(d))) : d - te;
  };
  auto eopp = [&](std::int64_t d) {
    return d < te ? std::int64_t(tgt.opposite[EdgeId(d)]) : d;
  };
  auto frow = [&](std::int64_t i, int a, int l, std::int64_t y) {
    return (3 * i + a) * L * tv + l * tv + y;
  };

  std::vector<Eigen::Triplet<double>> trips;
  for (std::int64_t i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) {
      const EdgeId e = EdgeId(3 * i + a);
      for (int l = 0; l <= k; ++l)
        for (std::int64_t d = 0; d < text; ++d) {
          const std::int64_t col = i * cols_per + (a * L + l) * text + d;
          trips.emplace_back(frow(i, a, l, etail(d)), col, -1.0);
          trips.emplace_back(frow(i, (a + 1) % 3, 0, ehead(d)), col, 1.0);
          if (pair_of[e] >= 0)
            trips.emplace_back(couple_base + (pair_of[e] * L + l) * text +
                                   (first[e] ? d : eopp(d)),
                               col, first[e] ? 1.0 : -1.0);
          trips.emplace_back(inj_base + e, col, 1.0);
        }
      for (int l = 0; l < k; ++l)
        for (std::int64_t g = 0; g < te; ++g) {
          const std::int64_t col =
              i * cols_per + 3 * L * text + (a * k + l) * te + g;
          trips.emplace_back(frow(i, a, l, tgt.tail(EdgeId(g))), col, -1.0);
          trips.emplace_back(frow(i, a, l + 1, tgt.head(EdgeId(g))), col, 1.0);
          trips.emplace_back(
              step_base + ((3 * i + a) * (k / 2) + l / 2) * te +
                  (l % 2 == 0 ? g : std::int64_t(tgt.opposite[EdgeId(g)])),
              col, l % 2 == 0 ? 1.0 : -1.0);
        }
    }
  }
  Mirror m;
  m.H.resize(flow + couple + inj, n * cols_per);
  m.H.setFromTriplets(trips.begin(), trips.end());
  m.b = Eigen::VectorXd::Zero(flow + couple + inj);
  for (std::int64_t e = 0; e < inj; ++e) m.b[inj_base + e] = 1.0;
  return m;
}

void check_against_mirror(const TriMesh& src_mesh, const TriMesh& tgt_mesh,
                          int k) {
  const ShapeGraph src = build_shape_graph(src_mesh);
  const ShapeGraph tgt = build_shape_graph(tgt_mesh);
  const ConstraintSystem sys = build_product_system(decompose(src), tgt, k);
  const Mirror m = mirror_closed(src, tgt, k);
  REQUIRE(sys.row_count == m.H.rows());
  REQUIRE(sys.col_count == m.H.cols());
  const Eigen::MatrixXd diff =
      Eigen::MatrixXd(sys.to_sparse()) - Eigen::MatrixXd(m.H);
  CHECK(diff.cwiseAbs().maxCoeff() == 0.0);
  CHECK((sys.rhs() - m.b).cwiseAbs().maxCoeff() == 0.0);
}

}  // namespace

TEST_CASE("hypergraph: extended-edge helpers") {
  const ShapeGraph g = build_shape_graph(tu::square());
  const std::int64_t te = g.edge_count();  // 6 real edges, 4 vertices
  REQUIRE(g.extended_edge_count() == 10);
  for (std::int64_t d = 0; d < te; ++d) {
    CHECK_FALSE(ext_is_loop(g, d));
    CHECK(ext_tail(g, d) == g.tail(EdgeId(d)));
    CHECK(ext_head(g, d) == g.head(EdgeId(d)));
    if (g.is_boundary(EdgeId(d)))
      CHECK(ext_opposite(g, d) == kNoEdge);
    else
      CHECK(ext_opposite(g, d) == g.opposite[EdgeId(d)]);
  }
  for (std::int64_t d = te; d < g.extended_edge_count(); ++d) {
    CHECK(ext_is_loop(g, d));
    CHECK(ext_tail(g, d) == d - te);
    CHECK(ext_head(g, d) == d - te);
    CHECK(ext_opposite(g, d) == d);  // a loop is its own reverse
  }
}

TEST_CASE("hypergraph: system dimensions across shapes and budgets") {
  struct Row {
    TriMesh src, tgt;
    int k;
    std::int64_t rows, cols, flow, coupling, inj;
  };
  const Row rows[] = {
      // tetra-to-tetra, k=0: 48 flow + 96 coupling + 12 injectivity
      {tu::tetra(), tu::tetra(), 0, 156, 192, 48, 96, 12},
      // tetra-to-tetra, k=2
      {tu::tetra(), tu::tetra(), 2, 588, 864, 144, 432, 12},
      // icosa-to-icosa, k=0
      {tu::icosa(), tu::icosa(), 0, 2940, 4320, 720, 2160, 60},
      // all-boundary source has no coupling at all
      {tu::triangle(), tu::tetra(), 0, 15, 48, 12, 0, 3},
  };
  for (const Row& r : rows) {
    const ConstraintSystem sys = build_for(r.src, r.tgt, r.k);
    CHECK(sys.row_count == r.rows);
    CHECK(sys.col_count == r.cols);
    CHECK(sys.flow_rows == r.flow);
    CHECK(sys.coupling_rows == r.coupling);
    CHECK(sys.injectivity_rows == r.inj);
    CHECK(std::int64_t(sys.rhs_rows.size()) == r.inj);
    CHECK(std::int64_t(sys.vars.size()) == r.cols);
    CHECK(sys.full_col_count == r.cols);
    CHECK_FALSE(sys.reduced);
  }
}

TEST_CASE("hypergraph: right-hand side is 1 exactly on injectivity rows") {
  const ConstraintSystem sys = build_for(tu::tetra(), tu::tetra(), 2);
  const Eigen::VectorXd b = sys.rhs();
  for (std::int64_t r = 0; r < sys.row_count; ++r) {
    const bool injective = sys.row_kind(r) == RowKind::Injectivity;
    CHECK(b[r] == (injective ? 1.0 : 0.0));
  }
}

TEST_CASE("hypergraph: assembled matrix equals first-principles mirror") {
  check_against_mirror(tu::tetra(), tu::tetra(), 0);
  check_against_mirror(tu::tetra(), tu::tetra(), 2);
  check_against_mirror(tu::icosa(), tu::tetra(), 0);
  check_against_mirror(tu::tetra(), tu::icosa(), 0);
  check_against_mirror(tu::triangle(), tu::tetra(), 0);  // boundary source
  check_against_mirror(tu::triangle(), tu::tetra(), 2);
  check_against_mirror(tu::square(), tu::tetra(), 2);
}

TEST_CASE("hypergraph: column metadata describes the stored coefficients") {
  const TriMesh src_mesh = tu::tetra();
  const ShapeGraph src = build_shape_graph(src_mesh);
  const ShapeGraph tgt = build_shape_graph(tu::icosa());
  const SurfaceCycleCollection coll = decompose(src);
  const ConstraintSystem sys = build_product_system(coll, tgt, 2);

  for (std::int64_t c = 0; c < sys.col_count; ++c) {
    const VariableMeta& m = sys.vars[c];
    if (m.kind == VarKind::VertexToEdge) {
      CHECK(m.x_edge == kNoEdge);
      CHECK(m.x_tail == m.x_head);
      CHECK(m.y_tail == tgt.tail(EdgeId(m.y_ext)));
      CHECK(m.y_head == tgt.head(EdgeId(m.y_ext)));
      CHECK(m.layer < sys.k);
    } else {
      CHECK(m.x_edge == 3 * m.cycle + m.slot);
      CHECK(m.x_tail == src.tail(m.x_edge));
      CHECK(m.x_head == src.head(m.x_edge));
      CHECK(m.y_tail == ext_tail(tgt, m.y_ext));
      CHECK(m.y_head == ext_head(tgt, m.y_ext));
      CHECK((m.kind == VarKind::EdgeToVertex) == ext_is_loop(tgt, m.y_ext));
      CHECK(m.layer <= sys.k);
    }
    CHECK(m.cycle == coll.slot_of_edge[3 * m.cycle + m.slot].cycle);
  }
}

TEST_CASE("hypergraph: per-column sparsity pattern") {
  // Closed target, k=0: paired source edges produce 4 entries per column
  // (two flow, one coupling, one injectivity); boundary source edges skip
  // the coupling entry.
  const ConstraintSystem closed = build_for(tu::tetra(), tu::tetra(), 0);
  for (std::int64_t c = 0; c < closed.col_count; ++c)
    CHECK(closed.col_ptr[c + 1] - closed.col_ptr[c] == 4);
  CHECK(closed.nonzeros() == 4 * closed.col_count);

  const ConstraintSystem open = build_for(tu::triangle(), tu::tetra(), 0);
  for (std::int64_t c = 0; c < open.col_count; ++c)
    CHECK(open.col_ptr[c + 1] - open.col_ptr[c] == 3);

  // Row indices ascend within each column and all values are +-1.
  for (const ConstraintSystem* sys : {&closed, &open}) {
    for (std::int64_t c = 0; c < sys->col_count; ++c)
      for (std::int64_t t = sys->col_ptr[c] + 1; t < sys->col_ptr[c + 1]; ++t)
        CHECK(sys->row_idx[t - 1] < sys->row_idx[t]);
    for (std::int8_t v : sys->values) CHECK((v == 1 || v == -1));
  }
}

TEST_CASE("hypergraph: reduction removes every coupling row") {
  for (int k : {0, 2}) {
    const ConstraintSystem full = build_for(tu::tetra(), tu::tetra(), k);
    const ConstraintSystem red = reduce_system(full);
    CHECK(red.reduced);
    CHECK(red.coupling_rows == 0);
    CHECK(red.row_count == full.flow_rows + full.injectivity_rows);
    CHECK(red.col_count == full.col_count / 2);  // closed target: all merge
    CHECK(red.full_col_count == full.col_count);
    CHECK(std::int64_t(red.merge_map.size()) == full.col_count);
    CHECK(red.vars.size() == full.vars.size());
    // Reduced column ids form a contiguous range.
    std::vector<char> hit(red.col_count, 0);
    for (std::int32_t m : red.merge_map)
      if (m >= 0) {
        REQUIRE(m < red.col_count);
        hit[m] = 1;
      }
    for (char h : hit) CHECK(h == 1);
  }
  const ConstraintSystem full = build_for(tu::tetra(), tu::tetra(), 0);
  CHECK(reduce_system(full).row_count == 60);
  CHECK(reduce_system(full).col_count == 96);
  CHECK_THROWS_AS(reduce_system(reduce_system(full)), InvalidArgumentError);
}

TEST_CASE("hypergraph: target boundary pins the columns that cannot couple") {
  // Paired source edges matched onto a target boundary edge have no twin to
  // couple with, so reduction must fix those columns to zero.
  const ShapeGraph src = build_shape_graph(tu::tetra());
  const ShapeGraph tgt = build_shape_graph(tu::square());
  const ConstraintSystem full = build_product_system(decompose(src), tgt, 0);
  const ConstraintSystem red = reduce_system(full);

  std::int64_t pinned = 0;
  for (std::int64_t c = 0; c < full.col_count; ++c) {
    const VariableMeta& m = full.vars[c];
    const bool boundary_image =
        !ext_is_loop(tgt, m.y_ext) && tgt.is_boundary(EdgeId(m.y_ext));
    if (red.merge_map[c] < 0) {
      ++pinned;
      CHECK(boundary_image);
    } else {
      CHECK_FALSE(boundary_image);  // tetra source edges are all paired
    }
  }
  // 12 source edges x 4 boundary target edges.
  CHECK(pinned == 48);
  CHECK(red.col_count == 36);
}

TEST_CASE("hypergraph: expanded reduced points satisfy the full system") {
  struct Inst {
    TriMesh src, tgt;
    int k;
  };
  const Inst insts[] = {
      {tu::tetra(), tu::tetra(), 0},
      {tu::tetra(), tu::tetra(), 2},
      {tu::tetra(), tu::square(), 0},  // exercises pinning
      {tu::square(), tu::tetra(), 2},  // boundary source edges
  };
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const Inst& inst : insts) {
    const ConstraintSystem full = build_for(inst.src, inst.tgt, inst.k);
    const ConstraintSystem red = reduce_system(full);

    Eigen::VectorXd xr(red.col_count);
    for (std::int64_t j = 0; j < xr.size(); ++j) xr[j] = u(rng);
    const Eigen::VectorXd xf = expand_solution(xr, red.merge_map);
    REQUIRE(xf.size() == full.col_count);

    const Eigen::VectorXd rf = residual(full, xf);
    const Eigen::VectorXd rr = residual(red, xr);
    // Coupling rows cancel exactly; pinned columns expand to zero.
    for (std::int64_t r = full.flow_rows;
         r < full.flow_rows + full.coupling_rows; ++r)
      CHECK(rf[r] == 0.0);
    // Shared rows carry identical residuals up to summation order.
    for (std::int64_t r = 0; r < full.flow_rows; ++r)
      CHECK(rf[r] == doctest::Approx(rr[r]).epsilon(1e-12));
    for (std::int64_t e = 0; e < full.injectivity_rows; ++e)
      CHECK(rf[full.flow_rows + full.coupling_rows + e] ==
            doctest::Approx(rr[red.flow_rows + e]).epsilon(1e-12));
  }
}

TEST_CASE("hypergraph: encoded vertex maps are exactly feasible") {
  const TriMesh mesh = tu::icosa();
  const ShapeGraph g = build_shape_graph(mesh);
  for (int k : {0, 2}) {
    const ConstraintSystem full = build_product_system(decompose(g), g, k);

    for (const std::vector<std::int32_t>& phi :
         {tu::identity_map(12), std::vector<std::int32_t>(12, 3)}) {
      const std::vector<std::int64_t> cols =
          encode_vertex_map(phi, full, g, g);
      REQUIRE(std::int64_t(cols.size()) == g.edge_count());
      Eigen::VectorXd x = Eigen::VectorXd::Zero(full.col_count);
      for (std::int64_t c : cols) x[c] = 1.0;
      CHECK(residual(full, x).cwiseAbs().maxCoeff() == 0.0);

      // The same point stays feasible after reduction.
      const ConstraintSystem red = reduce_system(full);
      Eigen::VectorXd xr = Eigen::VectorXd::Zero(red.col_count);
      for (std::int64_t c : cols) {
        REQUIRE(red.merge_map[c] >= 0);
        xr[red.merge_map[c]] = 1.0;
      }
      CHECK(residual(red, xr).cwiseAbs().maxCoeff() == 0.0);
      CHECK((expand_solution(xr, red.merge_map) - x).cwiseAbs().maxCoeff() ==
            0.0);
    }
  }
}

TEST_CASE("hypergraph: vertex-only target forces collapse columns") {
  const ShapeGraph src = build_shape_graph(tu::tetra());
  const ShapeGraph tgt = vertex_only_graph(3);
  const ConstraintSystem sys = build_product_system(decompose(src), tgt, 0);
  CHECK(sys.row_count == 66);  // 36 flow + 18 coupling + 12 injectivity
  CHECK(sys.col_count == 36);
  for (std::int64_t c = 0; c < sys.col_count; ++c)
    CHECK(sys.vars[c].kind == VarKind::EdgeToVertex);
  const ConstraintSystem red = reduce_system(sys);
  CHECK(red.col_count == 18);
  CHECK(red.row_count == 48);
}

TEST_CASE("hypergraph: invalid inputs are rejected") {
  const ShapeGraph g = build_shape_graph(tu::tetra());
  const SurfaceCycleCollection coll = decompose(g);
  CHECK_THROWS_AS(build_product_system(coll, g, 1), InvalidArgumentError);
  CHECK_THROWS_AS(build_product_system(coll, g, 3), InvalidArgumentError);
  CHECK_THROWS_AS(build_product_system(coll, g, -2), InvalidArgumentError);
  CHECK_THROWS_AS(build_product_system(coll, vertex_only_graph(0), 0),
                  InvalidArgumentError);
  const SurfaceCycleCollection empty;
  CHECK_THROWS_AS(build_product_system(empty, g, 0), InvalidArgumentError);
}

TEST_CASE("hypergraph: expand_solution guards its inputs") {
  const ConstraintSystem full = build_for(tu::tetra(), tu::tetra(), 0);
  const ConstraintSystem red = reduce_system(full);
  const Eigen::VectorXd too_small = Eigen::VectorXd::Zero(red.col_count - 1);
  CHECK_THROWS_AS(expand_solution(too_small, red.merge_map),
                  InvalidArgumentError);
  CHECK_THROWS_AS(residual(full, Eigen::VectorXd::Zero(3)),
                  InvalidArgumentError);
}

TEST_CASE("hypergraph: export writes matching matrix, rhs and metadata") {
  tu::TempDir dir;
  const ConstraintSystem sys = build_for(tu::tetra(), tu::tetra(), 0);
  export_system(sys, dir.file("sys"));

  std::ifstream mtx(dir.file("sys.mtx"));
  REQUIRE(mtx.good());
  std::string header;
  std::getline(mtx, header);
  CHECK(header.find("MatrixMarket") != std::string::npos);
  std::int64_t rows, cols, nnz;
  mtx >> rows >> cols >> nnz;
  CHECK(rows == sys.row_count);
  CHECK(cols == sys.col_count);
  CHECK(nnz == sys.nonzeros());
  std::int64_t seen = 0;
  std::int64_t r, c;
  int v;
  while (mtx >> r >> c >> v) {
    ++seen;
    CHECK(r >= 1);
    CHECK(r <= rows);
    CHECK(c >= 1);
    CHECK(c <= cols);
    CHECK((v == 1 || v == -1));
  }
  CHECK(seen == nnz);

  std::ifstream btxt(dir.file("sys.b.txt"));
  REQUIRE(btxt.good());
  std::int64_t lines = 0, ones = 0;
  for (std::string line; std::getline(btxt, line);) {
    ++lines;
    if (line == "1") ++ones;
  }
  CHECK(lines == sys.row_count);
  CHECK(ones == 12);

  std::ifstream meta(dir.file("sys.meta.json"));
  REQUIRE(meta.good());
  const nlohmann::json j = nlohmann::json::parse(meta);
  CHECK(j["rows"] == sys.row_count);
  CHECK(j["cols"] == sys.col_count);
  CHECK(j["flow_rows"] == sys.flow_rows);
  CHECK(j["coupling_rows"] == sys.coupling_rows);
  CHECK(j["injectivity_rows"] == sys.injectivity_rows);
  CHECK(j["k"] == 0);
  CHECK(j["reduced"] == false);
}

TEST_CASE("hypergraph: assembly is deterministic") {
  const ConstraintSystem a = build_for(tu::icosa(), tu::tetra(), 2);
  const ConstraintSystem b = build_for(tu::icosa(), tu::tetra(), 2);
  CHECK(a.col_ptr == b.col_ptr);
  CHECK(a.row_idx == b.row_idx);
  CHECK(a.values == b.values);
  CHECK(a.rhs_rows == b.rhs_rows);
}
