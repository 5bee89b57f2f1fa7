// Command-line front end: builds the coupled surface-cycle constraint
// system for a pair of triangle meshes, solves its LP relaxation with the
// embedded simplex solver, and decodes/evaluates the resulting matching.
//
// Exit codes: 0 when the relaxation itself is integral and optimal, 2 when
// the branch-and-bound fallback had to run (the printed solution is still
// feasible and decoded), 1 on any error.

#include "gcm/cost.hpp"
#include "gcm/cycles.hpp"
#include "gcm/eval.hpp"
#include "gcm/hypergraph.hpp"
#include "gcm/matching.hpp"
#include "gcm/mesh.hpp"
#include "gcm/solver.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <vector>

namespace {

using nlohmann::json;

struct MatchOptions {
  std::string source_path, target_path;
  std::string features_source, features_target;
  std::string out_path, report_path, system_out;
  std::string backend;
  std::string norm = "l2";
  int k = 2;
  bool reduce = true;
  bool verbose = false;
  bool planar = false;
  std::uint64_t seed = 1;
  std::int64_t max_iterations = -1;
  int node_limit = 1000;
};

void add_match_options(CLI::App* cmd, MatchOptions& opt) {
  cmd->add_option("source", opt.source_path, "source mesh (.off/.ply)")
      ->required();
  cmd->add_option("target", opt.target_path, "target mesh (.off/.ply)")
      ->required();
  cmd->add_option("--k", opt.k,
                  "distortion budget (even, >= 0); higher values let source "
                  "vertices take short excursions on the target")
      ->capture_default_str();
  cmd->add_flag("--reduce,!--no-reduce", opt.reduce,
                "merge twin-coupled columns before solving")
      ->capture_default_str();
  cmd->add_option("--backend", opt.backend,
                  "LP backend (default: $GCMATCH_BACKEND or 'simplex')");
  cmd->add_option("--norm", opt.norm, "feature distance: l2, l1 or cosine")
      ->capture_default_str();
  cmd->add_option("--features-source", opt.features_source,
                  "per-vertex features for the source (.csv/.bin/text); "
                  "default: normalised xyz positions");
  cmd->add_option("--features-target", opt.features_target,
                  "per-vertex features for the target");
  cmd->add_option("--seed", opt.seed, "perturbation seed for tie-breaking")
      ->capture_default_str();
  cmd->add_option("--max-iterations", opt.max_iterations,
                  "simplex iteration budget (-1: scaled to problem size)");
  cmd->add_option("--node-limit", opt.node_limit,
                  "branch & bound node budget")
      ->capture_default_str();
  cmd->add_flag("--verbose", opt.verbose, "stream solver progress lines");
}

gcm::FeatureTable features_for(const std::string& path,
                               const gcm::TriMesh& mesh) {
  if (path.empty()) return gcm::xyz_features(mesh, /*normalize=*/true);
  return gcm::load_features(path, mesh);
}

void check_planar(const gcm::TriMesh& mesh, const std::string& name) {
  const double extent =
      (mesh.vertices.colwise().maxCoeff() - mesh.vertices.colwise().minCoeff())
          .norm();
  const double tol = 1e-9 * (1.0 + extent);
  for (Eigen::Index i = 0; i < mesh.vertex_count(); ++i)
    if (std::abs(mesh.vertices(i, 2)) > tol)
      throw gcm::InvalidMeshError(name + " is not planar: vertex " +
                                  std::to_string(i) + " has z = " +
                                  std::to_string(mesh.vertices(i, 2)));
}

// Columns of the cheapest constant map (every source edge collapsed onto a
// single target vertex), used as a feasible warm start.
std::vector<std::int64_t> constant_map_columns(
    const gcm::ConstraintSystem& full, const Eigen::VectorXd& full_costs) {
  std::map<std::int32_t, double> total;
  std::map<std::int32_t, std::vector<std::int64_t>> columns;
  for (std::int64_t c = 0; c < full.col_count; ++c) {
    const gcm::VariableMeta& m = full.vars[c];
    if (m.kind != gcm::VarKind::EdgeToVertex || m.layer != 0) continue;
    total[m.y_tail] += full_costs[c];
    columns[m.y_tail].push_back(c);
  }
  if (total.empty()) return {};
  std::int32_t best = total.begin()->first;
  for (const auto& [y, t] : total)
    if (t < total[best]) best = y;
  return columns[best];
}

// Feature-nearest-neighbour vertex map as a warm-start candidate. Returns
// the realising columns when the map is geometrically consistent, else empty.
std::vector<std::int64_t> nearest_map_columns(
    const gcm::FeatureTable& fx, const gcm::FeatureTable& fy,
    gcm::FeatureNorm norm, const gcm::ConstraintSystem& full,
    const gcm::ShapeGraph& source_graph, const gcm::ShapeGraph& target_graph) {
  if (fy.rows() == 0) return {};
  const std::vector<std::int32_t> phi = gcm::nearest_vertex_map(fx, fy, norm);
  if (!gcm::verify_consistency(phi, source_graph, target_graph).ok())
    return {};
  return gcm::encode_vertex_map(phi, full, source_graph, target_graph);
}

struct BuiltProblem {
  gcm::SurfaceCycleCollection cycles;
  gcm::ShapeGraph source_graph, target_graph;
  gcm::ConstraintSystem full;
  std::optional<gcm::ConstraintSystem> reduced;
  Eigen::VectorXd full_costs;   // costs of the full system
  Eigen::VectorXd solve_costs;  // costs of the system handed to the solver
  std::vector<std::int64_t> warm;

  const gcm::ConstraintSystem& solve_system() const {
    return reduced ? *reduced : full;
  }
};

BuiltProblem build_problem(const MatchOptions& opt, const gcm::TriMesh& source,
                           const gcm::TriMesh& target) {
  BuiltProblem bp;
  bp.source_graph = gcm::build_shape_graph(source);
  bp.target_graph = gcm::build_shape_graph(target);
  bp.cycles = gcm::decompose(bp.source_graph);
  const gcm::CollectionReport check =
      gcm::check_collection(bp.cycles, bp.source_graph);
  if (!check.ok())
    throw gcm::Error("cycle decomposition failed: " + check.violations[0]);

  bp.full = gcm::build_product_system(bp.cycles, bp.target_graph, opt.k);

  const gcm::FeatureTable fx = features_for(opt.features_source, source);
  const gcm::FeatureTable fy = features_for(opt.features_target, target);
  const gcm::FeatureNorm norm = gcm::parse_feature_norm(opt.norm);
  bp.full_costs = gcm::compute_costs(fx, fy, bp.full, norm);

  std::vector<std::int64_t> warm_full =
      constant_map_columns(bp.full, bp.full_costs);
  const std::vector<std::int64_t> nn_full = nearest_map_columns(
      fx, fy, norm, bp.full, bp.source_graph, bp.target_graph);
  if (!nn_full.empty()) {
    const auto total = [&](const std::vector<std::int64_t>& cols) {
      double t = 0.0;
      for (std::int64_t c : cols) t += bp.full_costs[c];
      return t;
    };
    if (warm_full.empty() || total(nn_full) < total(warm_full))
      warm_full = nn_full;
  }
  if (opt.reduce) {
    bp.reduced = gcm::reduce_system(bp.full);
    bp.solve_costs = gcm::compute_costs(fx, fy, *bp.reduced, norm);
    std::set<std::int64_t> warm;
    for (std::int64_t c : warm_full)
      if (bp.reduced->merge_map[c] >= 0) warm.insert(bp.reduced->merge_map[c]);
    bp.warm.assign(warm.begin(), warm.end());
  } else {
    bp.solve_costs = bp.full_costs;
    bp.warm = warm_full;
  }
  return bp;
}

gcm::SolverOptions solver_options(const MatchOptions& opt) {
  gcm::SolverOptions so;
  so.backend = opt.backend;
  so.max_iterations = opt.max_iterations;
  so.node_limit = opt.node_limit;
  so.seed = opt.seed;
  if (opt.verbose) so.log = &std::cout;
  return so;
}

int run_match(const MatchOptions& opt) {
  const gcm::TriMesh source = gcm::load_mesh(opt.source_path);
  const gcm::TriMesh target = gcm::load_mesh(opt.target_path);
  if (opt.planar) {
    check_planar(source, "source");
    check_planar(target, "target");
  }
  if (int d = gcm::degenerate_face_count(source))
    std::cout << "event=warn kind=degenerate_faces mesh=source count=" << d
              << '\n';
  if (int d = gcm::degenerate_face_count(target))
    std::cout << "event=warn kind=degenerate_faces mesh=target count=" << d
              << '\n';
  std::cout << "event=load source_vertices=" << source.vertex_count()
            << " source_faces=" << source.face_count()
            << " target_vertices=" << target.vertex_count()
            << " target_faces=" << target.face_count() << '\n';

  BuiltProblem bp = build_problem(opt, source, target);
  const gcm::ConstraintSystem& sys = bp.solve_system();
  std::cout << "event=system k=" << bp.full.k << " reduced=" << (bp.reduced ? 1 : 0)
            << " rows=" << sys.row_count << " cols=" << sys.col_count
            << " nnz=" << sys.nonzeros()
            << " full_rows=" << bp.full.row_count
            << " full_cols=" << bp.full.col_count
            << " flow_rows=" << sys.flow_rows
            << " coupling_rows=" << sys.coupling_rows
            << " injectivity_rows=" << sys.injectivity_rows << '\n';
  if (!opt.system_out.empty()) gcm::export_system(sys, opt.system_out);

  gcm::LpProblem lp;
  lp.system = &sys;
  lp.costs = bp.solve_costs;
  lp.warm_at_one = bp.warm;
  const gcm::LpSolution sol = gcm::solve_ilp(lp, solver_options(opt));
  std::cout << "event=solve status=" << gcm::solve_status_name(sol.status)
            << " objective=" << sol.objective
            << " integral=" << (sol.integral ? 1 : 0)
            << " max_fractionality=" << sol.max_fractionality
            << " max_residual=" << sol.max_residual
            << " iterations=" << sol.iterations << " bb_nodes=" << sol.bb_nodes
            << " seconds=" << sol.seconds << '\n';
  if (sol.status != gcm::SolveStatus::Optimal || !sol.integral)
    throw gcm::Error("no integral optimum (status " +
                     gcm::solve_status_name(sol.status) + ")");

  const Eigen::VectorXd full_x =
      bp.reduced ? gcm::expand_solution(sol.x, bp.reduced->merge_map) : sol.x;
  const gcm::Matching match =
      gcm::decode(full_x, bp.full, bp.source_graph, bp.target_graph);
  std::int64_t matched = 0;
  for (std::int32_t y : match.vertex_map)
    if (y >= 0) ++matched;
  std::cout << "event=decode matched_vertices=" << matched
            << " edge_matches=" << match.edge_matches.size()
            << " distortion_steps=" << match.distortion_steps
            << " violations=" << match.certificate.violations.size()
            << " checked_edges=" << match.certificate.checked_edges
            << " collapse_fraction=" << match.collapse_fraction << '\n';

  if (!opt.out_path.empty())
    gcm::write_correspondence(opt.out_path, match.vertex_map);
  if (!opt.report_path.empty()) {
    json report;
    report["status"] = gcm::solve_status_name(sol.status);
    report["objective"] = sol.objective;
    report["integral"] = sol.integral;
    report["iterations"] = sol.iterations;
    report["bb_nodes"] = sol.bb_nodes;
    report["seconds"] = sol.seconds;
    report["max_residual"] = sol.max_residual;
    report["k"] = bp.full.k;
    report["reduced"] = bool(bp.reduced);
    report["rows"] = sys.row_count;
    report["cols"] = sys.col_count;
    report["matched_vertices"] = matched;
    report["violations"] = match.certificate.violations.size();
    report["collapse_fraction"] = match.collapse_fraction;
    report["distortion_steps"] = match.distortion_steps;
    std::ofstream out(opt.report_path);
    if (!out)
      throw gcm::Error("cannot open " + opt.report_path + " for writing");
    out << report.dump(2) << '\n';
  }
  return sol.bb_nodes > 0 ? 2 : 0;
}

int run_export_mps(const MatchOptions& opt, const std::string& mps_path) {
  const gcm::TriMesh source = gcm::load_mesh(opt.source_path);
  const gcm::TriMesh target = gcm::load_mesh(opt.target_path);
  BuiltProblem bp = build_problem(opt, source, target);
  const gcm::ConstraintSystem& sys = bp.solve_system();
  gcm::LpProblem lp;
  lp.system = &sys;
  lp.costs = bp.solve_costs;
  gcm::export_mps(lp, mps_path);
  if (!opt.system_out.empty()) gcm::export_system(sys, opt.system_out);
  std::cout << "event=export rows=" << sys.row_count
            << " cols=" << sys.col_count << " mps=" << mps_path << '\n';
  return 0;
}

int run_oracle(const MatchOptions& opt, const std::string& out_path,
               std::int64_t max_maps) {
  const gcm::TriMesh source = gcm::load_mesh(opt.source_path);
  const gcm::TriMesh target = gcm::load_mesh(opt.target_path);
  const gcm::ShapeGraph sg = gcm::build_shape_graph(source);
  const gcm::ShapeGraph tg = gcm::build_shape_graph(target);
  const gcm::FeatureTable fx = features_for(opt.features_source, source);
  const gcm::FeatureTable fy = features_for(opt.features_target, target);
  const gcm::OracleResult res = gcm::oracle_enumerate(
      sg, tg, fx, fy, gcm::parse_feature_norm(opt.norm), max_maps);
  std::cout << "event=oracle min_cost=" << res.min_cost
            << " maps_scored=" << res.maps_scored
            << " maps_consistent=" << res.maps_consistent << '\n';
  if (!out_path.empty()) gcm::write_correspondence(out_path, res.argmin);
  return 0;
}

int run_eval(const std::string& source_path, const std::string& target_path,
             const std::string& predicted_path, const std::string& gt_path,
             const std::vector<double>& thresholds,
             const std::string& pck_path, const std::string& report_path) {
  const gcm::TriMesh source = gcm::load_mesh(source_path);
  const gcm::TriMesh target = gcm::load_mesh(target_path);
  std::vector<std::int32_t> predicted =
      gcm::read_correspondence(predicted_path);
  predicted.resize(source.vertex_count(), -1);
  std::vector<std::int32_t> gt = gcm::read_correspondence(gt_path);
  gt.resize(source.vertex_count(), -1);

  const Eigen::VectorXd errors = gcm::geodesic_errors(predicted, gt, target);
  double sum = 0.0;
  std::int64_t n = 0;
  for (Eigen::Index i = 0; i < errors.size(); ++i)
    if (std::isfinite(errors[i])) {
      sum += errors[i];
      ++n;
    }
  const double mean = n ? sum / double(n) : 0.0;
  const auto curve = gcm::pck_curve(errors, thresholds);
  const double dirichlet = gcm::dirichlet_energy(predicted, source, target);

  std::cout << "event=eval matched=" << n
            << " mean_geodesic_error=" << mean << " dirichlet=" << dirichlet
            << '\n';
  for (const auto& [t, f] : curve)
    std::cout << "event=pck threshold=" << t << " fraction=" << f << '\n';

  if (!pck_path.empty()) gcm::write_pck_csv(curve, pck_path);
  if (!report_path.empty()) {
    json report;
    report["matched"] = n;
    report["mean_geodesic_error"] = mean;
    report["dirichlet"] = dirichlet;
    auto& pck = report["pck"] = json::array();
    for (const auto& [t, f] : curve)
      pck.push_back({{"threshold", t}, {"fraction", f}});
    std::ofstream out(report_path);
    if (!out) throw gcm::Error("cannot open " + report_path + " for writing");
    out << report.dump(2) << '\n';
  }
  return 0;
}

int run_transfer(const std::string& source_path, const std::string& target_path,
                 const std::string& corr_path, const std::string& out_path,
                 bool colors) {
  const gcm::TriMesh source = gcm::load_mesh(source_path);
  const gcm::TriMesh target = gcm::load_mesh(target_path);
  std::vector<std::int32_t> map = gcm::read_correspondence(corr_path);
  map.resize(source.vertex_count(), -1);

  std::vector<std::array<std::uint8_t, 3>> palette;
  if (colors) {
    // Color target vertices by normalised position so transferred vertices
    // inherit a location-coded color.
    const Eigen::RowVector3d lo = target.vertices.colwise().minCoeff();
    const Eigen::RowVector3d hi = target.vertices.colwise().maxCoeff();
    palette.resize(target.vertex_count());
    for (Eigen::Index i = 0; i < target.vertex_count(); ++i)
      for (int a = 0; a < 3; ++a) {
        const double span = hi[a] - lo[a];
        const double t =
            span > 0 ? (target.vertices(i, a) - lo[a]) / span : 0.5;
        palette[i][a] = std::uint8_t(std::lround(255.0 * t));
      }
  }
  const gcm::TriMesh out = gcm::transfer(map, source, target, palette);
  gcm::save_mesh(out, out_path);
  std::cout << "event=transfer vertices=" << out.vertex_count()
            << " out=" << out_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "gcmatch: globally consistent vertex matching between triangle meshes "
      "via a coupled cycle-product LP"};
  app.require_subcommand(1);

  MatchOptions match_opt;
  CLI::App* match = app.add_subcommand(
      "match", "match two meshes and write a vertex correspondence");
  add_match_options(match, match_opt);
  match->add_option("--out", match_opt.out_path, "correspondence output file");
  match->add_option("--report", match_opt.report_path, "JSON report output");
  match->add_option("--system-out", match_opt.system_out,
                    "also export the solved system as <stem>.mtx/.b.txt/"
                    ".meta.json");

  MatchOptions planar_opt;
  CLI::App* planar = app.add_subcommand(
      "planar-match",
      "match two triangulated planar (z = 0) meshes; rejects non-planar "
      "input");
  add_match_options(planar, planar_opt);
  planar->add_option("--out", planar_opt.out_path, "correspondence output");
  planar->add_option("--report", planar_opt.report_path, "JSON report output");
  planar_opt.planar = true;

  MatchOptions mps_opt;
  std::string mps_path;
  CLI::App* mps = app.add_subcommand(
      "export-mps", "build the LP and write it as a fixed-format MPS file");
  add_match_options(mps, mps_opt);
  mps->add_option("--out", mps_path, "MPS output file")->required();
  mps->add_option("--system-out", mps_opt.system_out,
                  "also export <stem>.mtx/.b.txt/.meta.json");

  MatchOptions oracle_opt;
  std::string oracle_out;
  std::int64_t oracle_max = 10'000'000;
  CLI::App* oracle = app.add_subcommand(
      "oracle",
      "exhaustively enumerate vertex maps (tiny inputs only) and report the "
      "cheapest consistent one");
  oracle->add_option("source", oracle_opt.source_path, "source mesh")
      ->required();
  oracle->add_option("target", oracle_opt.target_path, "target mesh")
      ->required();
  oracle->add_option("--norm", oracle_opt.norm, "feature distance")
      ->capture_default_str();
  oracle->add_option("--features-source", oracle_opt.features_source,
                     "per-vertex source features");
  oracle->add_option("--features-target", oracle_opt.features_target,
                     "per-vertex target features");
  oracle->add_option("--out", oracle_out, "correspondence output");
  oracle->add_option("--max-maps", oracle_max, "search space guard")
      ->capture_default_str();

  std::string eval_source, eval_target, eval_pred, eval_gt, eval_pck,
      eval_report;
  std::vector<double> eval_thresholds = {0.01, 0.02, 0.05, 0.1,
                                         0.15, 0.2,  0.25, 0.5};
  CLI::App* eval = app.add_subcommand(
      "eval", "score a correspondence against ground truth");
  eval->add_option("source", eval_source, "source mesh")->required();
  eval->add_option("target", eval_target, "target mesh")->required();
  eval->add_option("predicted", eval_pred, "predicted correspondence file")
      ->required();
  eval->add_option("ground-truth", eval_gt, "ground-truth correspondence")
      ->required();
  eval->add_option("--thresholds", eval_thresholds,
                   "PCK thresholds (normalised geodesic)")
      ->capture_default_str();
  eval->add_option("--pck-out", eval_pck, "PCK curve CSV output");
  eval->add_option("--report", eval_report, "JSON report output");

  std::string tr_source, tr_target, tr_corr, tr_out;
  bool tr_colors = true;
  CLI::App* tr = app.add_subcommand(
      "transfer",
      "move source vertices onto their matched target positions and save "
      "the result");
  tr->add_option("source", tr_source, "source mesh")->required();
  tr->add_option("target", tr_target, "target mesh")->required();
  tr->add_option("correspondence", tr_corr, "correspondence file")->required();
  tr->add_option("--out", tr_out, "output mesh (.ply keeps colors)")
      ->required();
  tr->add_flag("--colors,!--no-colors", tr_colors,
               "attach position-coded target colors")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*match) return run_match(match_opt);
    if (*planar) {
      planar_opt.planar = true;
      return run_match(planar_opt);
    }
    if (*mps) return run_export_mps(mps_opt, mps_path);
    if (*oracle) return run_oracle(oracle_opt, oracle_out, oracle_max);
    if (*eval)
      return run_eval(eval_source, eval_target, eval_pred, eval_gt,
                      eval_thresholds, eval_pck, eval_report);
    if (*tr)
      return run_transfer(tr_source, tr_target, tr_corr, tr_out, tr_colors);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
