#include "gcm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <set>

namespace gcm {

Eigen::VectorXd geodesic_distances(const TriMesh& mesh,
                                   std::int32_t source_vertex) {
  const std::int64_t nv = mesh.vertex_count();
  if (source_vertex < 0 || source_vertex >= nv)
    throw InvalidArgumentError("geodesic source vertex " +
                               std::to_string(source_vertex) +
                               " out of range");
  // Undirected weighted adjacency.
  std::vector<std::vector<std::pair<std::int32_t, double>>> adj(nv);
  std::set<std::pair<std::int32_t, std::int32_t>> seen;
  for (Eigen::Index f = 0; f < mesh.face_count(); ++f)
    for (int j = 0; j < 3; ++j) {
      const std::int32_t a = mesh.faces(f, j), b = mesh.faces(f, (j + 1) % 3);
      if (!seen.insert({std::min(a, b), std::max(a, b)}).second) continue;
      const double w =
          (mesh.vertices.row(a) - mesh.vertices.row(b)).norm();
      adj[a].emplace_back(b, w);
      adj[b].emplace_back(a, w);
    }

  Eigen::VectorXd dist = Eigen::VectorXd::Constant(
      nv, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, std::int32_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[source_vertex] = 0.0;
  heap.emplace(0.0, source_vertex);
  while (!heap.empty()) {
    const auto [d, v] = heap.top();
    heap.pop();
    if (d > dist[v]) continue;
    for (const auto& [w, len] : adj[v])
      if (d + len < dist[w]) {
        dist[w] = d + len;
        heap.emplace(dist[w], w);
      }
  }
  return dist;
}

Eigen::VectorXd geodesic_errors(const std::vector<std::int32_t>& predicted,
                                const std::vector<std::int32_t>& ground_truth,
                                const TriMesh& target) {
  const double area = surface_area(target);
  if (area <= 0.0)
    throw InvalidArgumentError("target surface area is not positive");
  const double scale = 1.0 / std::sqrt(area);

  Eigen::VectorXd errors = Eigen::VectorXd::Constant(
      predicted.size(), std::numeric_limits<double>::quiet_NaN());
  // One Dijkstra per distinct ground-truth vertex used.
  std::vector<Eigen::VectorXd> cache(target.vertex_count());
  std::vector<char> cached(target.vertex_count(), 0);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const std::int32_t p = predicted[i];
    if (p < 0) continue;
    if (p >= target.vertex_count())
      throw InvalidArgumentError("predicted target vertex " +
                                 std::to_string(p) + " out of range");
    if (i >= ground_truth.size() || ground_truth[i] < 0)
      throw MissingGroundTruthError(
          "no ground-truth entry for matched source vertex " +
          std::to_string(i));
    const std::int32_t g = ground_truth[i];
    if (g >= target.vertex_count())
      throw MissingGroundTruthError("ground-truth target vertex " +
                                    std::to_string(g) + " out of range");
    if (!cached[g]) {
      cache[g] = geodesic_distances(target, g);
      cached[g] = 1;
    }
    errors[i] = cache[g][p] * scale;
  }
  return errors;
}

std::vector<std::pair<double, double>> pck_curve(
    const Eigen::VectorXd& errors, const std::vector<double>& thresholds) {
  std::int64_t finite = 0;
  for (Eigen::Index i = 0; i < errors.size(); ++i)
    if (std::isfinite(errors[i])) ++finite;
  std::vector<std::pair<double, double>> curve;
  curve.reserve(thresholds.size());
  for (double t : thresholds) {
    std::int64_t hit = 0;
    for (Eigen::Index i = 0; i < errors.size(); ++i)
      if (std::isfinite(errors[i]) && errors[i] <= t) ++hit;
    curve.emplace_back(t, finite ? double(hit) / double(finite) : 0.0);
  }
  return curve;
}

void write_pck_csv(const std::vector<std::pair<double, double>>& curve,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "threshold,fraction\n";
  char buf[64];
  for (const auto& [t, f] : curve) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g\n", t, f);
    out << buf;
  }
  if (!out) throw Error("write to " + path.string() + " failed");
}

double dirichlet_energy(const std::vector<std::int32_t>& vertex_map,
                        const TriMesh& source, const TriMesh& target) {
  if (std::int64_t(vertex_map.size()) != source.vertex_count())
    throw InvalidArgumentError("vertex map size does not match source mesh");
  const double area = surface_area(target);
  if (area <= 0.0)
    throw InvalidArgumentError("target surface area is not positive");
  const Eigen::MatrixX3d q = target.vertices / area;

  double energy = 0.0;
  std::set<std::pair<std::int32_t, std::int32_t>> seen;
  for (Eigen::Index f = 0; f < source.face_count(); ++f)
    for (int j = 0; j < 3; ++j) {
      const std::int32_t a = source.faces(f, j),
                         b = source.faces(f, (j + 1) % 3);
      if (!seen.insert({std::min(a, b), std::max(a, b)}).second) continue;
      const std::int32_t ya = vertex_map[a], yb = vertex_map[b];
      if (ya < 0 || yb < 0) continue;
      if (ya >= target.vertex_count() || yb >= target.vertex_count())
        throw InvalidArgumentError("vertex map references target vertex "
                                   "out of range");
      energy += (q.row(ya) - q.row(yb)).squaredNorm();
    }
  return energy;
}

TriMesh transfer(const std::vector<std::int32_t>& vertex_map,
                 const TriMesh& source, const TriMesh& target,
                 const std::vector<std::array<std::uint8_t, 3>>&
                     target_colors) {
  if (std::int64_t(vertex_map.size()) != source.vertex_count())
    throw InvalidArgumentError("vertex map size does not match source mesh");
  if (!target_colors.empty() &&
      std::int64_t(target_colors.size()) != target.vertex_count())
    throw InvalidArgumentError("color table size does not match target mesh");
  TriMesh out;
  out.vertices = source.vertices;
  out.faces = source.faces;
  if (!target_colors.empty())
    out.colors.assign(source.vertex_count(), {128, 128, 128});
  for (Eigen::Index i = 0; i < source.vertex_count(); ++i) {
    const std::int32_t y = vertex_map[i];
    if (y < 0) continue;
    if (y >= target.vertex_count())
      throw InvalidArgumentError("vertex map references target vertex "
                                 "out of range");
    out.vertices.row(i) = target.vertices.row(y);
    if (!target_colors.empty()) out.colors[i] = target_colors[y];
  }
  return out;
}

}  // namespace gcm
