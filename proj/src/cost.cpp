#include "gcm/cost.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>

namespace gcm {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

FeatureTable from_rows(std::vector<std::vector<double>> rows,
                       const std::string& name) {
  if (rows.empty()) throw ParseError(name + ": no feature rows");
  const std::size_t dim = rows[0].size();
  if (dim == 0) throw ParseError(name + ": empty feature row");
  FeatureTable table;
  table.values.resize(rows.size(), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim)
      throw ParseError(name + ": row " + std::to_string(i) + " has " +
                       std::to_string(rows[i].size()) + " values, expected " +
                       std::to_string(dim));
    for (std::size_t j = 0; j < dim; ++j) table.values(i, j) = rows[i][j];
  }
  return table;
}

FeatureTable load_text(const std::filesystem::path& path, bool csv) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (csv) std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    std::vector<double> vals;
    double v;
    while (row >> v) vals.push_back(v);
    if (!row.eof())
      throw ParseError(path.string() + ": malformed feature line '" + line +
                       "'");
    if (!vals.empty()) rows.push_back(std::move(vals));
  }
  return from_rows(std::move(rows), path.string());
}

FeatureTable load_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::uint32_t rows = 0, dim = 0;
  in.read(reinterpret_cast<char*>(&rows), 4);
  in.read(reinterpret_cast<char*>(&dim), 4);
  if (!in) throw ParseError(path.string() + ": truncated binary header");
  if (rows == 0 || dim == 0)
    throw ParseError(path.string() + ": zero rows or dimension in header");
  std::vector<float> buf(std::size_t(rows) * dim);
  in.read(reinterpret_cast<char*>(buf.data()),
          std::streamsize(buf.size() * sizeof(float)));
  if (!in)
    throw ParseError(path.string() + ": truncated binary payload, expected " +
                     std::to_string(buf.size()) + " float32 values");
  FeatureTable table;
  table.values.resize(rows, dim);
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < dim; ++j)
      table.values(i, j) = double(buf[std::size_t(i) * dim + j]);
  return table;
}

}  // namespace

FeatureNorm parse_feature_norm(const std::string& name) {
  const std::string n = lower(name);
  if (n == "l2") return FeatureNorm::L2;
  if (n == "l1") return FeatureNorm::L1;
  if (n == "cosine") return FeatureNorm::Cosine;
  throw InvalidArgumentError("unknown feature norm '" + name +
                             "' (expected l2, l1 or cosine)");
}

std::string feature_norm_name(FeatureNorm norm) {
  switch (norm) {
    case FeatureNorm::L2: return "l2";
    case FeatureNorm::L1: return "l1";
    case FeatureNorm::Cosine: return "cosine";
  }
  return "?";
}

double feature_distance(const Eigen::RowVectorXd& a,
                        const Eigen::RowVectorXd& b, FeatureNorm norm) {
  switch (norm) {
    case FeatureNorm::L2: return (a - b).norm();
    case FeatureNorm::L1: return (a - b).lpNorm<1>();
    case FeatureNorm::Cosine: {
      const double na = a.norm(), nb = b.norm();
      if (na == 0.0 && nb == 0.0) return 0.0;
      if (na == 0.0 || nb == 0.0) return 1.0;
      // Clamp: rounding can push the ratio slightly past [-1, 1].
      const double c = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
      return 1.0 - c;
    }
  }
  return 0.0;
}

FeatureTable load_features(const std::filesystem::path& path,
                           const TriMesh& mesh) {
  const std::string ext = lower(path.extension().string());
  FeatureTable table;
  if (ext == ".csv")
    table = load_text(path, /*csv=*/true);
  else if (ext == ".bin" || ext == ".f32")
    table = load_binary(path);
  else
    table = load_text(path, /*csv=*/false);
  if (table.rows() != mesh.vertex_count())
    throw RowCountMismatchError(path.string() + ": " +
                                std::to_string(table.rows()) +
                                " feature rows for " +
                                std::to_string(mesh.vertex_count()) +
                                " mesh vertices");
  if (!table.values.allFinite())
    throw NonFiniteEntryError(path.string() +
                              ": feature table has NaN or infinite entries");
  return table;
}

FeatureTable xyz_features(const TriMesh& mesh, bool normalize) {
  FeatureTable table;
  table.values = mesh.vertices;
  if (normalize) {
    table.values.rowwise() -= table.values.colwise().mean();
    const double area = surface_area(mesh);
    if (area > 0.0) table.values /= std::sqrt(area);
  }
  return table;
}

std::vector<std::int32_t> nearest_vertex_map(const FeatureTable& fx,
                                             const FeatureTable& fy,
                                             FeatureNorm norm) {
  if (fx.dim() != fy.dim())
    throw DimensionMismatchError(
        "feature dimensions differ: " + std::to_string(fx.dim()) + " vs " +
        std::to_string(fy.dim()));
  if (fy.rows() == 0)
    throw InvalidArgumentError("target feature table is empty");
  std::vector<std::int32_t> phi(fx.rows());
  for (Eigen::Index x = 0; x < fx.rows(); ++x) {
    std::int32_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index y = 0; y < fy.rows(); ++y) {
      const double d = feature_distance(fx.values.row(x), fy.values.row(y),
                                        norm);
      if (d < best_d) {
        best_d = d;
        best = std::int32_t(y);
      }
    }
    phi[x] = best;
  }
  return phi;
}

Eigen::VectorXd compute_costs(const FeatureTable& fx, const FeatureTable& fy,
                              const ConstraintSystem& sys,
                              FeatureNorm norm) {
  if (fx.dim() != fy.dim())
    throw DimensionMismatchError(
        "feature dimensions differ: " + std::to_string(fx.dim()) + " vs " +
        std::to_string(fy.dim()));
  if (!fx.values.allFinite() || !fy.values.allFinite())
    throw NonFiniteEntryError("feature table has NaN or infinite entries");
  if (std::int64_t(sys.vars.size()) != sys.full_col_count)
    throw InvalidArgumentError("system lacks column metadata");

  // Cache distances between source/target vertex pairs when the pair count
  // is modest; the same pair appears in many columns (layers, twins).
  const bool cache = fx.rows() * fy.rows() <= 1 << 22;
  Eigen::MatrixXd dist;
  if (cache) dist = Eigen::MatrixXd::Constant(fx.rows(), fy.rows(), -1.0);
  auto d = [&](std::int32_t xv, std::int32_t yv) {
    if (xv < 0 || xv >= fx.rows())
      throw RowCountMismatchError("source feature table has " +
                                  std::to_string(fx.rows()) +
                                  " rows but vertex " + std::to_string(xv) +
                                  " is referenced");
    if (yv < 0 || yv >= fy.rows())
      throw RowCountMismatchError("target feature table has " +
                                  std::to_string(fy.rows()) +
                                  " rows but vertex " + std::to_string(yv) +
                                  " is referenced");
    if (!cache)
      return feature_distance(fx.values.row(xv), fy.values.row(yv), norm);
    double& slot = dist(xv, yv);
    if (slot < 0.0)
      slot = feature_distance(fx.values.row(xv), fy.values.row(yv), norm);
    return slot;
  };

  Eigen::VectorXd full(sys.full_col_count);
  for (std::int64_t c = 0; c < sys.full_col_count; ++c) {
    const VariableMeta& m = sys.vars[c];
    full[c] = d(m.x_tail, m.y_tail) + d(m.x_head, m.y_head);
  }
  if (!sys.reduced) return full;

  Eigen::VectorXd folded = Eigen::VectorXd::Zero(sys.col_count);
  for (std::int64_t c = 0; c < sys.full_col_count; ++c)
    if (sys.merge_map[c] >= 0) folded[sys.merge_map[c]] += full[c];
  return folded;
}

}  // namespace gcm
