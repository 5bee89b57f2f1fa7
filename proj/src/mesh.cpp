#include "gcm/mesh.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

namespace gcm {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

MeshFormat detect_format(const std::filesystem::path& path) {
  const std::string ext = lower(path.extension().string());
  if (ext == ".off") return MeshFormat::Off;
  if (ext == ".ply") return MeshFormat::Ply;
  throw ParseError("cannot detect mesh format from extension '" + ext +
                   "' of " + path.string());
}

// Returns the next line that carries content, with comments ('#' to end of
// line) stripped. Returns false at end of file.
bool next_content_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    if (line.find_first_not_of(" \t\r\n") != std::string::npos) return true;
  }
  return false;
}

void check_face(const TriMesh& mesh, Eigen::Index f) {
  for (int j = 0; j < 3; ++j) {
    const int v = mesh.faces(f, j);
    if (v < 0 || v >= mesh.vertex_count())
      throw InvalidMeshError("face " + std::to_string(f) +
                             " references vertex " + std::to_string(v) +
                             " out of range [0, " +
                             std::to_string(mesh.vertex_count()) + ")");
  }
  if (mesh.faces(f, 0) == mesh.faces(f, 1) ||
      mesh.faces(f, 1) == mesh.faces(f, 2) ||
      mesh.faces(f, 0) == mesh.faces(f, 2))
    throw InvalidMeshError("face " + std::to_string(f) +
                           " repeats a vertex");
}

TriMesh load_off(std::istream& in, const std::string& name) {
  std::string line;
  if (!next_content_line(in, line))
    throw ParseError(name + ": empty OFF file");
  {
    std::istringstream hdr(line);
    std::string magic;
    hdr >> magic;
    if (magic != "OFF")
      throw ParseError(name + ": expected OFF header, got '" + magic + "'");
    // Counts may share the header line or follow on the next one.
    long nv = -1, nf = -1, ne = -1;
    if (hdr >> nv >> nf >> ne) {
      // fall through with counts parsed
    } else {
      if (!next_content_line(in, line))
        throw ParseError(name + ": missing OFF counts line");
      std::istringstream counts(line);
      if (!(counts >> nv >> nf >> ne))
        throw ParseError(name + ": malformed OFF counts line '" + line + "'");
    }
    if (nv < 0 || nf < 0)
      throw ParseError(name + ": negative OFF counts");
    TriMesh mesh;
    mesh.vertices.resize(nv, 3);
    mesh.faces.resize(nf, 3);
    for (long i = 0; i < nv; ++i) {
      if (!next_content_line(in, line))
        throw ParseError(name + ": unexpected end of file in vertex list");
      std::istringstream row(line);
      double x, y, z;
      if (!(row >> x >> y >> z))
        throw ParseError(name + ": malformed vertex line '" + line + "'");
      mesh.vertices.row(i) << x, y, z;
    }
    for (long f = 0; f < nf; ++f) {
      if (!next_content_line(in, line))
        throw ParseError(name + ": unexpected end of file in face list");
      std::istringstream row(line);
      long count;
      if (!(row >> count))
        throw ParseError(name + ": malformed face line '" + line + "'");
      if (count != 3)
        throw InvalidMeshError(name + ": face " + std::to_string(f) + " has " +
                               std::to_string(count) +
                               " vertices; only triangles are supported");
      long a, b, c;
      if (!(row >> a >> b >> c))
        throw ParseError(name + ": malformed face line '" + line + "'");
      mesh.faces.row(f) << int(a), int(b), int(c);
      check_face(mesh, f);
    }
    return mesh;
  }
}

struct PlyProperty {
  std::string type;
  std::string name;
};

TriMesh load_ply(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line))
    throw ParseError(name + ": empty PLY file");
  if (line.substr(0, 3) != "ply")
    throw ParseError(name + ": missing 'ply' magic line");

  long nv = -1, nf = -1;
  std::vector<PlyProperty> vertex_props;
  bool saw_format = false, in_vertex = false, in_face = false,
       face_list_seen = false;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string keyword;
    if (!(row >> keyword)) continue;
    if (keyword == "comment") continue;
    if (keyword == "format") {
      std::string kind, version;
      row >> kind >> version;
      if (kind != "ascii")
        throw ParseError(name + ": only ascii PLY is supported, got format '" +
                         kind + "'");
      saw_format = true;
    } else if (keyword == "element") {
      std::string what;
      long count;
      if (!(row >> what >> count))
        throw ParseError(name + ": malformed element line '" + line + "'");
      in_vertex = in_face = false;
      if (what == "vertex") {
        nv = count;
        in_vertex = true;
      } else if (what == "face") {
        nf = count;
        in_face = true;
      } else {
        throw ParseError(name + ": unsupported PLY element '" + what + "'");
      }
    } else if (keyword == "property") {
      std::string type;
      row >> type;
      if (in_vertex) {
        if (type == "list")
          throw ParseError(name + ": list property on vertex element");
        std::string pname;
        row >> pname;
        vertex_props.push_back({type, pname});
      } else if (in_face) {
        if (type != "list")
          throw ParseError(name + ": face element needs a list property");
        std::string ctype, itype, pname;
        row >> ctype >> itype >> pname;
        if (pname != "vertex_indices" && pname != "vertex_index")
          throw ParseError(name + ": unsupported face property '" + pname +
                           "'");
        face_list_seen = true;
      } else {
        throw ParseError(name + ": property outside element");
      }
    } else if (keyword == "end_header") {
      break;
    } else {
      throw ParseError(name + ": unexpected header keyword '" + keyword + "'");
    }
  }
  if (!saw_format) throw ParseError(name + ": missing PLY format line");
  if (nv < 0) throw ParseError(name + ": missing vertex element");
  if (nf < 0) throw ParseError(name + ": missing face element");
  if (nf > 0 && !face_list_seen)
    throw ParseError(name + ": missing face vertex_indices property");

  int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
  for (int i = 0; i < int(vertex_props.size()); ++i) {
    const std::string& pname = vertex_props[i].name;
    if (pname == "x") ix = i;
    else if (pname == "y") iy = i;
    else if (pname == "z") iz = i;
    else if (pname == "red") ir = i;
    else if (pname == "green") ig = i;
    else if (pname == "blue") ib = i;
  }
  if (ix < 0 || iy < 0 || iz < 0)
    throw ParseError(name + ": vertex element lacks x/y/z properties");
  const bool has_colors = ir >= 0 && ig >= 0 && ib >= 0;

  TriMesh mesh;
  mesh.vertices.resize(nv, 3);
  mesh.faces.resize(nf, 3);
  if (has_colors) mesh.colors.resize(nv);
  std::vector<double> fields(vertex_props.size());
  for (long i = 0; i < nv; ++i) {
    if (!next_content_line(in, line))
      throw ParseError(name + ": unexpected end of file in vertex list");
    std::istringstream row(line);
    for (double& f : fields)
      if (!(row >> f))
        throw ParseError(name + ": malformed vertex line '" + line + "'");
    mesh.vertices.row(i) << fields[ix], fields[iy], fields[iz];
    if (has_colors)
      mesh.colors[i] = {std::uint8_t(fields[ir]), std::uint8_t(fields[ig]),
                        std::uint8_t(fields[ib])};
  }
  for (long f = 0; f < nf; ++f) {
    if (!next_content_line(in, line))
      throw ParseError(name + ": unexpected end of file in face list");
    std::istringstream row(line);
    long count;
    if (!(row >> count))
      throw ParseError(name + ": malformed face line '" + line + "'");
    if (count != 3)
      throw InvalidMeshError(name + ": face " + std::to_string(f) + " has " +
                             std::to_string(count) +
                             " vertices; only triangles are supported");
    long a, b, c;
    if (!(row >> a >> b >> c))
      throw ParseError(name + ": malformed face line '" + line + "'");
    mesh.faces.row(f) << int(a), int(b), int(c);
    check_face(mesh, f);
  }
  return mesh;
}

// 9 significant digits: enough for stable write/read round-trips while
// keeping files readable.
std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void save_off(const TriMesh& mesh, std::ostream& out) {
  out << "OFF\n"
      << mesh.vertex_count() << ' ' << mesh.face_count() << " 0\n";
  for (Eigen::Index i = 0; i < mesh.vertex_count(); ++i)
    out << fmt9(mesh.vertices(i, 0)) << ' ' << fmt9(mesh.vertices(i, 1)) << ' '
        << fmt9(mesh.vertices(i, 2)) << '\n';
  for (Eigen::Index f = 0; f < mesh.face_count(); ++f)
    out << "3 " << mesh.faces(f, 0) << ' ' << mesh.faces(f, 1) << ' '
        << mesh.faces(f, 2) << '\n';
}

void save_ply(const TriMesh& mesh, std::ostream& out) {
  const bool has_colors = !mesh.colors.empty();
  if (has_colors && Eigen::Index(mesh.colors.size()) != mesh.vertex_count())
    throw InvalidMeshError("color count " + std::to_string(mesh.colors.size()) +
                           " does not match vertex count " +
                           std::to_string(mesh.vertex_count()));
  out << "ply\nformat ascii 1.0\n"
      << "element vertex " << mesh.vertex_count() << '\n'
      << "property double x\nproperty double y\nproperty double z\n";
  if (has_colors)
    out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "element face " << mesh.face_count() << '\n'
      << "property list uchar int vertex_indices\nend_header\n";
  for (Eigen::Index i = 0; i < mesh.vertex_count(); ++i) {
    out << fmt9(mesh.vertices(i, 0)) << ' ' << fmt9(mesh.vertices(i, 1)) << ' '
        << fmt9(mesh.vertices(i, 2));
    if (has_colors)
      out << ' ' << int(mesh.colors[i][0]) << ' ' << int(mesh.colors[i][1])
          << ' ' << int(mesh.colors[i][2]);
    out << '\n';
  }
  for (Eigen::Index f = 0; f < mesh.face_count(); ++f)
    out << "3 " << mesh.faces(f, 0) << ' ' << mesh.faces(f, 1) << ' '
        << mesh.faces(f, 2) << '\n';
}

}  // namespace

TriMesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
  if (format == MeshFormat::Auto) format = detect_format(path);
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return format == MeshFormat::Off ? load_off(in, path.string())
                                   : load_ply(in, path.string());
}

void save_mesh(const TriMesh& mesh, const std::filesystem::path& path,
               MeshFormat format) {
  if (format == MeshFormat::Auto) format = detect_format(path);
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  if (format == MeshFormat::Off)
    save_off(mesh, out);
  else
    save_ply(mesh, out);
  if (!out) throw Error("write to " + path.string() + " failed");
}

double surface_area(const TriMesh& mesh) {
  double area = 0.0;
  for (Eigen::Index f = 0; f < mesh.face_count(); ++f) {
    const Eigen::Vector3d a = mesh.vertices.row(mesh.faces(f, 0));
    const Eigen::Vector3d b = mesh.vertices.row(mesh.faces(f, 1));
    const Eigen::Vector3d c = mesh.vertices.row(mesh.faces(f, 2));
    area += 0.5 * (b - a).cross(c - a).norm();
  }
  return area;
}

int degenerate_face_count(const TriMesh& mesh, double eps) {
  int count = 0;
  for (Eigen::Index f = 0; f < mesh.face_count(); ++f) {
    const Eigen::Vector3d a = mesh.vertices.row(mesh.faces(f, 0));
    const Eigen::Vector3d b = mesh.vertices.row(mesh.faces(f, 1));
    const Eigen::Vector3d c = mesh.vertices.row(mesh.faces(f, 2));
    if (0.5 * (b - a).cross(c - a).norm() <= eps) ++count;
  }
  return count;
}

void validate_mesh(const TriMesh& mesh) {
  if (mesh.vertex_count() == 0)
    throw InvalidMeshError("mesh has no vertices");
  if (mesh.face_count() == 0)
    throw InvalidMeshError("mesh has no faces");
  for (Eigen::Index f = 0; f < mesh.face_count(); ++f) check_face(mesh, f);

  // Count directed traversals of every undirected edge. A consistently
  // oriented manifold mesh traverses each interior edge exactly once per
  // direction and each boundary edge once in total.
  std::map<std::pair<int, int>, int> directed;
  for (Eigen::Index f = 0; f < mesh.face_count(); ++f)
    for (int j = 0; j < 3; ++j) {
      const int a = mesh.faces(f, j), b = mesh.faces(f, (j + 1) % 3);
      ++directed[{a, b}];
    }
  for (const auto& [edge, count] : directed) {
    const auto [a, b] = edge;
    auto rev = directed.find({b, a});
    const int total = count + (rev != directed.end() ? rev->second : 0);
    if (total > 2)
      throw NonManifoldError("edge (" + std::to_string(a) + ", " +
                             std::to_string(b) + ") is shared by " +
                             std::to_string(total) + " faces");
    if (count > 1)
      throw OrientationError("edge (" + std::to_string(a) + ", " +
                             std::to_string(b) +
                             ") is traversed twice in the same direction; "
                             "face windings are inconsistent");
  }

  // Isolated vertices and connectivity (BFS over vertices through edges).
  std::vector<char> seen(mesh.vertex_count(), 0);
  std::vector<std::vector<int>> adj(mesh.vertex_count());
  for (const auto& [edge, count] : directed) {
    adj[edge.first].push_back(edge.second);
    adj[edge.second].push_back(edge.first);
  }
  for (Eigen::Index v = 0; v < mesh.vertex_count(); ++v)
    if (adj[v].empty())
      throw InvalidMeshError("vertex " + std::to_string(v) +
                             " is not referenced by any face");
  std::vector<int> stack = {0};
  seen[0] = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int w : adj[v])
      if (!seen[w]) {
        seen[w] = 1;
        stack.push_back(w);
      }
  }
  const auto reached = std::count(seen.begin(), seen.end(), char(1));
  if (reached != mesh.vertex_count())
    throw InvalidMeshError("mesh has more than one connected component (" +
                           std::to_string(reached) + " of " +
                           std::to_string(mesh.vertex_count()) +
                           " vertices reachable from vertex 0)");
}

int ShapeGraph::boundary_edge_count() const {
  return int(std::count(opposite.begin(), opposite.end(), kNoEdge));
}

bool ShapeGraph::connected(std::int32_t v, std::int32_t w) const {
  return find_edge(v, w) != kNoEdge || find_edge(w, v) != kNoEdge;
}

EdgeId ShapeGraph::find_edge(std::int32_t v, std::int32_t w) const {
  for (EdgeId e : out_edges[v])
    if (head(e) == w) return e;
  return kNoEdge;
}

ShapeGraph build_shape_graph(const TriMesh& mesh) {
  validate_mesh(mesh);
  ShapeGraph g;
  g.vertex_count = std::int32_t(mesh.vertex_count());
  const Eigen::Index ne = 3 * mesh.face_count();
  g.edges.resize(ne, 2);
  g.opposite.assign(ne, kNoEdge);
  g.out_edges.resize(g.vertex_count);
  std::map<std::pair<int, int>, EdgeId> by_endpoints;
  for (Eigen::Index f = 0; f < mesh.face_count(); ++f)
    for (int j = 0; j < 3; ++j) {
      const EdgeId e = EdgeId(3 * f + j);
      const int a = mesh.faces(f, j), b = mesh.faces(f, (j + 1) % 3);
      g.edges.row(e) << a, b;
      g.out_edges[a].push_back(e);
      by_endpoints[{a, b}] = e;
    }
  for (EdgeId e = 0; e < ne; ++e) {
    auto rev = by_endpoints.find({g.head(e), g.tail(e)});
    if (rev != by_endpoints.end()) g.opposite[e] = rev->second;
  }
  return g;
}

ShapeGraph vertex_only_graph(std::int32_t vertex_count) {
  ShapeGraph g;
  g.vertex_count = vertex_count;
  g.edges.resize(0, 2);
  g.out_edges.resize(vertex_count);
  return g;
}

int euler_characteristic(const TriMesh& mesh) {
  std::map<std::pair<int, int>, char> undirected;
  for (Eigen::Index f = 0; f < mesh.face_count(); ++f)
    for (int j = 0; j < 3; ++j) {
      const int a = mesh.faces(f, j), b = mesh.faces(f, (j + 1) % 3);
      undirected[{std::min(a, b), std::max(a, b)}] = 1;
    }
  return int(mesh.vertex_count()) - int(undirected.size()) +
         int(mesh.face_count());
}

}  // namespace gcm
