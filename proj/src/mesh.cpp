#include "ecgfwd/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ecgfwd/errors.hpp"

namespace ecgfwd {

namespace {

constexpr double kMinFaceArea = 1e-9;  // mm^2

Eigen::Vector3d cross_of_face(const SurfaceMesh& mesh, int f) {
  const auto a = mesh.vertices.row(mesh.faces(f, 0));
  const auto b = mesh.vertices.row(mesh.faces(f, 1));
  const auto c = mesh.vertices.row(mesh.faces(f, 2));
  return (b - a).cross(c - a);
}

}  // namespace

Eigen::Vector3d face_normal(const SurfaceMesh& mesh, int f) {
  return cross_of_face(mesh, f).normalized();
}

double face_area(const SurfaceMesh& mesh, int f) {
  return 0.5 * cross_of_face(mesh, f).norm();
}

Eigen::Vector3d face_centroid(const SurfaceMesh& mesh, int f) {
  return (mesh.vertices.row(mesh.faces(f, 0)) + mesh.vertices.row(mesh.faces(f, 1)) +
          mesh.vertices.row(mesh.faces(f, 2))) /
         3.0;
}

double total_area(const SurfaceMesh& mesh) {
  double area = 0.0;
  for (int f = 0; f < mesh.n_faces(); ++f) area += face_area(mesh, f);
  return area;
}

std::vector<std::pair<int, int>> mesh_edges(const SurfaceMesh& mesh) {
  std::set<std::pair<int, int>> edges;
  for (int f = 0; f < mesh.n_faces(); ++f) {
    for (int e = 0; e < 3; ++e) {
      int i = mesh.faces(f, e), j = mesh.faces(f, (e + 1) % 3);
      edges.insert({std::min(i, j), std::max(i, j)});
    }
  }
  return {edges.begin(), edges.end()};
}

void validate_mesh(const SurfaceMesh& mesh, bool require_landmarks) {
  const int n = mesh.n_vertices();
  const int nf = mesh.n_faces();
  if (n < 3 || nf < 1) throw ValidationError("mesh: needs at least 3 vertices and 1 face");
  if (!mesh.vertices.allFinite()) throw ValidationError("mesh: non-finite vertex coordinate");

  std::map<std::pair<int, int>, int> edge_count;
  for (int f = 0; f < nf; ++f) {
    for (int e = 0; e < 3; ++e) {
      const int idx = mesh.faces(f, e);
      if (idx < 0 || idx >= n)
        throw ValidationError("face " + std::to_string(f) + ": vertex index " +
                              std::to_string(idx) + " out of range [0," + std::to_string(n) + ")");
    }
    if (mesh.faces(f, 0) == mesh.faces(f, 1) || mesh.faces(f, 1) == mesh.faces(f, 2) ||
        mesh.faces(f, 0) == mesh.faces(f, 2))
      throw ValidationError("face " + std::to_string(f) + ": repeated vertex index");
    if (face_area(mesh, f) <= kMinFaceArea)
      throw ValidationError("face " + std::to_string(f) + ": degenerate (area <= 1e-9 mm^2)");
    for (int e = 0; e < 3; ++e) {
      int i = mesh.faces(f, e), j = mesh.faces(f, (e + 1) % 3);
      edge_count[{std::min(i, j), std::max(i, j)}]++;
    }
  }
  for (const auto& [edge, count] : edge_count) {
    if (count > 2)
      throw ValidationError("edge (" + std::to_string(edge.first) + "," +
                            std::to_string(edge.second) + "): shared by " +
                            std::to_string(count) + " faces (non-manifold)");
  }

  // Connectivity over the edge graph; an unreferenced vertex counts as
  // disconnected.
  std::vector<std::vector<int>> adj(n);
  for (const auto& [edge, count] : edge_count) {
    adj[edge.first].push_back(edge.second);
    adj[edge.second].push_back(edge.first);
  }
  std::vector<char> seen(n, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int reached = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : adj[v])
      if (!seen[w]) {
        seen[w] = 1;
        ++reached;
        stack.push_back(w);
      }
  }
  if (reached != n) {
    int first = 0;
    while (seen[first]) ++first;
    throw ValidationError("mesh: disconnected (vertex " + std::to_string(first) +
                          " unreachable from vertex 0)");
  }

  if (mesh.fibres.rows() > 0) {
    if (mesh.fibres.rows() != nf)
      throw ValidationError("fibres: expected one row per face, got " +
                            std::to_string(mesh.fibres.rows()));
    for (int f = 0; f < nf; ++f) {
      const Eigen::Vector3d fib = mesh.fibres.row(f);
      if (std::abs(fib.norm() - 1.0) > 1e-6)
        throw ValidationError("fibre " + std::to_string(f) + ": not unit norm");
      if (std::abs(fib.dot(face_normal(mesh, f))) > 1e-6)
        throw ValidationError("fibre " + std::to_string(f) + ": not in face plane");
    }
  }

  if (mesh.uac.rows() > 0) {
    if (mesh.uac.rows() != n)
      throw ValidationError("uac: expected one row per vertex, got " +
                            std::to_string(mesh.uac.rows()));
    for (int i = 0; i < n; ++i) {
      if (!(mesh.uac(i, 0) >= 0.0 && mesh.uac(i, 0) <= 1.0 && mesh.uac(i, 1) >= 0.0 &&
            mesh.uac(i, 1) <= 1.0))
        throw ValidationError("uac " + std::to_string(i) + ": value outside [0,1]");
    }
  }

  const bool any_landmarks = !mesh.landmarks.alpha0.empty() || !mesh.landmarks.alpha1.empty() ||
                             !mesh.landmarks.beta0.empty() || !mesh.landmarks.beta1.empty();
  if (require_landmarks || any_landmarks) {
    const std::pair<const char*, const std::vector<int>*> sets[] = {
        {"alpha0", &mesh.landmarks.alpha0},
        {"alpha1", &mesh.landmarks.alpha1},
        {"beta0", &mesh.landmarks.beta0},
        {"beta1", &mesh.landmarks.beta1}};
    std::map<int, const char*> owner;
    for (const auto& [name, indices] : sets) {
      if (require_landmarks && indices->empty())
        throw ValidationError(std::string("landmarks: set '") + name + "' is missing or empty");
      for (int idx : *indices) {
        if (idx < 0 || idx >= n)
          throw ValidationError(std::string("landmarks: '") + name + "' index " +
                                std::to_string(idx) + " out of range");
        auto [it, inserted] = owner.insert({idx, name});
        if (!inserted)
          throw ValidationError("landmarks: vertex " + std::to_string(idx) + " in both '" +
                                it->second + "' and '" + name + "'");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// JSON + OFF I/O

std::string mesh_to_json(const SurfaceMesh& mesh) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  auto verts = nlohmann::json::array();
  for (int i = 0; i < mesh.n_vertices(); ++i)
    verts.push_back({mesh.vertices(i, 0), mesh.vertices(i, 1), mesh.vertices(i, 2)});
  j["vertices"] = std::move(verts);
  auto faces = nlohmann::json::array();
  for (int f = 0; f < mesh.n_faces(); ++f)
    faces.push_back({mesh.faces(f, 0), mesh.faces(f, 1), mesh.faces(f, 2)});
  j["faces"] = std::move(faces);
  if (mesh.fibres.rows() > 0) {
    auto fib = nlohmann::json::array();
    for (int f = 0; f < mesh.fibres.rows(); ++f)
      fib.push_back({mesh.fibres(f, 0), mesh.fibres(f, 1), mesh.fibres(f, 2)});
    j["fibres"] = std::move(fib);
  }
  if (mesh.uac.rows() > 0) {
    auto uac = nlohmann::json::array();
    for (int i = 0; i < mesh.uac.rows(); ++i) uac.push_back({mesh.uac(i, 0), mesh.uac(i, 1)});
    j["uac"] = std::move(uac);
  }
  j["landmarks"] = {{"alpha0", mesh.landmarks.alpha0},
                    {"alpha1", mesh.landmarks.alpha1},
                    {"beta0", mesh.landmarks.beta0},
                    {"beta1", mesh.landmarks.beta1}};
  return j.dump();
}

SurfaceMesh mesh_from_json(const std::string& text, const std::string& origin) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(origin + ": malformed JSON: " + e.what());
  }
  SurfaceMesh mesh;
  try {
    const auto& verts = j.at("vertices");
    mesh.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
    for (size_t i = 0; i < verts.size(); ++i)
      for (int k = 0; k < 3; ++k) mesh.vertices(static_cast<Eigen::Index>(i), k) = verts[i].at(k).get<double>();
    const auto& faces = j.at("faces");
    mesh.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
    for (size_t f = 0; f < faces.size(); ++f)
      for (int k = 0; k < 3; ++k) mesh.faces(static_cast<Eigen::Index>(f), k) = faces[f].at(k).get<int>();
    if (j.contains("fibres")) {
      const auto& fib = j["fibres"];
      mesh.fibres.resize(static_cast<Eigen::Index>(fib.size()), 3);
      for (size_t f = 0; f < fib.size(); ++f)
        for (int k = 0; k < 3; ++k) mesh.fibres(static_cast<Eigen::Index>(f), k) = fib[f].at(k).get<double>();
    }
    if (j.contains("uac")) {
      const auto& uac = j["uac"];
      mesh.uac.resize(static_cast<Eigen::Index>(uac.size()), 2);
      for (size_t i = 0; i < uac.size(); ++i)
        for (int k = 0; k < 2; ++k) mesh.uac(static_cast<Eigen::Index>(i), k) = uac[i].at(k).get<double>();
    }
    if (j.contains("landmarks")) {
      const auto& lm = j["landmarks"];
      auto read_set = [&](const char* name) {
        std::vector<int> out;
        if (lm.contains(name)) out = lm[name].get<std::vector<int>>();
        return out;
      };
      mesh.landmarks.alpha0 = read_set("alpha0");
      mesh.landmarks.alpha1 = read_set("alpha1");
      mesh.landmarks.beta0 = read_set("beta0");
      mesh.landmarks.beta1 = read_set("beta1");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(origin + ": malformed mesh document: " + e.what());
  }
  // Landmarks stay optional at load time (a bare geometry file is a valid
  // mesh); consumers that need them ask via validate_mesh(mesh, true).
  validate_mesh(mesh, /*require_landmarks=*/false);
  return mesh;
}

namespace {

SurfaceMesh load_off(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string header;
  in >> header;
  if (header != "OFF") throw ValidationError(path + ": not an OFF file");
  int n = 0, nf = 0, ne = 0;
  in >> n >> nf >> ne;
  if (!in || n < 3 || nf < 1) throw ValidationError(path + ": bad OFF counts");
  SurfaceMesh mesh;
  mesh.vertices.resize(n, 3);
  for (int i = 0; i < n; ++i) in >> mesh.vertices(i, 0) >> mesh.vertices(i, 1) >> mesh.vertices(i, 2);
  mesh.faces.resize(nf, 3);
  for (int f = 0; f < nf; ++f) {
    int k = 0;
    in >> k;
    if (k != 3) throw ValidationError(path + ": face " + std::to_string(f) + " is not a triangle");
    in >> mesh.faces(f, 0) >> mesh.faces(f, 1) >> mesh.faces(f, 2);
  }
  if (!in) throw ValidationError(path + ": truncated OFF file");
  validate_mesh(mesh, /*require_landmarks=*/false);
  return mesh;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

SurfaceMesh load_mesh(const std::string& path) {
  if (ends_with(path, ".off") || ends_with(path, ".OFF")) return load_off(path);
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return mesh_from_json(buf.str(), path);
}

void save_mesh(const SurfaceMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << mesh_to_json(mesh) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Refinement

SurfaceMesh subdivide(const SurfaceMesh& mesh) {
  validate_mesh(mesh, /*require_landmarks=*/false);
  const int n = mesh.n_vertices();
  const int nf = mesh.n_faces();

  std::map<std::pair<int, int>, int> midpoint;
  auto mid_index = [&](int i, int j) {
    auto key = std::make_pair(std::min(i, j), std::max(i, j));
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    int idx = n + static_cast<int>(midpoint.size());
    midpoint.emplace(key, idx);
    return idx;
  };

  SurfaceMesh out;
  out.faces.resize(4 * nf, 3);
  const bool with_fibres = mesh.has_fibres();
  if (with_fibres) out.fibres.resize(4 * nf, 3);
  for (int f = 0; f < nf; ++f) {
    const int a = mesh.faces(f, 0), b = mesh.faces(f, 1), c = mesh.faces(f, 2);
    const int ab = mid_index(a, b), bc = mid_index(b, c), ca = mid_index(c, a);
    out.faces.row(4 * f + 0) << a, ab, ca;
    out.faces.row(4 * f + 1) << ab, b, bc;
    out.faces.row(4 * f + 2) << ca, bc, c;
    out.faces.row(4 * f + 3) << ab, bc, ca;
    if (with_fibres)
      for (int k = 0; k < 4; ++k) out.fibres.row(4 * f + k) = mesh.fibres.row(f);
  }

  const int n_new = n + static_cast<int>(midpoint.size());
  out.vertices.resize(n_new, 3);
  out.vertices.topRows(n) = mesh.vertices;
  const bool with_uac = mesh.has_uac();
  if (with_uac) {
    out.uac.resize(n_new, 2);
    out.uac.topRows(n) = mesh.uac;
  }
  for (const auto& [edge, idx] : midpoint) {
    out.vertices.row(idx) = 0.5 * (mesh.vertices.row(edge.first) + mesh.vertices.row(edge.second));
    if (with_uac) out.uac.row(idx) = 0.5 * (mesh.uac.row(edge.first) + mesh.uac.row(edge.second));
  }

  auto lift_set = [&](const std::vector<int>& set) {
    std::vector<int> lifted = set;
    std::set<int> members(set.begin(), set.end());
    for (const auto& [edge, idx] : midpoint)
      if (members.count(edge.first) && members.count(edge.second)) lifted.push_back(idx);
    std::sort(lifted.begin(), lifted.end());
    return lifted;
  };
  out.landmarks.alpha0 = lift_set(mesh.landmarks.alpha0);
  out.landmarks.alpha1 = lift_set(mesh.landmarks.alpha1);
  out.landmarks.beta0 = lift_set(mesh.landmarks.beta0);
  out.landmarks.beta1 = lift_set(mesh.landmarks.beta1);
  return out;
}

SurfaceMesh make_icosphere(int subdivisions, double radius) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  SurfaceMesh mesh;
  mesh.vertices.resize(12, 3);
  mesh.vertices << -1, phi, 0, 1, phi, 0, -1, -phi, 0, 1, -phi, 0, 0, -1, phi, 0, 1, phi, 0, -1,
      -phi, 0, 1, -phi, phi, 0, -1, phi, 0, 1, -phi, 0, -1, -phi, 0, 1;
  mesh.faces.resize(20, 3);
  mesh.faces << 0, 11, 5, 0, 5, 1, 0, 1, 7, 0, 7, 10, 0, 10, 11, 1, 5, 9, 5, 11, 4, 11, 10, 2, 10,
      7, 6, 7, 1, 8, 3, 9, 4, 3, 4, 2, 3, 2, 6, 3, 6, 8, 3, 8, 9, 4, 9, 5, 2, 4, 11, 6, 2, 10, 8,
      6, 7, 9, 8, 1;
  auto project = [&](SurfaceMesh& m) {
    for (int i = 0; i < m.n_vertices(); ++i)
      m.vertices.row(i) = m.vertices.row(i).normalized() * radius;
  };
  project(mesh);
  for (int s = 0; s < subdivisions; ++s) {
    mesh = subdivide(mesh);
    project(mesh);
  }
  return mesh;
}

}  // namespace ecgfwd
