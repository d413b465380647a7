#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace ecgfwd {

using FaceMatrix = Eigen::Matrix<int, Eigen::Dynamic, 3>;

/// Named boundary vertex sets used as Dirichlet anchors for the two
/// harmonic surface coordinates.
struct Landmarks {
  std::vector<int> alpha0;
  std::vector<int> alpha1;
  std::vector<int> beta0;
  std::vector<int> beta1;

  bool all_present() const {
    return !alpha0.empty() && !alpha1.empty() && !beta0.empty() && !beta1.empty();
  }
};

/// Triangulated atrial surface. Lengths are millimetres throughout.
///
/// `fibres` (one unit tangent per face) and `uac` (one (alpha, beta) pair in
/// [0,1]^2 per vertex) are optional and empty until computed or loaded.
struct SurfaceMesh {
  Eigen::MatrixX3d vertices;  // N x 3, mm
  FaceMatrix faces;           // F x 3, vertex indices
  Eigen::MatrixX3d fibres;    // F x 3, unit, in face plane; may be empty
  Eigen::MatrixX2d uac;       // N x 2 in [0,1]^2; may be empty
  Landmarks landmarks;

  int n_vertices() const { return static_cast<int>(vertices.rows()); }
  int n_faces() const { return static_cast<int>(faces.rows()); }
  bool has_fibres() const { return fibres.rows() == faces.rows() && faces.rows() > 0; }
  bool has_uac() const { return uac.rows() == vertices.rows() && vertices.rows() > 0; }
};

Eigen::Vector3d face_normal(const SurfaceMesh& mesh, int f);
double face_area(const SurfaceMesh& mesh, int f);
Eigen::Vector3d face_centroid(const SurfaceMesh& mesh, int f);
double total_area(const SurfaceMesh& mesh);

/// Checks all structural invariants: index ranges, non-degenerate faces,
/// edge-manifoldness, connectivity, and (when present) fibre/uac/landmark
/// consistency. Throws ValidationError naming the offending element.
/// `require_landmarks` additionally demands the four non-empty landmark sets
/// (generator outputs and the JSON mesh format carry them; plain geometry
/// imports do not).
void validate_mesh(const SurfaceMesh& mesh, bool require_landmarks = true);

/// Loads a mesh from `path`. ".json" files must follow the full mesh schema
/// (landmarks required, fibres/uac optional); ".off" files are accepted for
/// geometry only.
SurfaceMesh load_mesh(const std::string& path);
void save_mesh(const SurfaceMesh& mesh, const std::string& path);

/// Mesh JSON (de)serialization used by load_mesh/save_mesh. Round-trips all
/// finite values bit-exactly.
std::string mesh_to_json(const SurfaceMesh& mesh);
SurfaceMesh mesh_from_json(const std::string& text, const std::string& origin = "<string>");

/// One 1-to-4 midpoint refinement. Fibres are copied to child faces, uac is
/// averaged onto edge midpoints, and a midpoint joins a landmark set when
/// both edge endpoints belong to it.
SurfaceMesh subdivide(const SurfaceMesh& mesh);

/// Unit-sphere triangulation from `subdivisions` midpoint refinements of an
/// icosahedron (12, 42, 162, 642, 2562, ... vertices). Geometry only; no
/// landmarks or fibres.
SurfaceMesh make_icosphere(int subdivisions, double radius = 1.0);

/// Undirected edge list (i < j per row).
std::vector<std::pair<int, int>> mesh_edges(const SurfaceMesh& mesh);

}  // namespace ecgfwd
