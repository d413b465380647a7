#include "ecgfwd/synth.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "ecgfwd/errors.hpp"
#include "ecgfwd/operators.hpp"
#include "ecgfwd/rng.hpp"
#include "ecgfwd/uac.hpp"

namespace ecgfwd {

namespace {

// Tessellates a res_u x res_v parametric grid into triangles with
// alternating quad diagonals, and designates the four grid boundaries as
// landmark sets (corners assigned to the alpha sets only, so sets stay
// disjoint).
SurfaceMesh grid_patch(int res_u, int res_v,
                       const std::function<Eigen::Vector3d(double, double)>& position) {
  if (res_u < 4 || res_v < 4) throw ValidationError("grid_patch: resolution must be >= 4 per axis");
  SurfaceMesh mesh;
  mesh.vertices.resize(res_u * res_v, 3);
  for (int i = 0; i < res_u; ++i) {
    const double u = static_cast<double>(i) / (res_u - 1);
    for (int j = 0; j < res_v; ++j) {
      const double v = static_cast<double>(j) / (res_v - 1);
      mesh.vertices.row(i * res_v + j) = position(u, v);
    }
  }
  mesh.faces.resize(2 * (res_u - 1) * (res_v - 1), 3);
  int f = 0;
  for (int i = 0; i + 1 < res_u; ++i) {
    for (int j = 0; j + 1 < res_v; ++j) {
      const int a = i * res_v + j, b = i * res_v + j + 1;
      const int c = (i + 1) * res_v + j, d = (i + 1) * res_v + j + 1;
      if ((i + j) % 2 == 0) {
        mesh.faces.row(f++) << a, c, d;
        mesh.faces.row(f++) << a, d, b;
      } else {
        mesh.faces.row(f++) << a, c, b;
        mesh.faces.row(f++) << b, c, d;
      }
    }
  }
  for (int j = 0; j < res_v; ++j) {
    mesh.landmarks.alpha0.push_back(j);
    mesh.landmarks.alpha1.push_back((res_u - 1) * res_v + j);
  }
  for (int i = 1; i + 1 < res_u; ++i) {
    mesh.landmarks.beta0.push_back(i * res_v);
    mesh.landmarks.beta1.push_back(i * res_v + res_v - 1);
  }
  return mesh;
}

void punch_holes(SurfaceMesh& mesh, int res_u, int res_v, int holes, Rng& rng) {
  if (holes <= 0) return;
  std::vector<std::pair<int, int>> centers;
  int attempts = 0;
  while (static_cast<int>(centers.size()) < holes && attempts < 1000) {
    ++attempts;
    const int i = 3 + static_cast<int>(rng.below(static_cast<uint64_t>(res_u - 6)));
    const int j = 3 + static_cast<int>(rng.below(static_cast<uint64_t>(res_v - 6)));
    bool ok = true;
    for (const auto& [ci, cj] : centers)
      if (std::max(std::abs(ci - i), std::abs(cj - j)) < 4) ok = false;
    if (ok) centers.emplace_back(i, j);
  }
  if (static_cast<int>(centers.size()) < holes)
    throw ValidationError("gen_synthetic_atrium: could not place " + std::to_string(holes) +
                          " holes at this resolution");

  std::vector<char> drop_vertex(mesh.n_vertices(), 0);
  for (const auto& [ci, cj] : centers) drop_vertex[ci * res_v + cj] = 1;

  std::vector<int> keep_faces;
  for (int f = 0; f < mesh.n_faces(); ++f) {
    bool keep = true;
    for (int k = 0; k < 3; ++k)
      if (drop_vertex[mesh.faces(f, k)]) keep = false;
    if (keep) keep_faces.push_back(f);
  }

  // Compact vertices (hole centers become unreferenced) and remap.
  std::vector<int> remap(mesh.n_vertices(), -1);
  int next = 0;
  for (int i = 0; i < mesh.n_vertices(); ++i)
    if (!drop_vertex[i]) remap[i] = next++;
  Eigen::MatrixX3d vertices(next, 3);
  for (int i = 0; i < mesh.n_vertices(); ++i)
    if (remap[i] >= 0) vertices.row(remap[i]) = mesh.vertices.row(i);
  FaceMatrix faces(static_cast<Eigen::Index>(keep_faces.size()), 3);
  for (size_t f = 0; f < keep_faces.size(); ++f)
    for (int k = 0; k < 3; ++k)
      faces(static_cast<Eigen::Index>(f), k) = remap[mesh.faces(keep_faces[f], k)];
  auto remap_set = [&](std::vector<int>& set) {
    for (int& idx : set) idx = remap[idx];
  };
  mesh.vertices = std::move(vertices);
  mesh.faces = std::move(faces);
  remap_set(mesh.landmarks.alpha0);
  remap_set(mesh.landmarks.alpha1);
  remap_set(mesh.landmarks.beta0);
  remap_set(mesh.landmarks.beta1);
}

}  // namespace

SurfaceMesh gen_synthetic_atrium(const AtriumParams& params, uint64_t seed) {
  if (params.res_u * params.res_v < 200)
    throw ValidationError("gen_synthetic_atrium: resolution must yield >= 200 vertices");
  if (params.holes < 0) throw ValidationError("gen_synthetic_atrium: negative hole count");
  Rng rng(mix_seed(seed, 0x4154ULL));

  struct BumpMode {
    double amp, freq_u, freq_v, phase_u, phase_v;
  };
  std::vector<BumpMode> modes;
  for (int m = 0; m < params.bump_modes; ++m) {
    BumpMode mode;
    mode.amp = params.bump_amplitude * rng.uniform(0.3, 1.0) / std::max(1, params.bump_modes);
    mode.freq_u = 1.0 + static_cast<double>(rng.below(3));
    mode.freq_v = 1.0 + static_cast<double>(rng.below(3));
    mode.phase_u = rng.uniform(0.0, 2.0 * std::numbers::pi);
    mode.phase_v = rng.uniform(0.0, 2.0 * std::numbers::pi);
    modes.push_back(mode);
  }

  constexpr double kPi = std::numbers::pi;
  const double theta0 = 0.25 * kPi, theta1 = 0.80 * kPi;
  const double phi0 = 0.10 * kPi, phi1 = 1.90 * kPi;
  auto position = [&](double u, double v) {
    const double theta = theta0 + u * (theta1 - theta0);
    const double phi = phi0 + v * (phi1 - phi0);
    double r = 1.0;
    for (const auto& m : modes)
      r += m.amp * std::sin(m.freq_u * theta + m.phase_u) * std::cos(m.freq_v * phi + m.phase_v);
    return Eigen::Vector3d(params.radius_mm * r * params.aspect_x * std::sin(theta) * std::cos(phi),
                           params.radius_mm * r * params.aspect_y * std::sin(theta) * std::sin(phi),
                           params.radius_mm * r * params.aspect_z * std::cos(theta));
  };

  SurfaceMesh mesh = grid_patch(params.res_u, params.res_v, position);
  punch_holes(mesh, params.res_u, params.res_v, params.holes, rng);
  validate_mesh(mesh, /*require_landmarks=*/true);

  compute_uac(mesh);

  // Fibres follow the tangential gradient of beta; alpha is the fallback
  // where that degenerates, then the first edge direction as a last resort.
  const Eigen::MatrixX3d grad_beta = face_gradient_from_mesh(mesh, mesh.uac.col(1));
  const Eigen::MatrixX3d grad_alpha = face_gradient_from_mesh(mesh, mesh.uac.col(0));
  mesh.fibres.resize(mesh.n_faces(), 3);
  for (int f = 0; f < mesh.n_faces(); ++f) {
    Eigen::Vector3d dir = grad_beta.row(f);
    if (dir.norm() < 1e-8) dir = grad_alpha.row(f);
    if (dir.norm() < 1e-8)
      dir = (mesh.vertices.row(mesh.faces(f, 1)) - mesh.vertices.row(mesh.faces(f, 0)));
    mesh.fibres.row(f) = dir.normalized();
  }

  validate_mesh(mesh, /*require_landmarks=*/true);
  return mesh;
}

SurfaceMesh make_sheet(int res_u, int res_v, double width, double height) {
  if (width <= 0.0 || height <= 0.0) throw ValidationError("make_sheet: non-positive extent");
  SurfaceMesh mesh = grid_patch(res_u, res_v, [&](double u, double v) {
    return Eigen::Vector3d(u * width, v * height, 0.0);
  });
  validate_mesh(mesh, /*require_landmarks=*/true);
  compute_uac(mesh);
  mesh.fibres.resize(mesh.n_faces(), 3);
  mesh.fibres.rowwise() = Eigen::RowVector3d(0.0, 1.0, 0.0);
  validate_mesh(mesh, /*require_landmarks=*/true);
  return mesh;
}

}  // namespace ecgfwd
