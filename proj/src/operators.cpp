#include "ecgfwd/operators.hpp"

#include <cmath>
#include <vector>

#include "ecgfwd/errors.hpp"

namespace ecgfwd {

Eigen::SparseMatrix<double> cotan_laplacian(const SurfaceMesh& mesh) {
  const int n = mesh.n_vertices();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(mesh.n_faces()) * 12);
  for (int f = 0; f < mesh.n_faces(); ++f) {
    const int idx[3] = {mesh.faces(f, 0), mesh.faces(f, 1), mesh.faces(f, 2)};
    Eigen::Vector3d p[3];
    for (int k = 0; k < 3; ++k) p[k] = mesh.vertices.row(idx[k]);
    for (int k = 0; k < 3; ++k) {
      // Angle at vertex k is opposite edge (k+1, k+2).
      const Eigen::Vector3d u = p[(k + 1) % 3] - p[k];
      const Eigen::Vector3d v = p[(k + 2) % 3] - p[k];
      const double cross = u.cross(v).norm();
      if (cross <= 0.0)
        throw ValidationError("face " + std::to_string(f) + ": degenerate in cotangent assembly");
      const double half_cot = 0.5 * u.dot(v) / cross;
      const int i = idx[(k + 1) % 3], j = idx[(k + 2) % 3];
      trips.emplace_back(i, j, -half_cot);
      trips.emplace_back(j, i, -half_cot);
      trips.emplace_back(i, i, half_cot);
      trips.emplace_back(j, j, half_cot);
    }
  }
  Eigen::SparseMatrix<double> L(n, n);
  L.setFromTriplets(trips.begin(), trips.end());
  return L;
}

Eigen::VectorXd lumped_mass(const SurfaceMesh& mesh) {
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(mesh.n_vertices());
  for (int f = 0; f < mesh.n_faces(); ++f) {
    const double third = face_area(mesh, f) / 3.0;
    for (int k = 0; k < 3; ++k) mass[mesh.faces(f, k)] += third;
  }
  return mass;
}

Eigen::SparseMatrix<double> face_gradient_operator(const SurfaceMesh& mesh) {
  // Gradient of the piecewise-linear interpolant on face (a,b,c):
  //   grad u = (1 / 2A) n x (u_a (c-b) + u_b (a-c) + u_c (b-a))
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(mesh.n_faces()) * 9);
  for (int f = 0; f < mesh.n_faces(); ++f) {
    const int idx[3] = {mesh.faces(f, 0), mesh.faces(f, 1), mesh.faces(f, 2)};
    Eigen::Vector3d p[3];
    for (int k = 0; k < 3; ++k) p[k] = mesh.vertices.row(idx[k]);
    const Eigen::Vector3d cross = (p[1] - p[0]).cross(p[2] - p[0]);
    const double two_area = cross.norm();
    const Eigen::Vector3d normal = cross / two_area;
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d opposite = p[(k + 2) % 3] - p[(k + 1) % 3];
      const Eigen::Vector3d coeff = normal.cross(opposite) / two_area;
      for (int d = 0; d < 3; ++d) trips.emplace_back(3 * f + d, idx[k], coeff[d]);
    }
  }
  Eigen::SparseMatrix<double> G(3 * mesh.n_faces(), mesh.n_vertices());
  G.setFromTriplets(trips.begin(), trips.end());
  return G;
}

GeometricOperators build_operators(const SurfaceMesh& mesh, int K) {
  validate_mesh(mesh, /*require_landmarks=*/false);
  const int n = mesh.n_vertices();
  if (K < 1 || K > n)
    throw ValidationError("build_operators: K = " + std::to_string(K) +
                          " outside [1, N = " + std::to_string(n) + "]");

  GeometricOperators ops;
  ops.laplacian = cotan_laplacian(mesh);
  ops.mass = lumped_mass(mesh);
  ops.grad = face_gradient_operator(mesh);
  ops.face_area.resize(mesh.n_faces());
  ops.face_centroid.resize(mesh.n_faces(), 3);
  for (int f = 0; f < mesh.n_faces(); ++f) {
    ops.face_area[f] = face_area(mesh, f);
    ops.face_centroid.row(f) = face_centroid(mesh, f);
  }
  ops.K = K;

  // Symmetrized standard problem B = M^{-1/2} L M^{-1/2}; psi = M^{-1/2} u.
  const Eigen::VectorXd inv_sqrt_m = ops.mass.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd B = Eigen::MatrixXd(ops.laplacian);
  B = inv_sqrt_m.asDiagonal() * B * inv_sqrt_m.asDiagonal();
  B = 0.5 * (B + B.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(B);
  if (solver.info() != Eigen::Success)
    throw Error("build_operators: eigensolver failed to converge (0 of " + std::to_string(K) +
                " eigenpairs achieved)");
  ops.eigenvalues = solver.eigenvalues().head(K);
  ops.eigenfunctions = inv_sqrt_m.asDiagonal() * solver.eigenvectors().leftCols(K);
  return ops;
}

Eigen::MatrixX3d face_gradient_from_mesh(const SurfaceMesh& mesh, const Eigen::VectorXd& field) {
  if (field.size() != mesh.n_vertices())
    throw ValidationError("face_gradient: field length " + std::to_string(field.size()) +
                          " != vertex count " + std::to_string(mesh.n_vertices()));
  const Eigen::VectorXd flat = face_gradient_operator(mesh) * field;
  Eigen::MatrixX3d out(mesh.n_faces(), 3);
  for (int f = 0; f < mesh.n_faces(); ++f) out.row(f) = flat.segment<3>(3 * f);
  return out;
}

Eigen::MatrixX3d face_gradient(const GeometricOperators& ops, const Eigen::VectorXd& field) {
  if (field.size() != ops.mass.size())
    throw ValidationError("face_gradient: field length " + std::to_string(field.size()) +
                          " != vertex count " + std::to_string(ops.mass.size()));
  const Eigen::VectorXd flat = ops.grad * field;
  Eigen::MatrixX3d out(ops.n_faces(), 3);
  for (int f = 0; f < ops.n_faces(); ++f) out.row(f) = flat.segment<3>(3 * f);
  return out;
}

}  // namespace ecgfwd
