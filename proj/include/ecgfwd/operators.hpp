#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "ecgfwd/mesh.hpp"

namespace ecgfwd {

/// Precomputed discrete differential operators for one mesh.
///
/// laplacian: symmetric cotangent stiffness matrix (rows sum to zero, PSD).
/// mass: lumped barycentric vertex areas in mm^2 (one third of incident
///   face area per vertex).
/// grad: sparse (3F x N) map from nodal scalars to stacked per-face tangent
///   gradient vectors, units 1/mm.
/// Eigenpairs solve L psi = lambda M psi with Psi^T M Psi = I; eigenvalues
/// ascending, lambda_1 ~ 0 on a connected mesh.
struct GeometricOperators {
  Eigen::SparseMatrix<double> laplacian;  // N x N
  Eigen::VectorXd mass;                   // N
  Eigen::SparseMatrix<double> grad;       // 3F x N
  Eigen::VectorXd face_area;              // F, mm^2
  Eigen::MatrixX3d face_centroid;         // F x 3, mm
  Eigen::VectorXd eigenvalues;            // K, 1/mm^2
  Eigen::MatrixXd eigenfunctions;         // N x K
  int K = 0;

  int n_vertices() const { return static_cast<int>(mass.size()); }
  int n_faces() const { return static_cast<int>(face_area.size()); }
};

/// Cotangent stiffness matrix alone (used by the harmonic coordinate solve,
/// which does not need eigenpairs).
Eigen::SparseMatrix<double> cotan_laplacian(const SurfaceMesh& mesh);

/// Lumped barycentric vertex masses (mm^2).
Eigen::VectorXd lumped_mass(const SurfaceMesh& mesh);

/// Assembles all operators and the first K Laplace-Beltrami eigenpairs.
/// The generalized problem is symmetrized with M^{-1/2} (M is diagonal) and
/// solved densely, which is exact-spectrum and fine at desk scale.
GeometricOperators build_operators(const SurfaceMesh& mesh, int K);

/// Sparse (3F x N) per-face gradient operator on its own.
Eigen::SparseMatrix<double> face_gradient_operator(const SurfaceMesh& mesh);

/// Per-face tangent gradient of a nodal scalar field; exact for fields that
/// are linear over each (planar) face.
Eigen::MatrixX3d face_gradient(const GeometricOperators& ops, const Eigen::VectorXd& field);

/// Same, straight from a mesh (no operator bundle needed).
Eigen::MatrixX3d face_gradient_from_mesh(const SurfaceMesh& mesh, const Eigen::VectorXd& field);

}  // namespace ecgfwd
