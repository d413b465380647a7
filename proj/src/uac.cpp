#include "ecgfwd/uac.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <vector>

#include "ecgfwd/errors.hpp"
#include "ecgfwd/operators.hpp"

namespace ecgfwd {

Eigen::VectorXd harmonic_field(const SurfaceMesh& mesh, const std::vector<int>& set0,
                               const std::vector<int>& set1) {
  if (set0.empty() || set1.empty())
    throw ValidationError("harmonic_field: empty landmark set");
  const int n = mesh.n_vertices();

  Eigen::VectorXd boundary_value = Eigen::VectorXd::Zero(n);
  std::vector<char> is_boundary(n, 0);
  for (int idx : set0) is_boundary.at(idx) = 1;
  for (int idx : set1) {
    if (is_boundary.at(idx))
      throw ValidationError("harmonic_field: vertex " + std::to_string(idx) + " in both sets");
    is_boundary[idx] = 1;
    boundary_value[idx] = 1.0;
  }

  std::vector<int> interior;
  std::vector<int> pos(n, -1);
  for (int i = 0; i < n; ++i)
    if (!is_boundary[i]) {
      pos[i] = static_cast<int>(interior.size());
      interior.push_back(i);
    }

  Eigen::VectorXd field = boundary_value;
  if (interior.empty()) return field;

  const Eigen::SparseMatrix<double> L = cotan_laplacian(mesh);
  const int ni = static_cast<int>(interior.size());
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(ni);
  for (int col = 0; col < L.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(L, col); it; ++it) {
      const int i = static_cast<int>(it.row()), j = static_cast<int>(it.col());
      if (is_boundary[i]) continue;
      if (is_boundary[j])
        rhs[pos[i]] -= it.value() * boundary_value[j];
      else
        trips.emplace_back(pos[i], pos[j], it.value());
    }
  }
  Eigen::SparseMatrix<double> A(ni, ni);
  A.setFromTriplets(trips.begin(), trips.end());

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  Eigen::VectorXd x;
  if (ldlt.info() == Eigen::Success) {
    x = ldlt.solve(rhs);
  }
  if (ldlt.info() != Eigen::Success || !x.allFinite()) {
    // Obtuse-heavy meshes can make the interior block indefinite enough for
    // LDLT to reject; fall back to a general sparse LU.
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(A);
    if (lu.info() != Eigen::Success)
      throw ValidationError("harmonic_field: singular system (disconnected patch?)");
    x = lu.solve(rhs);
    if (!x.allFinite())
      throw ValidationError("harmonic_field: singular system (disconnected patch?)");
  }

  for (int k = 0; k < ni; ++k) field[interior[k]] = std::clamp(x[k], 0.0, 1.0);
  return field;
}

Eigen::MatrixX2d& compute_uac(SurfaceMesh& mesh) {
  if (!mesh.landmarks.all_present())
    throw ValidationError("compute_uac: all four landmark sets must be present and non-empty");
  const Eigen::VectorXd alpha = harmonic_field(mesh, mesh.landmarks.alpha0, mesh.landmarks.alpha1);
  const Eigen::VectorXd beta = harmonic_field(mesh, mesh.landmarks.beta0, mesh.landmarks.beta1);
  mesh.uac.resize(mesh.n_vertices(), 2);
  mesh.uac.col(0) = alpha;
  mesh.uac.col(1) = beta;
  return mesh.uac;
}

}  // namespace ecgfwd
