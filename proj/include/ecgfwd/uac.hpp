#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ecgfwd/mesh.hpp"

namespace ecgfwd {

/// Solves the discrete Laplace equation L u = 0 on interior nodes with
/// Dirichlet values 0 on `set0` and 1 on `set1`. Result clamped to [0,1].
Eigen::VectorXd harmonic_field(const SurfaceMesh& mesh, const std::vector<int>& set0,
                               const std::vector<int>& set1);

/// Computes both harmonic surface coordinates from the mesh landmarks
/// (alpha between the alpha0/alpha1 sets, beta likewise), stores them into
/// mesh.uac and returns a reference to it.
Eigen::MatrixX2d& compute_uac(SurfaceMesh& mesh);

}  // namespace ecgfwd
