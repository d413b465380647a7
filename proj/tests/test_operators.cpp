#include <cmath>
#include <numbers>

#include "doctest.h"
#include "ecgfwd/errors.hpp"
#include "ecgfwd/operators.hpp"
#include "ecgfwd/rng.hpp"
#include "ecgfwd/synth.hpp"

using namespace ecgfwd;

namespace {

SurfaceMesh equilateral() {
  SurfaceMesh mesh;
  mesh.vertices.resize(3, 3);
  mesh.vertices << 0, 0, 0, 1, 0, 0, 0.5, std::sqrt(3.0) / 2.0, 0;
  mesh.faces.resize(1, 3);
  mesh.faces << 0, 1, 2;
  return mesh;
}

}  // namespace

TEST_CASE("cotangent weights on the unit equilateral triangle match hand values") {
  const SurfaceMesh mesh = equilateral();
  const Eigen::MatrixXd L = Eigen::MatrixXd(cotan_laplacian(mesh));
  const double w = 0.5 / std::tan(std::numbers::pi / 3.0);  // cot(60 deg)/2
  for (int i = 0; i < 3; ++i) {
    CHECK(L(i, i) == doctest::Approx(2.0 * w).epsilon(1e-10));
    for (int j = 0; j < 3; ++j)
      if (i != j) CHECK(L(i, j) == doctest::Approx(-w).epsilon(1e-10));
  }
  const Eigen::VectorXd m = lumped_mass(mesh);
  for (int i = 0; i < 3; ++i)
    CHECK(m(i) == doctest::Approx(std::sqrt(3.0) / 12.0).epsilon(1e-10));
}

TEST_CASE("laplacian structure: symmetry, zero row sums, PSD") {
  const SurfaceMesh mesh = gen_synthetic_atrium(AtriumParams{}, 7);
  const Eigen::SparseMatrix<double> L = cotan_laplacian(mesh);
  const Eigen::SparseMatrix<double> Lt = L.transpose();
  CHECK((Eigen::MatrixXd(L) - Eigen::MatrixXd(Lt)).cwiseAbs().maxCoeff() == 0.0);

  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(mesh.n_vertices());
  CHECK((L * ones).cwiseAbs().maxCoeff() < 1e-9);

  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd v(mesh.n_vertices());
    for (int i = 0; i < v.size(); ++i) v(i) = rng.uniform(-1.0, 1.0);
    CHECK(v.dot(L * v) >= -1e-9 * v.squaredNorm());
  }

  const Eigen::VectorXd m = lumped_mass(mesh);
  CHECK(m.minCoeff() > 0.0);
  CHECK(m.sum() == doctest::Approx(total_area(mesh)).epsilon(1e-9));
}

TEST_CASE("eigenpairs: M-orthonormal, ascending, generalized residual") {
  const SurfaceMesh mesh = make_icosphere(2, 1.0);  // 162 vertices
  const int K = 16;
  const GeometricOperators ops = build_operators(mesh, K);

  CHECK(ops.K == K);
  CHECK(ops.eigenvalues.size() == K);
  CHECK(ops.eigenvalues(0) <= 1e-8);
  for (int k = 1; k < K; ++k) CHECK(ops.eigenvalues(k) >= ops.eigenvalues(k - 1));

  const Eigen::MatrixXd gram =
      ops.eigenfunctions.transpose() * ops.mass.asDiagonal() * ops.eigenfunctions;
  CHECK((gram - Eigen::MatrixXd::Identity(K, K)).cwiseAbs().maxCoeff() < 1e-8);

  for (int k = 0; k < K; ++k) {
    const Eigen::VectorXd psi = ops.eigenfunctions.col(k);
    const Eigen::VectorXd lhs = ops.laplacian * psi;
    const Eigen::VectorXd rhs = ops.eigenvalues(k) * ops.mass.asDiagonal() * psi;
    const double scale =
        (ops.mass.asDiagonal() * psi).norm() * std::max(ops.eigenvalues(k), 1.0);
    CHECK((lhs - rhs).norm() <= 1e-6 * scale);
  }

  CHECK_THROWS_AS(build_operators(mesh, mesh.n_vertices() + 1), ValidationError);
  CHECK_THROWS_AS(build_operators(mesh, 0), ValidationError);
}

TEST_CASE("unit icosphere spectrum approximates l(l+1)") {
  const SurfaceMesh mesh = make_icosphere(3, 1.0);  // 642 vertices
  const GeometricOperators ops = build_operators(mesh, 9);
  CHECK(std::abs(ops.eigenvalues(0)) < 1e-8);
  for (int k = 1; k <= 3; ++k)
    CHECK(ops.eigenvalues(k) == doctest::Approx(2.0).epsilon(0.05));  // l=1
  for (int k = 4; k <= 8; ++k)
    CHECK(ops.eigenvalues(k) == doctest::Approx(6.0).epsilon(0.05));  // l=2
}

TEST_CASE("face gradient reproduces affine functions on a planar sheet") {
  const SurfaceMesh sheet = make_sheet(6, 7, 2.0, 1.5);
  const GeometricOperators ops = build_operators(sheet, 4);

  Eigen::VectorXd constant = Eigen::VectorXd::Constant(sheet.n_vertices(), 3.5);
  CHECK(face_gradient(ops, constant).cwiseAbs().maxCoeff() < 1e-12);

  Eigen::VectorXd fx = sheet.vertices.col(0);
  Eigen::MatrixX3d gx = face_gradient(ops, fx);
  for (int f = 0; f < sheet.n_faces(); ++f)
    CHECK((gx.row(f) - Eigen::RowVector3d(1, 0, 0)).cwiseAbs().maxCoeff() < 1e-10);

  Eigen::VectorXd affine = sheet.vertices.col(0) + 2.0 * sheet.vertices.col(1);
  Eigen::MatrixX3d ga = face_gradient(ops, affine);
  for (int f = 0; f < sheet.n_faces(); ++f)
    CHECK((ga.row(f) - Eigen::RowVector3d(1, 2, 0)).cwiseAbs().maxCoeff() < 1e-10);

  // The standalone overload agrees with the operator-bundle one.
  Eigen::MatrixX3d direct = face_gradient_from_mesh(sheet, affine);
  CHECK((direct - ga).cwiseAbs().maxCoeff() < 1e-14);

  CHECK_THROWS_AS(face_gradient(ops, Eigen::VectorXd::Zero(3)), ValidationError);
}

TEST_CASE("gradient lives in the face plane on a curved mesh") {
  const SurfaceMesh sphere = make_icosphere(2, 3.0);
  Eigen::VectorXd field = sphere.vertices.col(2);
  const Eigen::MatrixX3d g = face_gradient_from_mesh(sphere, field);
  for (int f = 0; f < sphere.n_faces(); ++f)
    CHECK(std::abs(g.row(f).dot(face_normal(sphere, f))) < 1e-10);
}
