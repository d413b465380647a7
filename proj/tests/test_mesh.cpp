#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "ecgfwd/errors.hpp"
#include "ecgfwd/mesh.hpp"
#include "ecgfwd/synth.hpp"

using namespace ecgfwd;

namespace {

SurfaceMesh single_triangle() {
  SurfaceMesh mesh;
  mesh.vertices.resize(3, 3);
  mesh.vertices << 0, 0, 0, 1, 0, 0, 0.5, std::sqrt(3.0) / 2.0, 0;
  mesh.faces.resize(1, 3);
  mesh.faces << 0, 1, 2;
  return mesh;
}

std::string temp_path(const char* name) {
  return std::string("/tmp/ecgfwd_test_") + name;
}

}  // namespace

TEST_CASE("face helpers on the unit equilateral triangle") {
  const SurfaceMesh mesh = single_triangle();
  CHECK(face_area(mesh, 0) == doctest::Approx(std::sqrt(3.0) / 4.0).epsilon(1e-12));
  CHECK(face_normal(mesh, 0).isApprox(Eigen::Vector3d(0, 0, 1), 1e-12));
  CHECK(face_centroid(mesh, 0)(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(total_area(mesh) == doctest::Approx(face_area(mesh, 0)).epsilon(1e-12));
}

TEST_CASE("validation rejects broken meshes with the offending element named") {
  SurfaceMesh mesh = single_triangle();

  SUBCASE("out-of-range face index names face 0") {
    mesh.faces(0, 2) = 3;
    CHECK_THROWS_WITH_AS(validate_mesh(mesh, false),
                         doctest::Contains("face 0"), ValidationError);
  }
  SUBCASE("repeated vertex in a face") {
    mesh.faces(0, 2) = 1;
    CHECK_THROWS_WITH_AS(validate_mesh(mesh, false),
                         doctest::Contains("repeated"), ValidationError);
  }
  SUBCASE("degenerate face") {
    mesh.vertices.row(2) = mesh.vertices.row(0);
    mesh.vertices(2, 0) += 1e-12;
    CHECK_THROWS_WITH_AS(validate_mesh(mesh, false),
                         doctest::Contains("degenerate"), ValidationError);
  }
  SUBCASE("non-manifold edge (three faces share it)") {
    mesh.vertices.conservativeResize(5, 3);
    mesh.vertices.row(3) = Eigen::RowVector3d(0.5, -0.8, 0.0);
    mesh.vertices.row(4) = Eigen::RowVector3d(0.5, 0.2, 0.9);
    mesh.faces.conservativeResize(3, 3);
    mesh.faces.row(1) << 0, 3, 1;
    mesh.faces.row(2) << 0, 1, 4;
    CHECK_THROWS_WITH_AS(validate_mesh(mesh, false),
                         doctest::Contains("shared by"), ValidationError);
  }
  SUBCASE("disconnected component") {
    mesh.vertices.conservativeResize(6, 3);
    mesh.vertices.row(3) = Eigen::RowVector3d(10, 0, 0);
    mesh.vertices.row(4) = Eigen::RowVector3d(11, 0, 0);
    mesh.vertices.row(5) = Eigen::RowVector3d(10, 1, 0);
    mesh.faces.conservativeResize(2, 3);
    mesh.faces.row(1) << 3, 4, 5;
    CHECK_THROWS_WITH_AS(validate_mesh(mesh, false),
                         doctest::Contains("disconnected"), ValidationError);
  }
  SUBCASE("fibre must be unit and in-plane") {
    mesh.fibres.resize(1, 3);
    mesh.fibres << 2, 0, 0;
    CHECK_THROWS_WITH_AS(validate_mesh(mesh, false),
                         doctest::Contains("not unit norm"), ValidationError);
    mesh.fibres << 0, 0, 1;  // unit but normal to the face
    CHECK_THROWS_WITH_AS(validate_mesh(mesh, false),
                         doctest::Contains("not in face plane"), ValidationError);
  }
  SUBCASE("uac outside [0,1]") {
    mesh.uac.resize(3, 2);
    mesh.uac << 0, 0, 0.5, 0.5, 1.0, 1.5;
    CHECK_THROWS_WITH_AS(validate_mesh(mesh, false),
                         doctest::Contains("outside [0,1]"), ValidationError);
  }
  SUBCASE("landmark sets must be non-empty and disjoint") {
    CHECK_THROWS_WITH_AS(validate_mesh(mesh, true),
                         doctest::Contains("missing or empty"), ValidationError);
    mesh.landmarks.alpha0 = {0};
    mesh.landmarks.alpha1 = {1};
    mesh.landmarks.beta0 = {2};
    mesh.landmarks.beta1 = {0};  // clashes with alpha0
    CHECK_THROWS_WITH_AS(validate_mesh(mesh, true),
                         doctest::Contains("in both"), ValidationError);
  }
}

TEST_CASE("json round-trip reproduces every field bit-exactly") {
  SurfaceMesh mesh = make_icosphere(1, 12.5);
  mesh.vertices(0, 0) += 1.0e-13;  // force a value without a short decimal form
  mesh.fibres.resize(mesh.n_faces(), 3);
  for (int f = 0; f < mesh.n_faces(); ++f) {
    Eigen::Vector3d n = face_normal(mesh, f);
    Eigen::Vector3d e = (mesh.vertices.row(mesh.faces(f, 1)) - mesh.vertices.row(mesh.faces(f, 0)));
    mesh.fibres.row(f) = (e - e.dot(n) * n).normalized();
  }
  mesh.uac.resize(mesh.n_vertices(), 2);
  for (int i = 0; i < mesh.n_vertices(); ++i)
    mesh.uac.row(i) << (std::sin(i * 0.7) + 1.0) / 2.0, (std::cos(i * 0.3) + 1.0) / 2.0;
  mesh.landmarks.alpha0 = {0};
  mesh.landmarks.alpha1 = {1};
  mesh.landmarks.beta0 = {2};
  mesh.landmarks.beta1 = {3, 4};

  const std::string path = temp_path("roundtrip.json");
  save_mesh(mesh, path);
  const SurfaceMesh back = load_mesh(path);
  CHECK((back.vertices.array() == mesh.vertices.array()).all());
  CHECK((back.faces.array() == mesh.faces.array()).all());
  CHECK((back.fibres.array() == mesh.fibres.array()).all());
  CHECK((back.uac.array() == mesh.uac.array()).all());
  CHECK(back.landmarks.alpha0 == mesh.landmarks.alpha0);
  CHECK(back.landmarks.beta1 == mesh.landmarks.beta1);

  // Second generation must be byte-identical (stable serialization).
  const std::string again = mesh_to_json(back);
  CHECK(again == mesh_to_json(mesh));
  std::remove(path.c_str());
}

TEST_CASE("json loader reports schema problems") {
  CHECK_THROWS_WITH_AS(mesh_from_json("{not json"), doctest::Contains("malformed JSON"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(
      mesh_from_json(R"({"version":1,"vertices":[[0,0,0],[1,0,0],[0,1,0]],"faces":[[0,1,3]]})"),
      doctest::Contains("face 0"), ValidationError);
  CHECK_THROWS_AS(load_mesh("/nonexistent/mesh.json"), IoError);
}

TEST_CASE("plain OFF import carries geometry only") {
  const std::string path = temp_path("tri.off");
  {
    std::ofstream out(path);
    out << "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
  }
  const SurfaceMesh mesh = load_mesh(path);
  CHECK(mesh.n_vertices() == 3);
  CHECK(mesh.n_faces() == 1);
  CHECK(!mesh.has_fibres());
  CHECK(!mesh.has_uac());
  std::remove(path.c_str());
}

TEST_CASE("icosphere counts and subdivision invariants") {
  for (int s = 0; s <= 2; ++s) {
    const SurfaceMesh sphere = make_icosphere(s, 1.0);
    const int expect_f = 20 * (1 << (2 * s));
    CHECK(sphere.n_faces() == expect_f);
    CHECK(sphere.n_vertices() == 10 * (1 << (2 * s)) + 2);
    CHECK_NOTHROW(validate_mesh(sphere, false));
  }

  const SurfaceMesh sphere = make_icosphere(2, 1.0);
  const SurfaceMesh fine = subdivide(sphere);
  CHECK(fine.n_faces() == 4 * sphere.n_faces());
  CHECK(fine.n_vertices() ==
        sphere.n_vertices() + static_cast<int>(mesh_edges(sphere).size()));
  // Midpoint subdivision is planar per face, so area is preserved exactly.
  CHECK(total_area(fine) == doctest::Approx(total_area(sphere)).epsilon(1e-9));
}

TEST_CASE("subdivision propagates uac, fibres, and landmarks") {
  const SurfaceMesh sheet = make_sheet(4, 5, 2.0, 1.0);
  const SurfaceMesh fine = subdivide(sheet);

  CHECK(fine.n_faces() == 4 * sheet.n_faces());
  CHECK(fine.uac.rows() == fine.n_vertices());
  CHECK(fine.fibres.rows() == fine.n_faces());
  CHECK_NOTHROW(validate_mesh(fine, true));

  // alpha0 spans a 5-vertex boundary row joined by 4 edges, so it gains
  // exactly the 4 midpoints; beta0 spans 2 vertices joined by 1 edge.
  CHECK(fine.landmarks.alpha0.size() == sheet.landmarks.alpha0.size() + 4);
  CHECK(fine.landmarks.beta0.size() == sheet.landmarks.beta0.size() + 1);

  // alpha is linear in x, and midpoint averaging of a linear function is the
  // function at the midpoint, so the refined alpha still equals x/width.
  for (int i = 0; i < fine.n_vertices(); ++i)
    CHECK(std::abs(fine.uac(i, 0) - fine.vertices(i, 0) / 2.0) < 1e-6);

  // Child faces inherit the parent fibre verbatim.
  for (int f = 0; f < fine.n_faces(); ++f)
    CHECK((fine.fibres.row(f) - Eigen::RowVector3d(0, 1, 0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a single-triangle file is the smallest valid mesh") {
  const std::string path = temp_path("tri.json");
  {
    std::ofstream out(path);
    out << R"({"version":1,"vertices":[[0,0,0],[1,0,0],[0,1,0]],"faces":[[0,1,2]]})";
  }
  const SurfaceMesh mesh = load_mesh(path);
  CHECK(mesh.n_vertices() == 3);
  CHECK(mesh.n_faces() == 1);
  CHECK(!mesh.landmarks.all_present());
  std::remove(path.c_str());
}
