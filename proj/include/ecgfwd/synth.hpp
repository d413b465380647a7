#pragma once

#include <cstdint>

#include "ecgfwd/mesh.hpp"

namespace ecgfwd {

/// Parameters for the synthetic atrium generator: an open ellipsoidal shell
/// tessellated from a res_u x res_v parametric grid, with smooth seeded
/// radial bumps and optional punched holes standing in for vein ostia.
struct AtriumParams {
  int res_u = 15;         // grid points along the polar direction
  int res_v = 18;         // grid points along the azimuthal direction
  double radius_mm = 25.0;
  double aspect_x = 1.0;  // ellipsoid semi-axis scale factors
  double aspect_y = 0.85;
  double aspect_z = 0.7;
  int holes = 2;
  double bump_amplitude = 0.08;  // relative radial perturbation
  int bump_modes = 5;
};

/// Generates a deterministic synthetic atrial shell: geometry, the four
/// boundary landmark sets, harmonic uac, and fibres along the tangential
/// gradient of beta (falling back to the gradient of alpha where that
/// vanishes). The result passes validate_mesh with landmarks required.
SurfaceMesh gen_synthetic_atrium(const AtriumParams& params, uint64_t seed);

/// Flat rectangular sheet in the z=0 plane spanning [0,width] x [0,height],
/// with landmark sets on the four edges (alpha along x, beta along y), uac
/// computed harmonically, and fibres along +y. Small and exactly planar, so
/// analytic answers are available for operator and uac tests.
SurfaceMesh make_sheet(int res_u, int res_v, double width = 1.0, double height = 1.0);

}  // namespace ecgfwd
