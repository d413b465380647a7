#pragma once

#include <Eigen/Dense>

#include "ecgfwd/mesh.hpp"

namespace ecgfwd {

/// Arrival times of a paced anisotropic wavefront, from shortest paths over
/// the mesh edge graph.
struct ActivationField {
  Eigen::VectorXd times;  // per-node arrival (ms)
  int pacing_node = 0;
  double cv_long = 0.7;  // longitudinal speed (m/s)
  double aniso = 4.0;    // longitudinal:transverse speed ratio
};

/// Action-potential template shape (piecewise: rest, linear upstroke, cosine
/// repolarization back to rest).
struct ApParams {
  double v_rest = -81.0;  // mV
  double v_peak = 20.0;   // mV
  double upstroke_ms = 2.0;
  double apd_ms = 200.0;
};

/// Sequence of per-node voltage frames sampled on a uniform clock.
struct VoltageSequence {
  Eigen::MatrixXd frames;  // T x N (mV)
  double frame_dt = 1.0;   // ms
  double t0 = 0.0;         // ms
  // Set when the requested duration did not cover max arrival + APD; callers
  // record it in sample metadata rather than failing.
  bool duration_truncated = false;

  int n_frames() const { return static_cast<int>(frames.rows()); }
  int n_nodes() const { return static_cast<int>(frames.cols()); }
};

/// Anisotropic shortest-path arrival times from pacing_node. Edge cost is
/// length_mm / speed with speed(theta) = cv_long*sqrt(cos^2 + sin^2/aniso^2),
/// theta measured between the edge and the fibre axis averaged over the
/// edge's incident faces. length(mm)/speed(m/s) is already milliseconds.
ActivationField activation_times(const SurfaceMesh& mesh, int pacing_node, double cv_long,
                                 double aniso);

/// Template voltage at t_rel milliseconds after local activation.
double ap_template(double t_rel, const ApParams& params);

/// Samples frames[t][i] = ap_template(t*frame_dt - times[i]) on a uniform
/// clock covering [0, duration].
VoltageSequence gen_voltage_sequence(const SurfaceMesh& mesh, const ActivationField& act,
                                     const ApParams& params, double frame_dt, double duration);

}  // namespace ecgfwd
