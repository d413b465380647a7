#pragma once

#include <Eigen/Dense>

#include "ecgfwd/activation.hpp"
#include "ecgfwd/mesh.hpp"
#include "ecgfwd/operators.hpp"

namespace ecgfwd {

/// Physics and signal-chain settings for the ECG ground truth.
struct OracleConfig {
  double sigma_b = 0.24;   // bulk conductivity (S/m)
  double thickness = 1.4;  // monolayer surface-to-volume factor (mm)
  double sigma_l = 0.4;    // intracellular conductivity along the fibre (S/m)
  double sigma_t = 0.025;  // ... across the fibre (S/m); 16:1 = (4:1 velocity)^2
  Eigen::Vector3d electrode_ra = Eigen::Vector3d::Zero();  // mm
  Eigen::Vector3d electrode_ll = Eigen::Vector3d::Zero();  // mm
  double fs = 1000.0;  // sampling rate of the produced trace (Hz)
  double f_lo = 0.05;  // band-pass corner frequencies (Hz)
  double f_hi = 60.0;
};

/// Config with electrodes on a torso-scale offset from the mesh centroid.
OracleConfig default_oracle_config(const SurfaceMesh& mesh);

void validate_oracle_config(const OracleConfig& cfg);

/// A sampled ECG lead.
struct EcgTrace {
  Eigen::VectorXd samples;  // mV
  double fs = 1000.0;       // Hz
  bool filtered = false;

  int size() const { return static_cast<int>(samples.size()); }
};

/// sigma_t*I + (sigma_l - sigma_t)*f*f^T for a unit fibre axis f.
Eigen::Matrix3d conductivity_tensor(const Eigen::Vector3d& fibre, double sigma_l, double sigma_t);

/// Infinite-volume conductor potential (mV) of one voltage frame at point x:
/// phi(x) = thickness/(4 pi sigma_b) * sum_f A_f (sigma_f grad V)_f . r_f / |r_f|^3
/// with everything converted to SI internally.
double ecg_potential(const SurfaceMesh& mesh, const GeometricOperators& ops,
                     const Eigen::VectorXd& frame_mv, const OracleConfig& cfg,
                     const Eigen::Vector3d& x_mm);

/// Lead II from the two limb potentials.
inline double lead_ii(double phi_ra, double phi_ll) { return phi_ll - phi_ra; }

/// One second-order IIR section y[n] = b0 x + b1 x' + b2 x'' - a1 y' - a2 y''.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;

  /// Direct-form II transposed step with internal state.
  double step(double x) {
    const double y = b0 * x + s1_;
    s1_ = b1 * x - a1 * y + s2_;
    s2_ = b2 * x - a2 * y;
    return y;
  }
  void reset() { s1_ = s2_ = 0.0; }

  /// Magnitude of the digital transfer function at frequency f (Hz).
  double gain_at(double f_hz, double fs) const;

 private:
  double s1_ = 0.0, s2_ = 0.0;
};

/// Second-order Bessel sections, -3 dB at fc, discretized by the bilinear
/// transform with the analog corner prewarped so the digital -3 dB point
/// lands on fc exactly.
Biquad bessel_lowpass(double fc, double fs);
Biquad bessel_highpass(double fc, double fs);

/// High-pass at cfg.f_lo cascaded with low-pass at cfg.f_hi, causal single
/// pass from zero state.
EcgTrace bessel_bandpass(const EcgTrace& trace, const OracleConfig& cfg);

/// Unfiltered Lead II sampled on the frame clock of `seq`.
EcgTrace lead_ii_series(const SurfaceMesh& mesh, const GeometricOperators& ops,
                        const VoltageSequence& seq, const OracleConfig& cfg);

/// Full oracle: per-frame potentials -> Lead II -> linear resample to cfg.fs
/// (when the frame rate differs) -> Bessel band-pass.
EcgTrace forward_ecg(const SurfaceMesh& mesh, const GeometricOperators& ops,
                     const VoltageSequence& seq, const OracleConfig& cfg);

}  // namespace ecgfwd
