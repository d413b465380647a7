#include "ecgfwd/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include "ecgfwd/errors.hpp"

namespace ecgfwd {

namespace {

constexpr double kPi = std::numbers::pi;

// -3 dB frequency of the unit-delay-normalized second-order Bessel prototype
// 3/(s^2 + 3s + 3): |H|^2 = 1/2 at omega^2 = 3(sqrt(5)-1)/2.
const double kBesselCorner = std::sqrt(1.5 * (std::sqrt(5.0) - 1.0));

// Bilinear transform of (B2 s^2 + B1 s + B0)/(s^2 + A1 s + A0) with
// s = K (1 - z^-1)/(1 + z^-1), K = 2 fs.
Biquad bilinear(double B2, double B1, double B0, double A1, double A0, double fs) {
  const double K = 2.0 * fs;
  const double D = K * K + A1 * K + A0;
  Biquad q;
  q.b0 = (B2 * K * K + B1 * K + B0) / D;
  q.b1 = (2.0 * B0 - 2.0 * B2 * K * K) / D;
  q.b2 = (B2 * K * K - B1 * K + B0) / D;
  q.a1 = (2.0 * A0 - 2.0 * K * K) / D;
  q.a2 = (K * K - A1 * K + A0) / D;
  return q;
}

double prewarp(double fc, double fs) {
  if (fc <= 0.0) throw ValidationError("filter design: cutoff must be > 0");
  if (fc >= fs / 2.0)
    throw ValidationError("filter design: cutoff " + std::to_string(fc) +
                          " Hz at or above Nyquist (fs = " + std::to_string(fs) + " Hz)");
  return 2.0 * fs * std::tan(kPi * fc / fs);  // rad/s
}

}  // namespace

OracleConfig default_oracle_config(const SurfaceMesh& mesh) {
  OracleConfig cfg;
  const Eigen::Vector3d centroid = mesh.vertices.colwise().mean();
  const Eigen::Vector3d offset(200.0, 300.0, 0.0);
  cfg.electrode_ra = centroid - offset;
  cfg.electrode_ll = centroid + offset;
  return cfg;
}

void validate_oracle_config(const OracleConfig& cfg) {
  if (cfg.sigma_b <= 0.0) throw ValidationError("oracle config: sigma_b must be > 0");
  if (cfg.thickness <= 0.0) throw ValidationError("oracle config: thickness must be > 0");
  if (!(cfg.sigma_l >= cfg.sigma_t && cfg.sigma_t > 0.0))
    throw ValidationError("oracle config: need sigma_l >= sigma_t > 0");
  if (!(cfg.f_lo < cfg.f_hi && cfg.f_hi < cfg.fs / 2.0))
    throw ValidationError("oracle config: need f_lo < f_hi < fs/2");
}

Eigen::Matrix3d conductivity_tensor(const Eigen::Vector3d& fibre, double sigma_l,
                                    double sigma_t) {
  if (std::abs(fibre.norm() - 1.0) > 1e-6)
    throw ValidationError("conductivity_tensor: fibre is not unit length");
  return sigma_t * Eigen::Matrix3d::Identity() +
         (sigma_l - sigma_t) * (fibre * fibre.transpose());
}

double ecg_potential(const SurfaceMesh& mesh, const GeometricOperators& ops,
                     const Eigen::VectorXd& frame_mv, const OracleConfig& cfg,
                     const Eigen::Vector3d& x_mm) {
  validate_oracle_config(cfg);
  if (ops.n_vertices() != mesh.n_vertices() || ops.n_faces() != mesh.n_faces())
    throw ValidationError("ecg_potential: operators built for a different mesh");
  if (frame_mv.size() != mesh.n_vertices())
    throw ValidationError("ecg_potential: frame length " + std::to_string(frame_mv.size()) +
                          " != vertex count " + std::to_string(mesh.n_vertices()));
  if (!mesh.has_fibres())
    throw ValidationError("ecg_potential: mesh has no fibres");

  // Ill-conditioned kernel guard: electrode at least 1 mm from the surface.
  double min_dist = std::numeric_limits<double>::infinity();
  for (int f = 0; f < ops.n_faces(); ++f)
    min_dist = std::min(min_dist, (x_mm.transpose() - ops.face_centroid.row(f)).norm());
  if (min_dist < 1.0)
    throw ValidationError("ecg_potential: electrode within 1 mm of the surface");

  // Work in SI: lengths to metres; voltages may stay in mV because the
  // result is converted straight back to mV (the two factors cancel).
  // Shifting by the first value keeps the mathematics unchanged (gradients
  // kill constants) while making a constant frame give exactly zero.
  const Eigen::VectorXd centered = frame_mv.array() - frame_mv(0);
  const Eigen::MatrixX3d grad_mv_per_mm = face_gradient(ops, centered);
  const Eigen::Vector3d x_m = x_mm * 1e-3;

  double phi = 0.0;
  for (int f = 0; f < ops.n_faces(); ++f) {
    const Eigen::Vector3d g = grad_mv_per_mm.row(f).transpose() * 1e3;  // mV/m
    const Eigen::Vector3d fibre = mesh.fibres.row(f);
    const Eigen::Vector3d source =
        cfg.sigma_t * g + (cfg.sigma_l - cfg.sigma_t) * fibre.dot(g) * fibre;
    const Eigen::Vector3d r = x_m - ops.face_centroid.row(f).transpose() * 1e-3;
    const double dist = r.norm();
    const double area_m2 = ops.face_area(f) * 1e-6;
    phi += area_m2 * source.dot(r) / (dist * dist * dist);
  }
  return cfg.thickness * 1e-3 / (4.0 * kPi * cfg.sigma_b) * phi;
}

double Biquad::gain_at(double f_hz, double fs) const {
  const std::complex<double> z = std::polar(1.0, -2.0 * kPi * f_hz / fs);
  const std::complex<double> num = b0 + b1 * z + b2 * z * z;
  const std::complex<double> den = 1.0 + a1 * z + a2 * z * z;
  return std::abs(num / den);
}

Biquad bessel_lowpass(double fc, double fs) {
  const double w = prewarp(fc, fs) / kBesselCorner;
  // 3 w^2 / (s^2 + 3 w s + 3 w^2): unity DC gain, -3 dB at fc.
  return bilinear(0.0, 0.0, 3.0 * w * w, 3.0 * w, 3.0 * w * w, fs);
}

Biquad bessel_highpass(double fc, double fs) {
  const double c = prewarp(fc, fs) * kBesselCorner;
  // s^2 / (s^2 + c s + c^2/3): unity gain at infinity, -3 dB at fc.
  return bilinear(1.0, 0.0, 0.0, c, c * c / 3.0, fs);
}

EcgTrace bessel_bandpass(const EcgTrace& trace, const OracleConfig& cfg) {
  if (trace.filtered) throw ValidationError("bessel_bandpass: trace already filtered");
  if (trace.fs != cfg.fs)
    throw ValidationError("bessel_bandpass: trace rate " + std::to_string(trace.fs) +
                          " != config rate " + std::to_string(cfg.fs));
  if (trace.size() < 2) throw ValidationError("bessel_bandpass: trace too short");
  validate_oracle_config(cfg);

  Biquad hp = bessel_highpass(cfg.f_lo, cfg.fs);
  Biquad lp = bessel_lowpass(cfg.f_hi, cfg.fs);
  EcgTrace out;
  out.samples.resize(trace.size());
  out.fs = trace.fs;
  out.filtered = true;
  for (int n = 0; n < trace.size(); ++n) out.samples(n) = lp.step(hp.step(trace.samples(n)));
  return out;
}

EcgTrace lead_ii_series(const SurfaceMesh& mesh, const GeometricOperators& ops,
                        const VoltageSequence& seq, const OracleConfig& cfg) {
  if (seq.n_frames() < 2) throw ValidationError("lead_ii_series: need at least 2 frames");
  EcgTrace trace;
  trace.samples.resize(seq.n_frames());
  trace.fs = 1000.0 / seq.frame_dt;
  trace.filtered = false;
  for (int t = 0; t < seq.n_frames(); ++t) {
    const Eigen::VectorXd frame = seq.frames.row(t);
    const double ra = ecg_potential(mesh, ops, frame, cfg, cfg.electrode_ra);
    const double ll = ecg_potential(mesh, ops, frame, cfg, cfg.electrode_ll);
    trace.samples(t) = lead_ii(ra, ll);
  }
  return trace;
}

EcgTrace forward_ecg(const SurfaceMesh& mesh, const GeometricOperators& ops,
                     const VoltageSequence& seq, const OracleConfig& cfg) {
  EcgTrace raw = lead_ii_series(mesh, ops, seq, cfg);

  if (std::abs(raw.fs - cfg.fs) > 1e-9 * cfg.fs) {
    // Linear resample from the frame clock onto the target rate.
    const double t_end = (seq.n_frames() - 1) * seq.frame_dt;  // ms
    const int n_out = static_cast<int>(std::floor(t_end * cfg.fs / 1000.0 + 1e-9)) + 1;
    if (n_out < 2) throw ValidationError("forward_ecg: resampled trace too short");
    Eigen::VectorXd resampled(n_out);
    for (int n = 0; n < n_out; ++n) {
      const double t_ms = n * 1000.0 / cfg.fs;
      const double pos = t_ms / seq.frame_dt;
      const int lo = std::min(static_cast<int>(pos), seq.n_frames() - 2);
      const double w = pos - lo;
      resampled(n) = (1.0 - w) * raw.samples(lo) + w * raw.samples(lo + 1);
    }
    raw.samples = std::move(resampled);
    raw.fs = cfg.fs;
  } else {
    raw.fs = cfg.fs;
  }
  return bessel_bandpass(raw, cfg);
}

}  // namespace ecgfwd
